#include <doctest.h>

#include "isogplvm/errors.hpp"
#include "isogplvm/gp.hpp"
#include "isogplvm/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace isogplvm;

namespace {

MatrixXd randn(int r, int c, CounterRng& rng, double scale = 1.0) {
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  return m;
}

KernelParams kernel(int q, double ls, double var, double jitter = 1e-8) {
  KernelParams kp;
  kp.log_lengthscales = VectorXd::Constant(q, std::log(ls));
  kp.log_variance = std::log(var);
  kp.log_jitter = std::log(jitter);
  return kp;
}

JacobianField random_field(int m, int q, int amb, CounterRng& rng) {
  JacobianField f;
  f.latent_dim = q;
  f.ambient_dim = amb;
  f.kernel = kernel(q, 0.9, 1.3, 1e-6);
  f.kernel.log_lengthscales(0) = std::log(1.1);
  f.inducing.locations = randn(m, q, rng);
  f.inducing.mean = randn(m, amb * q, rng);
  MatrixXd l = randn(m, m, rng, 0.3).triangularView<Eigen::Lower>();
  for (int i = 0; i < m; ++i) l(i, i) = 0.4 + 0.3 * std::abs(l(i, i));
  f.inducing.chol_cov = l;
  return f;
}

// Scalar objective sum(gm .* mean) + sum(gc .* cov) + KL and its gradient.
struct Objective {
  MatrixXd gm, gc;
  MatrixXd points;

  double value(const JacobianField& f) const {
    const SparseGp gp(f);
    const auto mom = gp.moments(points);
    return (gm.array() * mom.mean.array()).sum() + (gc.array() * mom.cov.array()).sum() + gp.kl();
  }
  std::pair<FieldGradient, MatrixXd> gradient(const JacobianField& f) const {
    const SparseGp gp(f);
    SparseGp::Workspace ws;
    gp.moments(points, &ws);
    auto adj = FieldAdjoint::zeros(f);
    MatrixXd d_points = MatrixXd::Zero(points.rows(), points.cols());
    gp.backward(points, ws, gm, gc, adj, &d_points);
    gp.kl(&adj);
    return {gp.finalize(adj), d_points};
  }
};

template <class Set>
double fd(const Objective& obj, JacobianField f, Set set, double base, double h) {
  set(f, base + h);
  const double up = obj.value(f);
  set(f, base - h);
  const double dn = obj.value(f);
  return (up - dn) / (2 * h);
}

}  // namespace

TEST_CASE("kernel matrix") {
  CounterRng rng(1, Stream::Sampling);
  const auto kp = kernel(2, 0.7, 2.5);
  const MatrixXd a = randn(5, 2, rng);
  const MatrixXd k = kernel_matrix(a, a, kp);
  for (int i = 0; i < 5; ++i) CHECK(k(i, i) == doctest::Approx(2.5).epsilon(1e-15));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  const auto flat = kernel(2, 1e12, 2.5);
  CHECK((kernel_matrix(a, a, flat).array() - 2.5).abs().maxCoeff() < 1e-12);
  KernelParams bad = kp;
  bad.log_jitter = std::log(1e-12);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("exact posterior") {
  MatrixXd train(3, 1);
  train << -1.0, 0.2, 1.5;
  VectorXd y(3);
  y << 0.3, -0.7, 1.1;
  const auto kp = kernel(1, 0.8, 1.7);
  const auto at_train = exact_posterior(train, train, y, kp, 0.0);
  CHECK((at_train.mean - y).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(at_train.cov.diagonal().maxCoeff() <= 1e-9);

  MatrixXd far(2, 1);
  far << 1e3, -1e3;
  const auto prior = exact_posterior(far, train, y, kp, 0.1);
  CHECK(prior.mean.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(prior.cov(0, 0) - 1.7) < 1e-12);

  MatrixXd test(4, 1);
  test << -2.0, -0.4, 0.9, 3.0;
  const auto got = exact_posterior(test, train, y, kp, 0.25);
  const auto [mean, cov] = testutil::dense_posterior(test, train, y, kp, 0.25);
  CHECK((got.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((got.cov - cov).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sparse moments recover the prior") {
  CounterRng rng(2, Stream::Sampling);
  JacobianField f = random_field(6, 2, 1, rng);
  f.kernel.log_jitter = std::log(1e-10);
  f.inducing.mean.setZero();
  const MatrixXd kuu = kernel_matrix(f.inducing.locations, f.inducing.locations, f.kernel);
  f.inducing.chol_cov = Eigen::LLT<MatrixXd>(kuu + 1e-12 * MatrixXd::Identity(6, 6)).matrixL();
  const MatrixXd t = randn(5, 2, rng);
  const auto mom = sparse_predictive_moments(f, t);
  CHECK(mom.mean.cwiseAbs().maxCoeff() < 1e-8);
  CHECK((mom.cov - kernel_matrix(t, t, f.kernel)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(SparseGp(f).kl()) < 1e-6);
}

TEST_CASE("sparse moments collapse at the inducing points") {
  CounterRng rng(3, Stream::Sampling);
  JacobianField f = random_field(5, 1, 1, rng);
  f.kernel.log_jitter = std::log(1e-10);
  f.inducing.locations = VectorXd::LinSpaced(5, -2.0, 2.0);
  f.inducing.chol_cov = 1e-7 * MatrixXd::Identity(5, 5);
  const auto mom = sparse_predictive_moments(f, f.inducing.locations);
  CHECK(mom.cov.cwiseAbs().maxCoeff() < 1e-8);
  CHECK((mom.mean - f.inducing.mean).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sparse moments match exact regression") {
  CounterRng rng(4, Stream::Sampling);
  for (int trial = 0; trial < 10; ++trial) {
    const int q = 1 + trial % 2;
    const int n = 4 + trial % 3;
    JacobianField f;
    f.latent_dim = q;
    f.ambient_dim = 1;
    f.kernel = kernel(q, 1.2, 0.8 + 0.1 * trial, 1e-10);
    f.inducing.locations = randn(n, q, rng, 1.5);
    const MatrixXd y = randn(n, q, rng);
    const double sd = 0.3;
    const MatrixXd kuu = kernel_matrix(f.inducing.locations, f.inducing.locations, f.kernel);
    const MatrixXd inv = (kuu + sd * sd * MatrixXd::Identity(n, n)).inverse();
    f.inducing.mean = kuu * inv * y;
    const MatrixXd s = kuu - kuu * inv * kuu;
    f.inducing.chol_cov = Eigen::LLT<MatrixXd>(0.5 * (s + s.transpose())).matrixL();
    const MatrixXd t = randn(6, q, rng, 1.5);
    const auto mom = sparse_predictive_moments(f, t);
    for (int p = 0; p < q; ++p) {
      const auto ex = exact_posterior(t, f.inducing.locations, y.col(p), f.kernel, sd);
      CHECK((mom.mean.col(p) - ex.mean).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((mom.cov - ex.cov).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("field samples along a curve") {
  CounterRng rng(5, Stream::Sampling);
  const JacobianField f = random_field(5, 2, 1, rng);
  const MatrixXd t = randn(3, 2, rng);
  CHECK(sample_field_along_curve(f, t, {}).empty());

  std::vector<MatrixXd> noise;
  for (int s = 0; s < 10000; ++s) noise.push_back(randn(3, 2, rng));
  const auto draws = sample_field_along_curve(f, t, noise);
  const auto mom = sparse_predictive_moments(f, t);
  MatrixXd mean = MatrixXd::Zero(3, 2);
  for (const auto& d : draws) mean += d;
  mean /= 10000.0;
  for (int i = 0; i < 3; ++i)
    for (int p = 0; p < 2; ++p) CHECK(std::abs(mean(i, p) - mom.mean(i, p)) < 4.0 * std::sqrt(mom.cov(i, i) / 1e4));

  // Fixed draws: the output is affine in mu_u.
  JacobianField g = f;
  const MatrixXd delta = randn(5, 2, rng);
  const double h = 1e-4;
  g.inducing.mean = f.inducing.mean + h * delta;
  const auto up = sample_field_along_curve(g, t, {noise[0]});
  g.inducing.mean = f.inducing.mean - h * delta;
  const auto dn = sample_field_along_curve(g, t, {noise[0]});
  const MatrixXd directional = (up[0] - dn[0]) / (2 * h);
  const MatrixXd predicted = (sparse_predictive_moments(g, t).mean - mom.mean) / -h;  // A^T delta
  CHECK((directional - predicted).norm() <= 1e-4 * predicted.norm());
}

TEST_CASE("inducing KL") {
  JacobianField f;
  f.latent_dim = 1;
  f.ambient_dim = 2;
  f.kernel = kernel(1, 1e-3, 1.0, 1e-10);
  f.inducing.locations = MatrixXd(2, 1);
  f.inducing.locations << 0.0, 100.0;  // K_uu = I
  f.inducing.mean = MatrixXd::Zero(2, 2);
  f.inducing.mean(0, 0) = 1.0;
  f.inducing.mean(0, 1) = 1.0;
  f.inducing.chol_cov = MatrixXd::Identity(2, 2);
  CHECK(kl_qu_pu(f.inducing, f.kernel) == doctest::Approx(1.0).epsilon(1e-8));  // 0.5 per channel

  CounterRng rng(6, Stream::Sampling);
  for (int k = 0; k < 10; ++k) {
    const auto g = random_field(4, 2, 2, rng);
    CHECK(kl_qu_pu(g.inducing, g.kernel) >= 0.0);
  }
}

TEST_CASE("sparse moment and KL gradients") {
  CounterRng rng(7, Stream::Sampling);
  for (int trial = 0; trial < 3; ++trial) {
    const int q = 2, amb = 2, m = 3, t = 3;
    const JacobianField f = random_field(m, q, amb, rng);
    Objective obj{randn(t, amb * q, rng), randn(t, t, rng), randn(t, q, rng)};
    const auto [g, d_points] = obj.gradient(f);
    const double h = 1e-5;
    auto check = [&](double analytic, double numeric) {
      CHECK(testutil::rel_err(analytic, numeric, 1e-6) < 1e-4);
    };
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < amb * q; ++p)
        check(g.d_mean(i, p), fd(obj, f, [&](JacobianField& x, double v) { x.inducing.mean(i, p) = v; },
                                 f.inducing.mean(i, p), h));
    for (int i = 0; i < m; ++i)
      for (int j = 0; j <= i; ++j)
        check(g.d_chol_cov(i, j),
              fd(obj, f, [&](JacobianField& x, double v) { x.inducing.chol_cov(i, j) = v; },
                 f.inducing.chol_cov(i, j), h));
    for (int i = 0; i < m; ++i)
      for (int d = 0; d < q; ++d)
        check(g.d_locations(i, d),
              fd(obj, f, [&](JacobianField& x, double v) { x.inducing.locations(i, d) = v; },
                 f.inducing.locations(i, d), h));
    for (int d = 0; d < q; ++d)
      check(g.d_kernel.d_log_lengthscales(d),
            fd(obj, f, [&](JacobianField& x, double v) { x.kernel.log_lengthscales(d) = v; },
               f.kernel.log_lengthscales(d), h));
    check(g.d_kernel.d_log_variance,
          fd(obj, f, [&](JacobianField& x, double v) { x.kernel.log_variance = v; },
             f.kernel.log_variance, h));
    for (int i = 0; i < t; ++i)
      for (int d = 0; d < q; ++d) {
        Objective moved = obj;
        moved.points(i, d) += h;
        const double up = moved.value(f);
        moved.points(i, d) -= 2 * h;
        const double dn = moved.value(f);
        check(d_points(i, d), (up - dn) / (2 * h));
      }
  }
}

TEST_CASE("point moments and derivatives") {
  CounterRng rng(8, Stream::Sampling);
  const JacobianField f = random_field(5, 2, 3, rng);
  const SparseGp gp(f);
  const VectorXd z = randn(2, 1, rng);
  const auto pm = gp.point_moments(z, true);
  const auto mom = gp.moments(z.transpose());
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) CHECK(std::abs(pm.mean(r, c) - mom.mean(0, r * 2 + c)) < 1e-12);
  CHECK(std::abs(pm.variance - mom.cov(0, 0)) < 1e-10);
  const double h = 1e-6;
  for (int d = 0; d < 2; ++d) {
    VectorXd up = z, dn = z;
    up(d) += h;
    dn(d) -= h;
    const auto a = gp.point_moments(up, false), b = gp.point_moments(dn, false);
    CHECK(((a.mean - b.mean) / (2 * h) - pm.d_mean[static_cast<std::size_t>(d)]).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs((a.variance - b.variance) / (2 * h) - pm.d_variance(d)) < 1e-6);
  }
}
