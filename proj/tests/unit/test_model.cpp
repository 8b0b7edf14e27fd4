#include <doctest.h>

#include "elbo_fd.hpp"
#include "isogplvm/errors.hpp"
#include "isogplvm/model.hpp"
#include "isogplvm/report.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace isogplvm;

namespace {

// J = [I; 0] reproduced by a dense inducing grid with a nearly
// deterministic q(u).
JacobianField identity_field(int ambient) {
  JacobianField f;
  f.latent_dim = 2;
  f.ambient_dim = ambient;
  f.kernel.log_lengthscales = VectorXd::Constant(2, std::log(1.5));
  f.kernel.log_variance = 0.0;
  f.kernel.log_jitter = std::log(1e-10);
  const int g = 7;
  f.inducing.locations.resize(g * g, 2);
  for (int a = 0; a < g; ++a)
    for (int b = 0; b < g; ++b) f.inducing.locations.row(a * g + b) << -3.0 + a, -3.0 + b;
  f.inducing.mean = MatrixXd::Zero(g * g, ambient * 2);
  f.inducing.mean.col(0).setOnes();  // J[0,0]
  f.inducing.mean.col(3).setOnes();  // J[1,1]
  f.inducing.chol_cov = 1e-6 * MatrixXd::Identity(g * g, g * g);
  return f;
}

ModelConfig small_config() {
  ModelConfig c;
  c.eps = 1.0;
  c.inducing = 6;
  c.curve_segments = 5;
  c.mc_samples = 8;
  c.epochs = 4;
  c.block_length = 2;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("straight latent curves") {
  VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 0.0;
  const auto c = curve_points(a, b, 2);
  REQUIRE(c.points.rows() == 3);
  CHECK(c.points.row(1).transpose().isApprox(VectorXd((VectorXd(2) << 0.5, 0.0).finished())));
  CHECK(c.points.row(2).transpose() == b);
  const auto same = curve_points(b, b, 4);
  CHECK(same.tangent.norm() == 0.0);
  for (int k = 0; k <= 4; ++k) CHECK(same.points.row(k).transpose() == b);
  VectorXd p(2), r(2);
  p << -0.3, 2.0;
  r << 1.7, -1.0;
  const auto mids = curve_midpoints(p, r, 6);
  CHECK(mids.rows() == 6);
  CHECK((0.5 * (mids.row(2) + mids.row(3)).transpose() - 0.5 * (p + r)).norm() < 1e-15);
}

TEST_CASE("curve length samples") {
  const auto f = identity_field(2);
  VectorXd a(2), b(2);
  a << -0.8, 0.4;
  b << 0.9, -0.5;
  const auto noise = curve_noise({1, 2}, 0, 1, 10, 4, 5);
  for (double s : curve_length_samples(f, a, b, 10, noise))
    CHECK(testutil::rel_err(s, (b - a).norm()) < 0.01);
  for (double s : curve_length_samples(f, a, a, 10, noise)) CHECK(s == 0.0);

  // Smooth random field: halving the step barely moves the mean length.
  JacobianField g = identity_field(3);
  CounterRng rng(4, Stream::Sampling);
  for (Eigen::Index k = 0; k < g.inducing.mean.size(); ++k) g.inducing.mean.data()[k] += 0.5 * rng.normal();
  auto mean_len = [&](int segments) {
    const auto n = curve_noise({9, 1}, 2, 3, segments, 6, 200);
    const auto s = curve_length_samples(g, a, b, segments, n);
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  };
  CHECK(testutil::rel_err(mean_len(20), mean_len(10)) < 0.01);
}

TEST_CASE("per-pair Nakagami moments") {
  const std::vector<double> twos(10, 2.0);
  const auto p = pair_nakagami(twos);
  CHECK(p.omega == doctest::Approx(4.0));
  CHECK(p.m == kNakagamiMaxShape);

  const auto s = sample({2.0, 3.0}, 100000, 8);
  const auto est = pair_nakagami(s);
  CHECK(testutil::rel_err(est.m, 2.0) < 0.05);
  CHECK(testutil::rel_err(est.omega, 3.0) < 0.05);
  std::vector<double> scaled(s.begin(), s.begin() + 50);
  const auto base = pair_nakagami(scaled);
  for (double& v : scaled) v *= 2.5;
  const auto sc = pair_nakagami(scaled);
  CHECK(testutil::rel_err(sc.omega, 6.25 * base.omega) < 1e-12);
  CHECK(testutil::rel_err(sc.m, base.m) < 1e-12);
  CHECK_THROWS_AS(pair_nakagami(std::vector<double>{1.0, 2.0}), ValidationError);
}

TEST_CASE("latent KL") {
  LatentState z{MatrixXd::Zero(4, 2), MatrixXd::Zero(4, 2)};
  CHECK(kl_qz_pz(z) == 0.0);
  z.mu(2, 1) = 1.0;
  CHECK(kl_qz_pz(z) == doctest::Approx(0.5));
  CounterRng rng(2, Stream::Sampling);
  for (int k = 0; k < 10; ++k) {
    for (Eigen::Index i = 0; i < z.mu.size(); ++i) {
      z.mu.data()[i] = rng.normal();
      z.log_var.data()[i] = 2.0 * rng.normal();
    }
    CHECK(kl_qz_pz(z) >= 0.0);
  }
}

TEST_CASE("ELBO without pairs is minus the KL terms") {
  const auto pl = gen_plane(6, 1.0, 1.0, 1);
  const auto e = euclidean_distances(pl.data);
  ModelConfig c = small_config();
  c.inducing = 3;
  LatentState z{MatrixXd::Zero(6, 2), MatrixXd::Zero(6, 2)};
  JacobianField f = initial_field(pl.ground_truth, 1.0, c);
  const PairBatch none;
  f.inducing.mean.setZero();
  const MatrixXd kuu = kernel_matrix(f.inducing.locations, f.inducing.locations, f.kernel);
  f.inducing.chol_cov = Eigen::LLT<MatrixXd>(kuu).matrixL();
  CHECK(std::abs(elbo(e, z, f, c, {1, 0}, none).value) < 1e-6);

  z.mu(0, 0) = 0.7;
  f.inducing.mean(1, 2) = 0.4;
  const auto t = elbo(e, z, f, c, {1, 0}, none);
  CHECK(t.value == doctest::Approx(-(kl_qu_pu(f.inducing, f.kernel) + kl_qz_pz(z))));
  CHECK(t.expected_loglik == 0.0);
}

TEST_CASE("ELBO gradients match finite differences") {
  for (std::uint64_t seed : {1u, 2u}) {
    const auto r = testutil::elbo_fd_check(seed);
    for (const auto& [name, rel] : r.rel) {
      INFO(name);
      CHECK(rel < 1e-3);
    }
  }
}

TEST_CASE("ELBO is invariant to pair order and thread count") {
  const auto pl = gen_plane(12, 2.0, 2.0, 5);
  const auto e = euclidean_distances(pl.data);
  ModelConfig c = small_config();
  c.eps = 0.9;
  LatentState z{pl.ground_truth, MatrixXd::Constant(12, 2, -4.0)};
  const auto f = initial_field(z.mu, 1.0, c);
  auto pairs = all_pairs(e, c.eps);
  ElboGradient g1, g2, g3;
  const auto a = elbo(e, z, f, c, {2, 7}, pairs, &g1);
  std::reverse(pairs.neighbors.begin(), pairs.neighbors.end());
  std::reverse(pairs.censored.begin(), pairs.censored.end());
  for (auto& p : pairs.censored) std::swap(p.first, p.second);
  const auto b = elbo(e, z, f, c, {2, 7}, pairs, &g2);
  c.threads = 3;
  const auto d = elbo(e, z, f, c, {2, 7}, pairs, &g3);
  CHECK(a.value == b.value);
  CHECK(a.value == d.value);
  CHECK(g1.d_mu == g2.d_mu);
  CHECK(g1.d_mu == g3.d_mu);
  CHECK(g1.field.d_mean == g3.field.d_mean);
}

TEST_CASE("pair subsampling") {
  const auto pl = gen_plane(30, 2.0, 2.0, 6);
  const auto e = euclidean_distances(pl.data);
  const auto full = all_pairs(e, 0.6);
  const auto sub = subsample_pairs(e, 0.6, 20, {4, 1});
  CHECK(sub.neighbors.size() == std::min<std::size_t>(20, full.neighbors.size()));
  CHECK(sub.censored.size() == 20);
  CHECK(sub.censored_weight ==
        doctest::Approx(static_cast<double>(full.censored.size()) / 20.0));
  const auto again = subsample_pairs(e, 0.6, 20, {4, 1});
  CHECK(again.censored == sub.censored);
  CHECK(subsample_pairs(e, 0.6, 20, {4, 2}).censored != sub.censored);
  for (const auto& [i, j] : sub.censored) CHECK(e(i, j) >= 0.6);
}

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_THROWS_AS(c.validate(), ValidationError);  // eps unset
  c.eps = 1.0;
  CHECK_NOTHROW(c.validate());
  c.mc_samples = 2;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("short fits") {
  const auto pl = gen_plane(16, 2.0, 2.0, 7);
  const auto e = euclidean_distances(pl.data);
  ModelConfig c = small_config();
  c.eps = 0.9;
  c.epochs = 1;
  const auto one = fit(e, c);
  REQUIRE(one.elbo_trace.size() == 1);
  CHECK(std::isfinite(one.elbo_trace[0]));
  CHECK(one.latent.mu.rows() == 16);
  CHECK(one.pairs.size() == 16 * 15 / 2);

  c.epochs = 4;
  const auto a = report_to_json(fit(e, c));
  c.threads = 2;
  const auto b = report_to_json(fit(e, c));
  CHECK(a == b);

  CHECK_THROWS_AS(fit(e, c, MatrixXd::Zero(3, 2)), ValidationError);
}
