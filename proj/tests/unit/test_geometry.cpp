#include <doctest.h>

#include "isogplvm/errors.hpp"
#include "isogplvm/geometry.hpp"
#include "isogplvm/rng.hpp"
#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace isogplvm;
using testutil::BumpJacobian;

TEST_CASE("expected metric") {
  JacobianField f;
  f.latent_dim = 2;
  f.ambient_dim = 3;
  f.kernel.log_lengthscales = VectorXd::Zero(2);
  f.kernel.log_variance = std::log(0.7);
  f.inducing.locations = MatrixXd::Constant(1, 2, 1e3);
  f.inducing.mean = MatrixXd::Zero(1, 6);
  f.inducing.chol_cov = MatrixXd::Identity(1, 1);
  VectorXd z = VectorXd::Zero(2);
  CHECK((expected_metric(f, z) - 3 * 0.7 * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  const ConstantJacobian id(MatrixXd::Identity(2, 2));
  CHECK(expected_metric(id, z) == MatrixXd::Identity(2, 2));

  CounterRng rng(1, Stream::Sampling);
  f.inducing.locations = MatrixXd(4, 2);
  f.inducing.mean = MatrixXd(4, 6);
  for (Eigen::Index k = 0; k < 8; ++k) f.inducing.locations.data()[k] = rng.normal();
  for (Eigen::Index k = 0; k < 24; ++k) f.inducing.mean.data()[k] = rng.normal();
  f.inducing.chol_cov = 0.3 * MatrixXd::Identity(4, 4);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    VectorXd p(2);
    p << 2 * rng.normal(), 2 * rng.normal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(expected_metric(f, p));
    worst = std::min(worst, es.eigenvalues().minCoeff());
  }
  CHECK(worst >= -1e-9);
}

TEST_CASE("magnification factor") {
  VectorXd lo(2), hi(2);
  lo << -1.0, -2.0;
  hi << 1.0, 2.0;
  const auto ones = magnification_grid(ConstantJacobian(MatrixXd::Identity(2, 2)), lo, hi, {5, 4}, 3, 1);
  CHECK(ones.size() == 20);
  CHECK((ones.values.array() - 1.0).abs().maxCoeff() < 1e-12);
  MatrixXd d = MatrixXd::Zero(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 3.0;
  const auto six = magnification_grid(ConstantJacobian(d), lo, hi, {3, 3}, 4, 1, 2);
  CHECK((six.values.array() - 6.0).abs().maxCoeff() < 1e-9);
  CHECK(six.node(0) == lo);
  CHECK(six.node(8) == hi);
  // Last axis fastest.
  CHECK(six.node(1)(0) == lo(0));
  CHECK(six.node(1)(1) == 0.0);
  const auto csv = six.to_csv();
  CHECK(csv.rfind("z0,z1,value\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}

TEST_CASE("magnification factor vs Monte Carlo oracle") {
  // Random GP field: compare one node against a large independent sample.
  JacobianField f;
  f.latent_dim = 2;
  f.ambient_dim = 2;
  f.kernel.log_lengthscales = VectorXd::Zero(2);
  f.kernel.log_variance = std::log(0.5);
  CounterRng rng(2, Stream::Sampling);
  f.inducing.locations = MatrixXd(3, 2);
  f.inducing.mean = MatrixXd(3, 4);
  for (Eigen::Index k = 0; k < 6; ++k) f.inducing.locations.data()[k] = rng.normal();
  for (Eigen::Index k = 0; k < 12; ++k) f.inducing.mean.data()[k] = rng.normal();
  f.inducing.chol_cov = 0.2 * MatrixXd::Identity(3, 3);
  const GpJacobian j(f);
  VectorXd p = VectorXd::Zero(2);
  const auto grid = magnification_grid(j, p, VectorXd::Ones(2), {2, 2}, 2000, 5);  // node 0 = p
  const auto pm = j.moments(p, false);
  const double sd = std::sqrt(pm.variance);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  CounterRng o(77, Stream::Sampling);
  for (int s = 0; s < n; ++s) {
    MatrixXd m = pm.mean;
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] += sd * o.normal();
    const double v = std::sqrt(std::max(0.0, (m.transpose() * m).determinant()));
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se_grid = std::sqrt((sq / n - mean * mean) / 2000.0);
  CHECK(std::abs(grid.values(0) - mean) < 4.0 * se_grid);
}

TEST_CASE("geodesics in flat space are straight") {
  MatrixXd g(2, 2);
  g << 1.5, 0.4, -0.2, 0.9;
  const ConstantJacobian flat(g);
  VectorXd a(2), b(2);
  a << -1.0, 0.5;
  b << 2.0, -0.7;
  const auto geo = geodesic(flat, a, b);
  const double want = std::sqrt((b - a).transpose() * (g.transpose() * g) * (b - a));
  CHECK(std::abs(geo.expected_length - want) < 1e-6);
  double off = 0.0;
  const VectorXd dir = (b - a).normalized();
  for (Eigen::Index k = 0; k < geo.points.rows(); ++k) {
    const VectorXd v = geo.points.row(k).transpose() - a;
    off = std::max(off, (v - v.dot(dir) * dir).norm());
  }
  CHECK(off < 1e-6);

  const auto same = geodesic(flat, a, a);
  CHECK(same.expected_length == 0.0);
  CHECK(same.points.rows() == 21);
}

TEST_CASE("geodesics avoid an expensive bump") {
  const BumpJacobian bump;
  VectorXd a(2), b(2);
  a << -1.5, 0.05;
  b << 1.5, -0.05;
  const auto geo = geodesic(bump, a, b, {30, 4000, 1e-12});
  MatrixXd chord(31, 2);
  for (int k = 0; k <= 30; ++k) chord.row(k) = (a + (b - a) * k / 30.0).transpose();
  const double straight = curve_expected_length(bump, chord);
  CHECK(geo.expected_length < straight);
  double dev = 0.0;
  const VectorXd dir = (b - a).normalized();
  for (Eigen::Index k = 0; k < geo.points.rows(); ++k) {
    const VectorXd v = geo.points.row(k).transpose() - a;
    dev = std::max(dev, (v - v.dot(dir) * dir).norm());
  }
  CHECK(dev > 0.0);
  CHECK((geo.points.row(0).transpose() - a).norm() == 0.0);
  CHECK((geo.points.bottomRows(1).transpose() - b).norm() == 0.0);
}

TEST_CASE("curve energy gradient") {
  const BumpJacobian bump;
  MatrixXd pts(6, 2);
  CounterRng rng(3, Stream::Sampling);
  for (int k = 0; k < 6; ++k) pts.row(k) << -1.0 + 0.4 * k + 0.1 * rng.normal(), 0.2 * rng.normal();
  MatrixXd grad;
  curve_energy(bump, pts, &grad);
  const double h = 1e-6;
  for (int k = 1; k < 5; ++k)
    for (int d = 0; d < 2; ++d) {
      MatrixXd up = pts, dn = pts;
      up(k, d) += h;
      dn(k, d) -= h;
      const double fd = (curve_energy(bump, up) - curve_energy(bump, dn)) / (2 * h);
      CHECK(std::abs(fd - grad(k, d)) < 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("geodesic CSV and SVG") {
  const ConstantJacobian id(MatrixXd::Identity(2, 2));
  VectorXd a = VectorXd::Zero(2), b = VectorXd::Ones(2);
  const auto csv = geodesic_csv({geodesic(id, a, b, {4})});
  CHECK(csv.rfind("path,index,z0,z1,expected_length\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  PlotInput in;
  in.embedding = MatrixXd::Random(5, 2);
  in.labels = {0, 1, 0, 1, 2};
  in.title = "a < b";
  const auto svg = render_svg(in);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("a &lt; b") != std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 5);
}
