#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner.

#include "isogplvm/geometry.hpp"
#include "isogplvm/gp.hpp"
#include "isogplvm/graph.hpp"
#include "isogplvm/rng.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace testutil {

using isogplvm::MatrixXd;
using isogplvm::VectorXd;

// Dense GP regression written out with explicit inverses.
inline std::pair<VectorXd, MatrixXd> dense_posterior(const MatrixXd& test, const MatrixXd& train,
                                                     const VectorXd& y,
                                                     const isogplvm::KernelParams& kp, double sd) {
  auto k = [&](const VectorXd& a, const VectorXd& b) {
    double r = 0.0;
    for (int d = 0; d < a.size(); ++d) r += std::pow((a(d) - b(d)) / kp.lengthscale(d), 2);
    return kp.variance() * std::exp(-0.5 * r);
  };
  const auto n = train.rows(), t = test.rows();
  MatrixXd kxx(n, n), ktx(t, n), ktt(t, t);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kxx(i, j) = k(train.row(i), train.row(j));
  for (int i = 0; i < t; ++i) {
    for (int j = 0; j < n; ++j) ktx(i, j) = k(test.row(i), train.row(j));
    for (int j = 0; j < t; ++j) ktt(i, j) = k(test.row(i), test.row(j));
  }
  const MatrixXd inv = (kxx + sd * sd * MatrixXd::Identity(n, n)).fullPivLu().inverse();
  return {ktx * inv * y, ktt - ktx * inv * ktx.transpose()};
}

// Weights are multiples of 1/64 so every path sum is exact in double
// precision and both shortest-path algorithms must agree bit for bit.
inline isogplvm::DissimilarityMatrix dyadic_random(int n, isogplvm::CounterRng& rng) {
  MatrixXd m = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m(i, j) = m(j, i) = static_cast<double>(1 + rng.below(640)) / 64.0;
  return isogplvm::DissimilarityMatrix(m);
}

inline MatrixXd floyd_warshall(const isogplvm::NeighborGraph& g) {
  const int n = g.size();
  const double inf = std::numeric_limits<double>::infinity();
  MatrixXd d = MatrixXd::Constant(n, n, inf);
  for (int i = 0; i < n; ++i) d(i, i) = 0.0;
  for (const auto& e : g.edges()) d(e.i, e.j) = d(e.j, e.i) = std::min(d(e.i, e.j), e.weight);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (d(i, k) + d(k, j) < d(i, j)) d(i, j) = d(i, k) + d(k, j);
  return d;
}

// Deterministic field whose length element blows up near the origin:
// J(z) = (1 + a exp(-|z|^2 / (2 r^2))) I.
class BumpJacobian final : public isogplvm::JacobianDistribution {
public:
  int latent_dim() const override { return 2; }
  int ambient_dim() const override { return 2; }
  isogplvm::SparseGp::PointMoments moments(const VectorXd& z, bool with_derivatives) const override {
    const double g = amp * std::exp(-0.5 * z.squaredNorm() / (r * r));
    isogplvm::SparseGp::PointMoments pm;
    pm.mean = (1.0 + g) * MatrixXd::Identity(2, 2);
    pm.variance = 0.0;
    if (with_derivatives) {
      pm.d_variance = VectorXd::Zero(2);
      for (int d = 0; d < 2; ++d) pm.d_mean.push_back(-g * z(d) / (r * r) * MatrixXd::Identity(2, 2));
    }
    return pm;
  }
  double amp = 8.0;
  double r = 0.5;
};

}  // namespace testutil
