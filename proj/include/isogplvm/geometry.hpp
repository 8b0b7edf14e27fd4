#pragma once

#include "isogplvm/gp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace isogplvm {

// Distribution of J(z) at a single point: independent entries with the given
// mean and one shared variance. This is all the geometry code needs from a
// field, so fitted GP fields and hand-built fields plug in alike.
class JacobianDistribution {
public:
  virtual ~JacobianDistribution() = default;
  virtual int latent_dim() const = 0;
  virtual int ambient_dim() const = 0;
  virtual SparseGp::PointMoments moments(const VectorXd& z, bool with_derivatives) const = 0;
};

class GpJacobian final : public JacobianDistribution {
public:
  explicit GpJacobian(const JacobianField& field) : gp_(field) {}
  int latent_dim() const override { return gp_.field().latent_dim; }
  int ambient_dim() const override { return gp_.field().ambient_dim; }
  SparseGp::PointMoments moments(const VectorXd& z, bool with_derivatives) const override {
    return gp_.point_moments(z, with_derivatives);
  }

private:
  SparseGp gp_;
};

// Deterministic J(z) = value everywhere.
class ConstantJacobian final : public JacobianDistribution {
public:
  explicit ConstantJacobian(MatrixXd value) : value_(std::move(value)) {}
  int latent_dim() const override { return static_cast<int>(value_.cols()); }
  int ambient_dim() const override { return static_cast<int>(value_.rows()); }
  SparseGp::PointMoments moments(const VectorXd& z, bool with_derivatives) const override;

private:
  MatrixXd value_;
};

// E[J^T J] = E[J]^T E[J] + D' var I.
MatrixXd expected_metric(const JacobianDistribution& j, const VectorXd& z);
MatrixXd expected_metric(const JacobianField& field, const VectorXd& z);

struct MetricGrid {
  VectorXd lower;
  VectorXd upper;
  std::vector<int> resolution;  // per axis
  VectorXd values;              // last axis varies fastest
  int n_mc = 0;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return values.size(); }
  VectorXd node(Eigen::Index flat) const;
  std::string to_csv() const;
  std::string header_json() const;
};

// Mean of sqrt(det(J^T J)) over n_mc draws of J at each node.
MetricGrid magnification_grid(const JacobianDistribution& j, const VectorXd& lower,
                              const VectorXd& upper, const std::vector<int>& resolution, int n_mc,
                              std::uint64_t seed, int threads = 1);

struct Geodesic {
  MatrixXd points;  // (K + 1) x q
  double expected_length = 0.0;
  double energy = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct GeodesicOptions {
  int segments = 20;      // K
  int max_iter = 2000;
  double tol = 1e-10;     // relative energy decrease over 10 iterations
};

// Discrete energy K sum_k seg_k^T G(mid_k) seg_k with fixed endpoints.
double curve_energy(const JacobianDistribution& j, const MatrixXd& points,
                    MatrixXd* gradient = nullptr);
// sum_k sqrt(seg_k^T G(mid_k) seg_k).
double curve_expected_length(const JacobianDistribution& j, const MatrixXd& points);

// Gradient descent with backtracking on the energy, started on the chord.
// The chord is returned if the optimized curve ends up longer.
Geodesic geodesic(const JacobianDistribution& j, const VectorXd& a, const VectorXd& b,
                  const GeodesicOptions& opt = {});

std::string geodesic_csv(const std::vector<Geodesic>& paths);

struct PlotInput {
  MatrixXd embedding;            // N x 2
  std::vector<int> labels;       // optional, colors points
  const MetricGrid* grid = nullptr;
  std::vector<Geodesic> geodesics;
  std::string title;
};
std::string render_svg(const PlotInput& in);

}  // namespace isogplvm
