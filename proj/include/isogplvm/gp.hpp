#pragma once

#include "isogplvm/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace isogplvm {

// ARD squared-exponential kernel
//   k(a, b) = sigma^2 exp(-1/2 sum_d (a_d - b_d)^2 / l_d^2).
// The jitter is relative: jitter() returns exp(log_jitter) * sigma^2, so the
// diagonal shift scales with the kernel.
struct KernelParams {
  VectorXd log_lengthscales;
  double log_variance = 0.0;
  double log_jitter = std::log(1e-8);

  double variance() const { return std::exp(log_variance); }
  double lengthscale(Eigen::Index d) const { return std::exp(log_lengthscales(d)); }
  double jitter() const { return std::exp(log_jitter) * variance(); }
  double max_jitter() const { return 1e-4 * variance(); }
  Eigen::Index dim() const { return log_lengthscales.size(); }
  void validate() const;
};

struct KernelGradient {
  VectorXd d_log_lengthscales;
  double d_log_variance = 0.0;

  static KernelGradient zeros(Eigen::Index q) { return {VectorXd::Zero(q), 0.0}; }
  KernelGradient& operator+=(const KernelGradient& o);
};

MatrixXd kernel_matrix(const MatrixXd& a, const MatrixXd& b, const KernelParams& kp);

// Accumulates the gradient of sum(g .* K(a, b)) with respect to a, b and the
// kernel hyperparameters. `k` must be kernel_matrix(a, b, kp). Any output
// pointer may be null.
void kernel_backward(const MatrixXd& a, const MatrixXd& b, const KernelParams& kp,
                     const MatrixXd& k, const MatrixXd& g, MatrixXd* d_a, MatrixXd* d_b,
                     KernelGradient* d_kernel);

struct GaussianMoments {
  VectorXd mean;
  MatrixXd cov;
};

// Zero-mean GP regression posterior at `test` given noisy targets y.
GaussianMoments exact_posterior(const MatrixXd& test, const MatrixXd& train, const VectorXd& y,
                                const KernelParams& kp, double noise_sd);

// q(u) = N(mean[:, p], S) for each output channel p, S = chol_cov chol_cov^T
// shared across channels.
struct InducingState {
  MatrixXd locations;  // M x q
  MatrixXd mean;       // M x P
  MatrixXd chol_cov;   // M x M lower triangular, positive diagonal

  Eigen::Index size() const { return locations.rows(); }
  void validate() const;
};

// Random Jacobian field J: R^q -> R^{D' x q}. Channel p = r * q + c holds the
// entry J[r, c]; channels are independent given u and share one kernel.
struct JacobianField {
  KernelParams kernel;
  InducingState inducing;
  int ambient_dim = 3;
  int latent_dim = 2;

  int channels() const { return ambient_dim * latent_dim; }
  void validate() const;
};

// Predictive moments at T points: per-channel means (T x P) and the shared
// T x T covariance.
struct PredictiveMoments {
  MatrixXd mean;
  MatrixXd cov;
};

// Reverse-mode accumulators for one evaluation pass. Per-pair contributions
// are summed into these and converted once by SparseGp::finalize.
struct FieldAdjoint {
  MatrixXd d_kuu;          // M x M, w.r.t. K_uu including jitter
  MatrixXd d_s;            // M x M, w.r.t. S
  MatrixXd d_mean;         // M x P
  MatrixXd d_locations;    // M x q, from cross-covariance terms
  MatrixXd d_chol_direct;  // M x M, terms that depend on L_S directly
  MatrixXd d_beta;         // M x P, w.r.t. L_uu^{-1} mu
  MatrixXd d_r;            // M x M, w.r.t. L_uu^{-1} L_S
  MatrixXd d_luu;          // M x M, w.r.t. L_uu through per-point solves
  KernelGradient d_kernel;

  static FieldAdjoint zeros(const JacobianField& f);
  FieldAdjoint& operator+=(const FieldAdjoint& o);
};

struct FieldGradient {
  MatrixXd d_locations;
  MatrixXd d_mean;
  MatrixXd d_chol_cov;  // lower triangular
  KernelGradient d_kernel;
};

// Sparse variational GP with the K_uu factorization cached for one parameter
// state.
class SparseGp {
public:
  explicit SparseGp(const JacobianField& field);

  const JacobianField& field() const { return field_; }
  double kuu_jitter() const { return kuu_jitter_; }

  // With K_uu = L L^T, A = L^{-1} K_ut, beta = L^{-1} mu and R = L^{-1} L_S:
  // mean = A^T beta, cov = K_tt - A^T A + (R^T A)^T (R^T A).
  struct Workspace {
    MatrixXd ktu;  // T x M
    MatrixXd ktt;  // T x T
    MatrixXd a;    // M x T
    MatrixXd b;    // R^T A, M x T
  };

  PredictiveMoments moments(const MatrixXd& points, Workspace* ws = nullptr) const;

  // Given dL/dmean and dL/dcov at `points`, accumulates field adjoints and
  // (if non-null) adds dL/dpoints.
  void backward(const MatrixXd& points, const Workspace& ws, const MatrixXd& d_mean,
                const MatrixXd& d_cov, FieldAdjoint& adj, MatrixXd* d_points) const;

  // KL(q(u) || p(u)) summed over channels; adds scale * dKL into adj.
  double kl(FieldAdjoint* adj = nullptr, double scale = 1.0) const;

  FieldGradient finalize(const FieldAdjoint& adj) const;

  // Per-entry predictive mean (D' x q) and shared variance at one point, plus
  // their derivatives with respect to the point.
  struct PointMoments {
    MatrixXd mean;                  // D' x q
    double variance = 0.0;
    std::vector<MatrixXd> d_mean;   // q entries, each D' x q
    VectorXd d_variance;            // q
  };
  PointMoments point_moments(const VectorXd& z, bool with_derivatives) const;

private:
  JacobianField field_;
  MatrixXd kuu_;   // without jitter
  MatrixXd luu_;
  double kuu_jitter_ = 0.0;
  MatrixXd s_;
  MatrixXd alpha_;  // K_uu^{-1} mu, M x P
  MatrixXd beta_;   // L_uu^{-1} mu, M x P
  MatrixXd r_;      // L_uu^{-1} L_S, lower triangular
};

PredictiveMoments sparse_predictive_moments(const JacobianField& field, const MatrixXd& points);

// samples[s] = mean + L_cov * noise[s], with L_cov the Cholesky factor of
// cov + jitter I. Each noise matrix is T x P standard normal.
std::vector<MatrixXd> sample_field_along_curve(const JacobianField& field, const MatrixXd& points,
                                               const std::vector<MatrixXd>& noise);

double kl_qu_pu(const InducingState& inducing, const KernelParams& kp);

}  // namespace isogplvm
