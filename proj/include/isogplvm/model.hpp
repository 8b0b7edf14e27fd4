#pragma once

#include "isogplvm/dissimilarity.hpp"
#include "isogplvm/gp.hpp"
#include "isogplvm/nakagami.hpp"
#include "isogplvm/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace isogplvm {

// q(z) = prod_i N(mu_i, diag(exp(log_var_i))).
struct LatentState {
  MatrixXd mu;       // N x q
  MatrixXd log_var;  // N x q

  Eigen::Index size() const { return mu.rows(); }
  int dim() const { return static_cast<int>(mu.cols()); }
  void validate() const;
};

struct ModelConfig {
  int latent_dim = 2;            // q
  double eps = 0.0;              // censoring threshold, required
  int curve_segments = 10;       // T
  int mc_samples = 10;           // S_mc
  int inducing = 100;            // M
  int ambient_dim = 3;           // D'
  double learning_rate = 3e-3;
  int epochs = 1000;
  int block_length = 25;         // epochs per alternation block
  std::uint64_t seed = 0;
  int pair_batch = 0;            // per-branch subsample size, 0 = all pairs
  double init_variance = 1e-2;   // initial q(z) variance
  double init_lengthscale = 1.0;
  double init_cov_scale = 1e-2;  // initial S = init_cov_scale * K_uu
  double jitter = 1e-8;          // relative to the kernel variance
  int threads = 1;               // execution only; never changes results

  void validate() const;
};

// Straight latent segment c(t) = z_i (1 - t) + z_j t on the grid t_k = k / T.
struct Curve {
  MatrixXd points;  // (T + 1) x q
  VectorXd tangent; // z_j - z_i
};
Curve curve_points(const VectorXd& z_i, const VectorXd& z_j, int segments);
// Segment midpoints t = (k + 1/2) / T, T x q.
MatrixXd curve_midpoints(const VectorXd& z_i, const VectorXd& z_j, int segments);

// Identifies one set of reparameterization draws. `tag` is the epoch during
// training; evaluations that must share random numbers reuse a tag.
struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t tag = 0;
};
inline constexpr std::uint64_t kTraceTag = ~std::uint64_t{0};
inline constexpr std::uint64_t kSnapshotTag = ~std::uint64_t{0} - 1;

// S_mc standard-normal T x P draws for pair (i, j).
std::vector<MatrixXd> curve_noise(const NoiseKey& key, int i, int j, int segments, int channels,
                                  int samples);
// Standard-normal draw for latent point i.
VectorXd latent_noise(const NoiseKey& key, int i, int dim);

// Midpoint-rule curve lengths (1/T) sum_k ||J(c(t_k)) (z_j - z_i)|| for each
// joint field draw. Returns exact zeros when z_i == z_j.
std::vector<double> curve_length_samples(const JacobianField& field, const VectorXd& z_i,
                                         const VectorXd& z_j, int segments,
                                         const std::vector<MatrixXd>& noise);

// Omega = mean(s^2), m = Omega^2 / Var(s^2) with the unbiased variance,
// m clamped to [1/2, 1e4]. Needs at least 3 samples.
NakagamiParams pair_nakagami(std::span<const double> samples);

double kl_qz_pz(const LatentState& state);

using IndexPair = std::pair<int, int>;

// Pairs split by branch; weights rescale subsampled branch sums to the full
// branch size.
struct PairBatch {
  std::vector<IndexPair> neighbors;
  std::vector<IndexPair> censored;
  double neighbor_weight = 1.0;
  double censored_weight = 1.0;

  std::size_t size() const { return neighbors.size() + censored.size(); }
};

// Every pair i < j. Pairs with e_ij = 0 are left out: a zero observed length
// has no Nakagami density.
PairBatch all_pairs(const DissimilarityMatrix& e, double eps);
// At most `per_branch` pairs drawn uniformly without replacement per branch.
PairBatch subsample_pairs(const DissimilarityMatrix& e, double eps, int per_branch,
                          const NoiseKey& key);

struct ElboTerms {
  double value = 0.0;
  double expected_loglik = 0.0;
  double kl_u = 0.0;
  double kl_z = 0.0;
};

struct ElboGradient {
  MatrixXd d_mu;
  MatrixXd d_log_var;
  FieldGradient field;
};

// Monte-Carlo ELBO: one reparameterized draw of z, S_mc field draws per
// pair, censored Nakagami log-likelihood, minus both KL terms. Deterministic
// given `key`; independent of pair order and of config.threads.
ElboTerms elbo(const DissimilarityMatrix& e, const LatentState& latent, const JacobianField& field,
               const ModelConfig& config, const NoiseKey& key, const PairBatch& pairs,
               ElboGradient* grad = nullptr);

struct PairSnapshot {
  int i = 0;
  int j = 0;
  double observed = 0.0;
  bool neighbor = false;
  NakagamiParams params;
  double mean_length = 0.0;
  double survival = 0.0;  // P(s >= eps)
};

// Per-pair Nakagami fits at fixed latent positions (no q(z) sampling).
std::vector<PairSnapshot> pair_statistics(const DissimilarityMatrix& e, const MatrixXd& z,
                                          const JacobianField& field, const ModelConfig& config,
                                          const NoiseKey& key, std::span<const IndexPair> pairs);

struct FitReport {
  ModelConfig config;
  std::vector<double> elbo_trace;
  LatentState latent;
  JacobianField field;
  std::vector<PairSnapshot> pairs;
};

// Thrown when the ELBO or its gradient becomes non-finite; carries the state
// at the failing epoch.
class FitAborted : public std::runtime_error {
public:
  FitAborted(const std::string& what, int epoch, LatentState latent, JacobianField field)
      : std::runtime_error(what), epoch(epoch), latent(std::move(latent)), field(std::move(field)) {}
  int epoch;
  LatentState latent;
  JacobianField field;
};

// Initial field for latent means z (N x q): k-means++ inducing locations,
// mean Jacobian scale * [I; 0], S = init_cov_scale * K_uu.
JacobianField initial_field(const MatrixXd& z, double scale, const ModelConfig& config);
// Median of e_ij / ||z_i - z_j|| over neighbor pairs (all pairs if none).
double initial_scale(const DissimilarityMatrix& e, const MatrixXd& z, double eps);
// Centers and rescales so that mean_i ||z_i||^2 = 1.
MatrixXd unit_rms(const MatrixXd& z);

using EpochCallback = std::function<void(int epoch, double elbo)>;

// IsoMap-initialized (unless `init` is given) alternating Adam ascent on the
// ELBO: block_length epochs on q(z), then block_length on q(u) and the kernel.
FitReport fit(const DissimilarityMatrix& e, const ModelConfig& config,
              const std::optional<MatrixXd>& init = std::nullopt,
              const EpochCallback& on_epoch = nullptr);

}  // namespace isogplvm
