#include "isogplvm/model.hpp"

#include "isogplvm/baselines.hpp"
#include "isogplvm/errors.hpp"
#include "isogplvm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace isogplvm {

void LatentState::validate() const {
  if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols())
    throw ValidationError("latent mu and log_var shapes differ");
  if (!mu.allFinite() || !log_var.allFinite()) throw ValidationError("latent state is not finite");
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& field, const std::string& rule) {
    if (!ok) throw ValidationError("config field '" + field + "' " + rule);
  };
  require(latent_dim >= 1, "latent_dim", "must be >= 1");
  require(std::isfinite(eps) && eps > 0.0, "eps", "must be > 0");
  require(curve_segments >= 2, "curve_segments", "must be >= 2");
  require(mc_samples >= 3, "mc_samples", "must be >= 3");
  require(inducing >= 1, "inducing", "must be >= 1");
  require(ambient_dim >= 1, "ambient_dim", "must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate > 0.0, "learning_rate", "must be > 0");
  require(epochs >= 0, "epochs", "must be >= 0");
  require(block_length >= 1, "block_length", "must be >= 1");
  require(pair_batch >= 0, "pair_batch", "must be >= 0");
  require(std::isfinite(init_variance) && init_variance > 0.0, "init_variance", "must be > 0");
  require(std::isfinite(init_lengthscale) && init_lengthscale > 0.0, "init_lengthscale",
          "must be > 0");
  require(std::isfinite(init_cov_scale) && init_cov_scale > 0.0, "init_cov_scale", "must be > 0");
  require(jitter >= 1e-10 && jitter <= 1e-4, "jitter", "must be in [1e-10, 1e-4]");
  require(threads >= 1, "threads", "must be >= 1");
}

Curve curve_points(const VectorXd& z_i, const VectorXd& z_j, int segments) {
  if (segments < 2) throw ValidationError("curve_points needs T >= 2");
  if (z_i.size() != z_j.size()) throw ValidationError("curve endpoints differ in dimension");
  Curve c;
  c.tangent = z_j - z_i;
  c.points.resize(segments + 1, z_i.size());
  for (int k = 0; k <= segments; ++k) {
    const double t = static_cast<double>(k) / segments;
    c.points.row(k) = ((1.0 - t) * z_i + t * z_j).transpose();
  }
  return c;
}

MatrixXd curve_midpoints(const VectorXd& z_i, const VectorXd& z_j, int segments) {
  if (segments < 1) throw ValidationError("curve_midpoints needs T >= 1");
  MatrixXd x(segments, z_i.size());
  for (int k = 0; k < segments; ++k) {
    const double t = (k + 0.5) / segments;
    x.row(k) = ((1.0 - t) * z_i + t * z_j).transpose();
  }
  return x;
}

std::vector<MatrixXd> curve_noise(const NoiseKey& key, int i, int j, int segments, int channels,
                                  int samples) {
  CounterRng rng(key.seed, Stream::FieldNoise,
                 {key.tag, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j)});
  std::vector<MatrixXd> out(static_cast<std::size_t>(samples), MatrixXd(segments, channels));
  for (auto& e : out)
    for (Eigen::Index c = 0; c < e.cols(); ++c)
      for (Eigen::Index r = 0; r < e.rows(); ++r) e(r, c) = rng.normal();
  return out;
}

VectorXd latent_noise(const NoiseKey& key, int i, int dim) {
  CounterRng rng(key.seed, Stream::LatentNoise, {key.tag, static_cast<std::uint64_t>(i)});
  VectorXd v(dim);
  for (int d = 0; d < dim; ++d) v(d) = rng.normal();
  return v;
}

namespace {

constexpr double kOmegaFloor = std::numeric_limits<double>::min();
constexpr std::size_t kPairBlock = 64;

struct MomentFit {
  NakagamiParams params;
  bool clamped = false;
  double variance = 0.0;
};

MomentFit fit_moments(std::span<const double> s) {
  const auto n = static_cast<double>(s.size());
  std::vector<double> y(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) y[k] = s[k] * s[k];
  const double omega = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : y) ss += (v - omega) * (v - omega);
  const double var = ss / (n - 1.0);
  MomentFit f;
  f.variance = var;
  f.params.omega = std::max(omega, kOmegaFloor);
  const double raw = var > 0.0 ? omega * omega / var : std::numeric_limits<double>::infinity();
  f.params.m = std::clamp(raw, kNakagamiMinShape, kNakagamiMaxShape);
  f.clamped = !(raw > kNakagamiMinShape && raw < kNakagamiMaxShape);
  return f;
}

struct PairResult {
  double value = 0.0;
  NakagamiParams params;
  double mean_length = 0.0;
};

// Forward (and optionally backward) pass for one pair. On backward, d_zi and
// d_zj receive dL/dz of weight * term.
PairResult eval_pair(const SparseGp& gp, const VectorXd& zi, const VectorXd& zj, double e_ij,
                     double eps, int segments, const std::vector<MatrixXd>& noise, double weight,
                     bool censor_only_stats, FieldAdjoint* adj, VectorXd* d_zi, VectorXd* d_zj) {
  const auto& field = gp.field();
  const int q = field.latent_dim;
  const int dp = field.ambient_dim;
  const auto n_s = noise.size();
  const VectorXd delta = zj - zi;
  PairResult res;

  std::vector<double> len(n_s, 0.0);
  std::vector<MatrixXd> draws;
  SparseGp::Workspace ws;
  MatrixXd x;
  CholeskyResult chol;
  if (delta.squaredNorm() > 0.0) {
    x = curve_midpoints(zi, zj, segments);
    const auto mom = gp.moments(x, &ws);
    chol = robust_cholesky(mom.cov, field.kernel.jitter(), field.kernel.max_jitter());
    draws.reserve(n_s);
    for (std::size_t s = 0; s < n_s; ++s) {
      draws.push_back(mom.mean + chol.lower.triangularView<Eigen::Lower>() * noise[s]);
      const MatrixXd& j = draws.back();
      double acc = 0.0;
      for (int k = 0; k < segments; ++k) {
        double sq = 0.0;
        for (int r = 0; r < dp; ++r) {
          double v = 0.0;
          for (int c = 0; c < q; ++c) v += j(k, r * q + c) * delta(c);
          sq += v * v;
        }
        acc += std::sqrt(sq);
      }
      len[s] = acc / segments;
    }
  }
  res.mean_length = std::accumulate(len.begin(), len.end(), 0.0) / static_cast<double>(n_s);
  const auto mf = fit_moments(len);
  res.params = mf.params;
  if (censor_only_stats) return res;

  const bool neighbor = e_ij < eps;
  const TermValue term = neighbor ? neighbor_term(e_ij, mf.params) : censored_term(eps, mf.params);
  res.value = weight * term.value;
  if (!adj || draws.empty()) return res;

  // d term / d y_s with y_s = len_s^2.
  const double n = static_cast<double>(n_s);
  const double omega = mf.params.omega;
  const double var = mf.variance;
  const double g_m = mf.clamped ? 0.0 : weight * term.d_m;
  const double g_omega = weight * term.d_omega;

  MatrixXd d_mean = MatrixXd::Zero(segments, field.channels());
  MatrixXd d_lc = MatrixXd::Zero(segments, segments);
  VectorXd d_delta = VectorXd::Zero(q);
  VectorXd v(dp);
  for (std::size_t s = 0; s < n_s; ++s) {
    const double y = len[s] * len[s];
    double dy = g_omega / n;
    if (g_m != 0.0)
      dy += g_m * (2.0 * omega / (n * var) - omega * omega / (var * var) * 2.0 * (y - omega) / (n - 1.0));
    const double g_len = 2.0 * len[s] * dy / segments;
    if (g_len == 0.0) continue;
    const MatrixXd& j = draws[s];
    MatrixXd gj = MatrixXd::Zero(segments, field.channels());
    for (int k = 0; k < segments; ++k) {
      for (int r = 0; r < dp; ++r) {
        double acc = 0.0;
        for (int c = 0; c < q; ++c) acc += j(k, r * q + c) * delta(c);
        v(r) = acc;
      }
      const double nk = v.norm();
      if (nk == 0.0) continue;
      for (int r = 0; r < dp; ++r) {
        const double u = g_len * v(r) / nk;
        for (int c = 0; c < q; ++c) {
          gj(k, r * q + c) = u * delta(c);
          d_delta(c) += u * j(k, r * q + c);
        }
      }
    }
    d_mean += gj;
    d_lc.noalias() += gj * noise[s].transpose();
  }
  const MatrixXd lower = chol.lower.triangularView<Eigen::Lower>();
  const MatrixXd d_cov = cholesky_backward(lower, d_lc);
  // The covariance jitter is proportional to the kernel variance.
  adj->d_kernel.d_log_variance += chol.jitter * d_cov.trace();
  MatrixXd d_x = MatrixXd::Zero(segments, q);
  gp.backward(x, ws, d_mean, d_cov, *adj, &d_x);
  for (int k = 0; k < segments; ++k) {
    const double t = (k + 0.5) / segments;
    *d_zi += (1.0 - t) * d_x.row(k).transpose();
    *d_zj += t * d_x.row(k).transpose();
  }
  *d_zi -= d_delta;
  *d_zj += d_delta;
  return res;
}

std::vector<std::pair<IndexPair, bool>> canonical_pairs(const PairBatch& pairs) {
  std::vector<std::pair<IndexPair, bool>> out;
  out.reserve(pairs.size());
  for (auto [i, j] : pairs.neighbors) out.push_back({{std::min(i, j), std::max(i, j)}, true});
  for (auto [i, j] : pairs.censored) out.push_back({{std::min(i, j), std::max(i, j)}, false});
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<double> curve_length_samples(const JacobianField& field, const VectorXd& z_i,
                                         const VectorXd& z_j, int segments,
                                         const std::vector<MatrixXd>& noise) {
  if (segments < 2) throw ValidationError("curve_length_samples needs T >= 2");
  if (z_i.size() != field.latent_dim || z_j.size() != field.latent_dim)
    throw ValidationError("curve endpoints must have latent_dim entries");
  for (const auto& e : noise)
    if (e.rows() != segments || e.cols() != field.channels())
      throw ValidationError("noise draws must be T x P");
  std::vector<double> out(noise.size(), 0.0);
  if ((z_j - z_i).squaredNorm() == 0.0 || noise.empty()) return out;
  const SparseGp gp(field);
  const MatrixXd x = curve_midpoints(z_i, z_j, segments);
  const VectorXd delta = z_j - z_i;
  const auto draws = sample_field_along_curve(field, x, noise);
  const int q = field.latent_dim;
  for (std::size_t s = 0; s < draws.size(); ++s) {
    double acc = 0.0;
    for (int k = 0; k < segments; ++k) {
      double sq = 0.0;
      for (int r = 0; r < field.ambient_dim; ++r) {
        double v = 0.0;
        for (int c = 0; c < q; ++c) v += draws[s](k, r * q + c) * delta(c);
        sq += v * v;
      }
      acc += std::sqrt(sq);
    }
    out[s] = acc / segments;
  }
  return out;
}

NakagamiParams pair_nakagami(std::span<const double> samples) {
  if (samples.size() < 3) throw ValidationError("pair_nakagami needs at least 3 samples");
  for (double s : samples)
    if (!std::isfinite(s) || s < 0.0) throw ValidationError("curve lengths must be finite and >= 0");
  auto f = fit_moments(samples);
  f.params.validate();
  return f.params;
}

double kl_qz_pz(const LatentState& state) {
  state.validate();
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(state.mu.size()));
  for (Eigen::Index j = 0; j < state.mu.cols(); ++j)
    for (Eigen::Index i = 0; i < state.mu.rows(); ++i) {
      const double lv = state.log_var(i, j);
      const double mu = state.mu(i, j);
      terms.push_back(0.5 * (std::exp(lv) + mu * mu - 1.0 - lv));
    }
  return pairwise_sum(terms);
}

PairBatch all_pairs(const DissimilarityMatrix& e, double eps) {
  PairBatch b;
  const int n = static_cast<int>(e.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = e(i, j);
      if (!(v > 0.0)) continue;
      (v < eps ? b.neighbors : b.censored).emplace_back(i, j);
    }
  return b;
}

PairBatch subsample_pairs(const DissimilarityMatrix& e, double eps, int per_branch,
                          const NoiseKey& key) {
  if (per_branch < 0) throw ValidationError("pair subsample size must be >= 0");
  PairBatch full = all_pairs(e, eps);
  if (per_branch == 0) return full;
  CounterRng rng(key.seed, Stream::PairSubsample, {key.tag});
  auto draw = [&](std::vector<IndexPair>& v, double& weight) {
    const auto total = v.size();
    const auto k = std::min<std::size_t>(total, static_cast<std::size_t>(per_branch));
    for (std::size_t a = 0; a < k; ++a) {
      const auto b = a + static_cast<std::size_t>(rng.below(total - a));
      std::swap(v[a], v[b]);
    }
    v.resize(k);
    std::sort(v.begin(), v.end());
    weight = k > 0 ? static_cast<double>(total) / static_cast<double>(k) : 1.0;
  };
  draw(full.neighbors, full.neighbor_weight);
  draw(full.censored, full.censored_weight);
  return full;
}

ElboTerms elbo(const DissimilarityMatrix& e, const LatentState& latent, const JacobianField& field,
               const ModelConfig& config, const NoiseKey& key, const PairBatch& pairs,
               ElboGradient* grad) {
  latent.validate();
  if (latent.size() != e.size()) throw ValidationError("latent state and distances differ in N");
  if (latent.dim() != field.latent_dim) throw ValidationError("latent_dim mismatch with field");
  const int n = static_cast<int>(latent.size());
  const int q = latent.dim();
  const SparseGp gp(field);

  // One reparameterized draw of every latent point.
  MatrixXd eps_z(n, q);
  for (int i = 0; i < n; ++i) eps_z.row(i) = latent_noise(key, i, q).transpose();
  const MatrixXd sd = (0.5 * latent.log_var.array()).exp().matrix();
  const MatrixXd z = latent.mu + sd.cwiseProduct(eps_z);

  const auto list = canonical_pairs(pairs);
  for (const auto& [pr, nb] : list)
    if (pr.first < 0 || pr.second >= n || pr.first == pr.second)
      throw ValidationError("pair index out of range");
  const std::size_t n_blocks = (list.size() + kPairBlock - 1) / kPairBlock;
  std::vector<double> values(list.size(), 0.0);
  std::vector<FieldAdjoint> block_adj(grad ? n_blocks : 0);
  std::vector<MatrixXd> block_dz(grad ? n_blocks : 0);

  parallel_blocks(n_blocks, config.threads, [&](std::size_t b) {
    FieldAdjoint* adj = nullptr;
    MatrixXd* dz = nullptr;
    if (grad) {
      block_adj[b] = FieldAdjoint::zeros(field);
      block_dz[b] = MatrixXd::Zero(n, q);
      adj = &block_adj[b];
      dz = &block_dz[b];
    }
    const std::size_t end = std::min(list.size(), (b + 1) * kPairBlock);
    VectorXd d_i(q), d_j(q);
    for (std::size_t p = b * kPairBlock; p < end; ++p) {
      const auto [i, j] = list[p].first;
      const double w = list[p].second ? pairs.neighbor_weight : pairs.censored_weight;
      const auto noise =
          curve_noise(key, i, j, config.curve_segments, field.channels(), config.mc_samples);
      d_i.setZero();
      d_j.setZero();
      const auto r = eval_pair(gp, z.row(i).transpose(), z.row(j).transpose(), e(i, j), config.eps,
                               config.curve_segments, noise, w, false, adj, &d_i, &d_j);
      values[p] = r.value;
      if (dz) {
        dz->row(i) += d_i.transpose();
        dz->row(j) += d_j.transpose();
      }
    }
  });

  ElboTerms out;
  out.expected_loglik = pairwise_sum(values);
  out.kl_z = kl_qz_pz(latent);
  if (!grad) {
    out.kl_u = gp.kl();
    out.value = out.expected_loglik - out.kl_u - out.kl_z;
    return out;
  }

  FieldAdjoint adj = FieldAdjoint::zeros(field);
  MatrixXd dz = MatrixXd::Zero(n, q);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    adj += block_adj[b];
    dz += block_dz[b];
  }
  out.kl_u = gp.kl(&adj, -1.0);
  out.value = out.expected_loglik - out.kl_u - out.kl_z;

  grad->field = gp.finalize(adj);
  const MatrixXd var = latent.log_var.array().exp().matrix();
  grad->d_mu = dz - latent.mu;
  grad->d_log_var = (dz.array() * eps_z.array() * 0.5 * sd.array()).matrix() -
                    0.5 * (var.array() - 1.0).matrix();
  return out;
}

std::vector<PairSnapshot> pair_statistics(const DissimilarityMatrix& e, const MatrixXd& z,
                                          const JacobianField& field, const ModelConfig& config,
                                          const NoiseKey& key, std::span<const IndexPair> pairs) {
  if (z.rows() != e.size() || z.cols() != field.latent_dim)
    throw ValidationError("pair_statistics: latent shape mismatch");
  const SparseGp gp(field);
  std::vector<PairSnapshot> out(pairs.size());
  const std::size_t n_blocks = (pairs.size() + kPairBlock - 1) / kPairBlock;
  parallel_blocks(n_blocks, config.threads, [&](std::size_t b) {
    const std::size_t end = std::min(pairs.size(), (b + 1) * kPairBlock);
    for (std::size_t p = b * kPairBlock; p < end; ++p) {
      const int i = std::min(pairs[p].first, pairs[p].second);
      const int j = std::max(pairs[p].first, pairs[p].second);
      const auto noise =
          curve_noise(key, i, j, config.curve_segments, field.channels(), config.mc_samples);
      const auto r = eval_pair(gp, z.row(i).transpose(), z.row(j).transpose(), e(i, j), config.eps,
                               config.curve_segments, noise, 1.0, true, nullptr, nullptr, nullptr);
      auto& snap = out[p];
      snap.i = i;
      snap.j = j;
      snap.observed = e(i, j);
      snap.neighbor = e(i, j) < config.eps;
      snap.params = r.params;
      snap.mean_length = r.mean_length;
      snap.survival = std::exp(log_survival(config.eps, r.params));
    }
  });
  return out;
}

MatrixXd unit_rms(const MatrixXd& z) {
  MatrixXd c = z.rowwise() - z.colwise().mean();
  const double rms = std::sqrt(c.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(1, c.rows())));
  if (rms > 0.0) c /= rms;
  return c;
}

double initial_scale(const DissimilarityMatrix& e, const MatrixXd& z, double eps) {
  std::vector<double> ratios, fallback;
  const auto n = e.size();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dz = (z.row(i) - z.row(j)).norm();
      if (!(dz > 0.0) || !(e(i, j) > 0.0)) continue;
      (e(i, j) < eps ? ratios : fallback).push_back(e(i, j) / dz);
    }
  if (ratios.empty()) ratios = std::move(fallback);
  if (ratios.empty()) return 1.0;
  const auto mid = ratios.begin() + static_cast<std::ptrdiff_t>(ratios.size() / 2);
  std::nth_element(ratios.begin(), mid, ratios.end());
  return *mid;
}

JacobianField initial_field(const MatrixXd& z, double scale, const ModelConfig& config) {
  const int q = config.latent_dim;
  const int dp = config.ambient_dim;
  const auto n = z.rows();
  const auto m = std::min<Eigen::Index>(config.inducing, n);
  if (n < 1 || z.cols() != q) throw ValidationError("initial_field: latent shape mismatch");

  // k-means++ seeding on the latent means.
  CounterRng rng(config.seed, Stream::Init, {1});
  std::vector<Eigen::Index> chosen;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  VectorXd d2 = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  auto take = [&](Eigen::Index c) {
    chosen.push_back(c);
    used[static_cast<std::size_t>(c)] = 1;
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (z.row(i) - z.row(c)).squaredNorm());
  };
  take(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  while (static_cast<Eigen::Index>(chosen.size()) < m) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[static_cast<std::size_t>(i)]) total += d2(i);
    Eigen::Index pick = -1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (used[static_cast<std::size_t>(i)]) continue;
        pick = i;
        u -= d2(i);
        if (u <= 0.0) break;
      }
    } else {
      // Remaining points coincide with chosen ones; take the next unused.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i)
        if (!used[static_cast<std::size_t>(i)]) pick = i;
    }
    take(pick);
  }

  JacobianField f;
  f.ambient_dim = dp;
  f.latent_dim = q;
  f.kernel.log_lengthscales = VectorXd::Constant(q, std::log(config.init_lengthscale));
  f.kernel.log_variance = 2.0 * std::log(scale);
  f.kernel.log_jitter = std::log(config.jitter);
  f.inducing.locations.resize(m, q);
  for (Eigen::Index a = 0; a < m; ++a) f.inducing.locations.row(a) = z.row(chosen[static_cast<std::size_t>(a)]);
  f.inducing.mean = MatrixXd::Zero(m, f.channels());
  for (int r = 0; r < std::min(dp, q); ++r) f.inducing.mean.col(r * q + r).setConstant(scale);
  const MatrixXd kuu = kernel_matrix(f.inducing.locations, f.inducing.locations, f.kernel);
  const auto chol = robust_cholesky(kuu, f.kernel.jitter(), f.kernel.max_jitter());
  f.inducing.chol_cov = std::sqrt(config.init_cov_scale) * chol.lower;
  return f;
}

namespace {

struct AdamSlot {
  MatrixXd m;
  MatrixXd v;
  int t = 0;
};

// One Adam ascent step on x given gradient g.
void adam_ascent(MatrixXd& x, const MatrixXd& g, AdamSlot& slot, double lr) {
  constexpr double b1 = 0.9, b2 = 0.999, tiny = 1e-8;
  if (slot.m.size() == 0) {
    slot.m = MatrixXd::Zero(g.rows(), g.cols());
    slot.v = MatrixXd::Zero(g.rows(), g.cols());
  }
  ++slot.t;
  slot.m = b1 * slot.m + (1.0 - b1) * g;
  slot.v = b2 * slot.v + (1.0 - b2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(b1, slot.t);
  const double c2 = 1.0 - std::pow(b2, slot.t);
  x.array() += lr * (slot.m.array() / c1) / ((slot.v.array() / c2).sqrt() + tiny);
}

MatrixXd as_matrix(const VectorXd& v) { return v; }

bool finite_gradient(const ElboGradient& g) {
  return g.d_mu.allFinite() && g.d_log_var.allFinite() && g.field.d_locations.allFinite() &&
         g.field.d_mean.allFinite() && g.field.d_chol_cov.allFinite() &&
         g.field.d_kernel.d_log_lengthscales.allFinite() &&
         std::isfinite(g.field.d_kernel.d_log_variance);
}

}  // namespace

FitReport fit(const DissimilarityMatrix& e, const ModelConfig& config,
              const std::optional<MatrixXd>& init, const EpochCallback& on_epoch) {
  config.validate();
  const int n = static_cast<int>(e.size());
  const int q = config.latent_dim;
  if (n < 2) throw ValidationError("fit needs at least 2 points");

  MatrixXd mu0;
  if (init) {
    if (init->rows() != n || init->cols() != q) throw ValidationError("init must be N x latent_dim");
    if (!init->allFinite()) throw ValidationError("init must be finite");
    mu0 = *init;
  } else {
    if (q > n - 1) throw ValidationError("latent_dim must be <= N-1");
    mu0 = isomap_initialization(e, config.eps, q, config.threads);
  }
  mu0 = unit_rms(mu0);

  FitReport rep;
  rep.config = config;
  rep.latent.mu = mu0;
  rep.latent.log_var = MatrixXd::Constant(n, q, std::log(config.init_variance));
  rep.field = initial_field(mu0, initial_scale(e, mu0, config.eps), config);
  rep.elbo_trace.reserve(static_cast<std::size_t>(config.epochs));

  const PairBatch full = all_pairs(e, config.eps);
  const PairBatch trace_pairs = config.pair_batch > 0
                                    ? subsample_pairs(e, config.eps, config.pair_batch,
                                                      {config.seed, kTraceTag})
                                    : full;

  AdamSlot s_mu, s_lv, s_loc, s_mean, s_chol, s_ls, s_var;
  const double lr = config.learning_rate;
  auto& lat = rep.latent;
  auto& fld = rep.field;
  const auto m_ind = fld.inducing.size();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const NoiseKey key{config.seed, static_cast<std::uint64_t>(epoch)};
    const bool latent_phase = (epoch / config.block_length) % 2 == 0;
    ElboGradient g;
    try {
      const PairBatch batch =
          config.pair_batch > 0 ? subsample_pairs(e, config.eps, config.pair_batch, key) : full;
      const auto terms = elbo(e, lat, fld, config, key, batch, &g);
      if (!std::isfinite(terms.value) || !finite_gradient(g))
        throw NumericalError("non-finite ELBO or gradient");
    } catch (const NumericalError& ex) {
      throw FitAborted(std::string(ex.what()) + " at epoch " + std::to_string(epoch), epoch, lat,
                       fld);
    } catch (const std::domain_error& ex) {
      throw FitAborted(std::string(ex.what()) + " at epoch " + std::to_string(epoch), epoch, lat,
                       fld);
    }

    if (latent_phase) {
      adam_ascent(lat.mu, g.d_mu, s_mu, lr);
      adam_ascent(lat.log_var, g.d_log_var, s_lv, lr);
    } else {
      adam_ascent(fld.inducing.locations, g.field.d_locations, s_loc, lr);
      adam_ascent(fld.inducing.mean, g.field.d_mean, s_mean, lr);
      // L_S: strictly lower entries directly, diagonal in log space.
      MatrixXd& l = fld.inducing.chol_cov;
      MatrixXd p = l;
      MatrixXd gp = g.field.d_chol_cov;
      for (Eigen::Index i = 0; i < m_ind; ++i) {
        gp(i, i) *= l(i, i);
        p(i, i) = std::log(l(i, i));
      }
      adam_ascent(p, gp, s_chol, lr);
      for (Eigen::Index i = 0; i < m_ind; ++i) p(i, i) = std::exp(p(i, i));
      l = p.triangularView<Eigen::Lower>();
      MatrixXd ls = as_matrix(fld.kernel.log_lengthscales);
      adam_ascent(ls, as_matrix(g.field.d_kernel.d_log_lengthscales), s_ls, lr);
      fld.kernel.log_lengthscales = ls.col(0);
      MatrixXd lv(1, 1);
      lv(0, 0) = fld.kernel.log_variance;
      MatrixXd glv(1, 1);
      glv(0, 0) = g.field.d_kernel.d_log_variance;
      adam_ascent(lv, glv, s_var, lr);
      fld.kernel.log_variance = lv(0, 0);
    }

    double traced = 0.0;
    try {
      traced = elbo(e, lat, fld, config, {config.seed, kTraceTag}, trace_pairs).value;
    } catch (const NumericalError& ex) {
      throw FitAborted(std::string(ex.what()) + " at epoch " + std::to_string(epoch), epoch, lat,
                       fld);
    } catch (const std::domain_error& ex) {
      throw FitAborted(std::string(ex.what()) + " at epoch " + std::to_string(epoch), epoch, lat,
                       fld);
    }
    if (!std::isfinite(traced))
      throw FitAborted("non-finite ELBO at epoch " + std::to_string(epoch), epoch, lat, fld);
    rep.elbo_trace.push_back(traced);
    if (on_epoch) on_epoch(epoch, traced);
  }

  std::vector<IndexPair> every;
  every.reserve(full.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) every.emplace_back(i, j);
  // Pairs with zero observed distance have no density; keep them out of the
  // snapshot too.
  std::erase_if(every, [&](const IndexPair& p) { return !(e(p.first, p.second) > 0.0); });
  rep.pairs = pair_statistics(e, lat.mu, fld, config, {config.seed, kSnapshotTag}, every);
  return rep;
}

}  // namespace isogplvm
