#include "isogplvm/gp.hpp"

#include "isogplvm/errors.hpp"

#include <algorithm>
#include <string>

namespace isogplvm {

void KernelParams::validate() const {
  if (log_lengthscales.size() < 1) throw ValidationError("kernel needs at least one lengthscale");
  if (!log_lengthscales.allFinite() || !std::isfinite(log_variance) || !std::isfinite(log_jitter))
    throw ValidationError("kernel parameters must be finite");
  // Tolerate the rounding of log(1e-10) round trips.
  if (std::exp(log_jitter) < 1e-10 * (1.0 - 1e-12)) throw ValidationError("kernel jitter must be >= 1e-10");
}

KernelGradient& KernelGradient::operator+=(const KernelGradient& o) {
  d_log_lengthscales += o.d_log_lengthscales;
  d_log_variance += o.d_log_variance;
  return *this;
}

MatrixXd kernel_matrix(const MatrixXd& a, const MatrixXd& b, const KernelParams& kp) {
  if (a.cols() != kp.dim() || b.cols() != kp.dim())
    throw ValidationError("kernel input dimension does not match lengthscales");
  const VectorXd inv_l2 = (-2.0 * kp.log_lengthscales).array().exp();
  const double var = kp.variance();
  MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      double r2 = 0.0;
      for (Eigen::Index d = 0; d < a.cols(); ++d) {
        const double diff = a(i, d) - b(j, d);
        r2 += diff * diff * inv_l2(d);
      }
      k(i, j) = var * std::exp(-0.5 * r2);
    }
  }
  return k;
}

void kernel_backward(const MatrixXd& a, const MatrixXd& b, const KernelParams& kp,
                     const MatrixXd& k, const MatrixXd& g, MatrixXd* d_a, MatrixXd* d_b,
                     KernelGradient* d_kernel) {
  const Eigen::Index q = a.cols();
  const VectorXd inv_l2 = (-2.0 * kp.log_lengthscales).array().exp();
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double w = g(i, j) * k(i, j);
      if (w == 0.0) continue;
      if (d_kernel) d_kernel->d_log_variance += w;
      for (Eigen::Index d = 0; d < q; ++d) {
        const double diff = a(i, d) - b(j, d);
        const double t = w * diff * inv_l2(d);
        if (d_a) (*d_a)(i, d) -= t;
        if (d_b) (*d_b)(j, d) += t;
        if (d_kernel) d_kernel->d_log_lengthscales(d) += t * diff;
      }
    }
  }
}

GaussianMoments exact_posterior(const MatrixXd& test, const MatrixXd& train, const VectorXd& y,
                                const KernelParams& kp, double noise_sd) {
  kp.validate();
  if (train.rows() < 1) throw ValidationError("exact posterior needs at least one training point");
  if (y.size() != train.rows()) throw ValidationError("target count does not match training inputs");
  MatrixXd kzz = kernel_matrix(train, train, kp);
  kzz.diagonal().array() += noise_sd * noise_sd;
  MatrixXd lower;
  Eigen::LLT<MatrixXd> llt(kzz);
  if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
    lower = llt.matrixL();
  } else {
    lower = robust_cholesky(kzz, kp.jitter(), kp.max_jitter()).lower;
  }
  const MatrixXd kzt = kernel_matrix(train, test, kp);
  GaussianMoments out;
  out.mean = kzt.transpose() * cholesky_solve(lower, y);
  const MatrixXd v = lower.triangularView<Eigen::Lower>().solve(kzt);
  out.cov = kernel_matrix(test, test, kp) - v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

void InducingState::validate() const {
  const auto m = locations.rows();
  if (m < 1) throw ValidationError("inducing state needs M >= 1");
  if (mean.rows() != m || chol_cov.rows() != m || chol_cov.cols() != m)
    throw ValidationError("inducing state shapes are inconsistent");
  if (!locations.allFinite() || !mean.allFinite() || !chol_cov.allFinite())
    throw ValidationError("inducing state has non-finite entries");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(chol_cov(i, i) > 0.0)) throw ValidationError("chol_cov diagonal must be positive");
    for (Eigen::Index j = i + 1; j < m; ++j)
      if (chol_cov(i, j) != 0.0) throw ValidationError("chol_cov must be lower triangular");
  }
}

void JacobianField::validate() const {
  if (ambient_dim < 1 || latent_dim < 1) throw ValidationError("field dimensions must be >= 1");
  kernel.validate();
  inducing.validate();
  if (kernel.dim() != latent_dim) throw ValidationError("kernel dimension must equal latent_dim");
  if (inducing.locations.cols() != latent_dim)
    throw ValidationError("inducing locations must have latent_dim columns");
  if (inducing.mean.cols() != channels())
    throw ValidationError("inducing mean must have ambient_dim * latent_dim columns");
}

FieldAdjoint FieldAdjoint::zeros(const JacobianField& f) {
  const auto m = f.inducing.size();
  FieldAdjoint a;
  a.d_kuu = MatrixXd::Zero(m, m);
  a.d_s = MatrixXd::Zero(m, m);
  a.d_mean = MatrixXd::Zero(m, f.channels());
  a.d_locations = MatrixXd::Zero(m, f.latent_dim);
  a.d_chol_direct = MatrixXd::Zero(m, m);
  a.d_beta = MatrixXd::Zero(m, f.channels());
  a.d_r = MatrixXd::Zero(m, m);
  a.d_luu = MatrixXd::Zero(m, m);
  a.d_kernel = KernelGradient::zeros(f.latent_dim);
  return a;
}

FieldAdjoint& FieldAdjoint::operator+=(const FieldAdjoint& o) {
  d_kuu += o.d_kuu;
  d_s += o.d_s;
  d_mean += o.d_mean;
  d_locations += o.d_locations;
  d_chol_direct += o.d_chol_direct;
  d_beta += o.d_beta;
  d_r += o.d_r;
  d_luu += o.d_luu;
  d_kernel += o.d_kernel;
  return *this;
}

SparseGp::SparseGp(const JacobianField& field) : field_(field) {
  field_.validate();
  const auto& z = field_.inducing.locations;
  kuu_ = kernel_matrix(z, z, field_.kernel);
  auto chol = robust_cholesky(kuu_, field_.kernel.jitter(), field_.kernel.max_jitter());
  luu_ = std::move(chol.lower);
  kuu_jitter_ = chol.jitter;
  const auto& l = field_.inducing.chol_cov;
  s_ = l.triangularView<Eigen::Lower>() * l.transpose();
  alpha_ = cholesky_solve(luu_, field_.inducing.mean);
  const auto lt = luu_.triangularView<Eigen::Lower>();
  beta_ = lt.solve(field_.inducing.mean);
  r_ = lt.solve(MatrixXd(l.triangularView<Eigen::Lower>()));
}

PredictiveMoments SparseGp::moments(const MatrixXd& points, Workspace* ws) const {
  Workspace local;
  Workspace& w = ws ? *ws : local;
  const auto& kp = field_.kernel;
  w.ktu = kernel_matrix(points, field_.inducing.locations, kp);
  w.ktt = kernel_matrix(points, points, kp);
  w.a = luu_.triangularView<Eigen::Lower>().solve(w.ktu.transpose());
  w.b.noalias() = r_.triangularView<Eigen::Lower>().transpose() * w.a;
  PredictiveMoments out;
  out.mean.noalias() = w.a.transpose() * beta_;
  out.cov = w.ktt;
  out.cov.noalias() -= w.a.transpose() * w.a;
  out.cov.noalias() += w.b.transpose() * w.b;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

void SparseGp::backward(const MatrixXd& points, const Workspace& ws, const MatrixXd& d_mean,
                        const MatrixXd& d_cov, FieldAdjoint& adj, MatrixXd* d_points) const {
  const auto& kp = field_.kernel;
  const MatrixXd gs = 0.5 * (d_cov + d_cov.transpose());
  adj.d_beta.noalias() += ws.a * d_mean;
  const MatrixXd d_b = 2.0 * ws.b * gs;  // M x T
  adj.d_r.noalias() += ws.a * d_b.transpose();
  MatrixXd d_a = beta_ * d_mean.transpose();
  d_a.noalias() -= 2.0 * ws.a * gs;
  d_a.noalias() += r_.triangularView<Eigen::Lower>() * d_b;
  // A = L^{-1} K_ut
  const MatrixXd d_kut = luu_.triangularView<Eigen::Lower>().transpose().solve(d_a);
  adj.d_luu.noalias() -= d_kut * ws.a.transpose();
  const MatrixXd d_ktu = d_kut.transpose();

  kernel_backward(points, field_.inducing.locations, kp, ws.ktu, d_ktu, d_points,
                  &adj.d_locations, &adj.d_kernel);
  if (d_points) {
    MatrixXd d_other = MatrixXd::Zero(points.rows(), points.cols());
    kernel_backward(points, points, kp, ws.ktt, gs, d_points, &d_other, &adj.d_kernel);
    *d_points += d_other;
  } else {
    kernel_backward(points, points, kp, ws.ktt, gs, nullptr, nullptr, &adj.d_kernel);
  }
}

double SparseGp::kl(FieldAdjoint* adj, double scale) const {
  const auto m = field_.inducing.size();
  const double p = static_cast<double>(field_.channels());
  const MatrixXd& mu = field_.inducing.mean;
  const MatrixXd& ls = field_.inducing.chol_cov;
  const MatrixXd kinv = cholesky_solve(luu_, MatrixXd::Identity(m, m));
  const MatrixXd kinv_s = kinv * s_;
  const double logdet_k = 2.0 * luu_.diagonal().array().log().sum();
  const double logdet_s = 2.0 * ls.diagonal().array().log().sum();
  const double quad = (mu.array() * alpha_.array()).sum();
  const double value =
      0.5 * p * (kinv_s.trace() - static_cast<double>(m) + logdet_k - logdet_s) + 0.5 * quad;
  if (adj) {
    adj->d_mean += scale * alpha_;
    adj->d_s += scale * 0.5 * p * kinv;
    for (Eigen::Index i = 0; i < m; ++i) adj->d_chol_direct(i, i) -= scale * p / ls(i, i);
    adj->d_kuu += scale * (0.5 * p * (kinv - kinv_s * kinv) - 0.5 * alpha_ * alpha_.transpose());
  }
  return value;
}

FieldGradient SparseGp::finalize(const FieldAdjoint& adj) const {
  const auto& z = field_.inducing.locations;
  const auto& kp = field_.kernel;
  FieldGradient g;
  g.d_locations = adj.d_locations;
  g.d_mean = adj.d_mean;
  g.d_kernel = adj.d_kernel;
  const auto lt_t = luu_.triangularView<Eigen::Lower>().transpose();
  MatrixXd d_luu = adj.d_luu;
  // beta = L^{-1} mu
  const MatrixXd lt_dbeta = lt_t.solve(adj.d_beta);
  g.d_mean += lt_dbeta;
  d_luu.noalias() -= lt_dbeta * beta_.transpose();
  // R = L^{-1} L_S
  const MatrixXd lt_dr = lt_t.solve(adj.d_r);
  d_luu.noalias() -= lt_dr * r_.transpose();
  MatrixXd d_kuu = adj.d_kuu + cholesky_backward(luu_, d_luu);
  const MatrixXd& d_s = adj.d_s;
  MatrixXd d_other = MatrixXd::Zero(z.rows(), z.cols());
  kernel_backward(z, z, kp, kuu_, d_kuu, &g.d_locations, &d_other, &g.d_kernel);
  g.d_locations += d_other;
  // The jitter is proportional to sigma^2.
  g.d_kernel.d_log_variance += kuu_jitter_ * d_kuu.trace();
  const MatrixXd& ls = field_.inducing.chol_cov;
  MatrixXd d_l = (d_s + d_s.transpose()) * ls + adj.d_chol_direct + lt_dr;
  g.d_chol_cov = d_l.triangularView<Eigen::Lower>();
  return g;
}

SparseGp::PointMoments SparseGp::point_moments(const VectorXd& z, bool with_derivatives) const {
  const int dp = field_.ambient_dim;
  const int q = field_.latent_dim;
  const auto& kp = field_.kernel;
  const MatrixXd& zu = field_.inducing.locations;
  const MatrixXd k = kernel_matrix(z.transpose(), zu, kp);  // 1 x M
  const VectorXd kv = k.transpose();
  PointMoments out;
  const auto lt = luu_.triangularView<Eigen::Lower>();
  const auto rt = r_.triangularView<Eigen::Lower>().transpose();
  const VectorXd a = lt.solve(kv);
  const VectorXd b = rt * a;
  const VectorXd mean_flat = beta_.transpose() * a;  // P
  out.mean.resize(dp, q);
  for (int r = 0; r < dp; ++r)
    for (int c = 0; c < q; ++c) out.mean(r, c) = mean_flat(r * q + c);
  out.variance = std::max(0.0, kp.variance() - a.squaredNorm() + b.squaredNorm());
  if (!with_derivatives) return out;
  out.d_mean.resize(static_cast<std::size_t>(q));
  out.d_variance.resize(q);
  for (int d = 0; d < q; ++d) {
    const double inv_l2 = std::exp(-2.0 * kp.log_lengthscales(d));
    VectorXd dk(zu.rows());
    for (Eigen::Index a = 0; a < zu.rows(); ++a) dk(a) = -kv(a) * (z(d) - zu(a, d)) * inv_l2;
    const VectorXd da = lt.solve(dk);
    const VectorXd db = rt * da;
    const VectorXd dm = beta_.transpose() * da;
    MatrixXd dmm(dp, q);
    for (int r = 0; r < dp; ++r)
      for (int c = 0; c < q; ++c) dmm(r, c) = dm(r * q + c);
    out.d_mean[static_cast<std::size_t>(d)] = std::move(dmm);
    out.d_variance(d) = out.variance > 0.0 ? 2.0 * (b.dot(db) - a.dot(da)) : 0.0;
  }
  return out;
}

PredictiveMoments sparse_predictive_moments(const JacobianField& field, const MatrixXd& points) {
  if (points.rows() < 1) throw ValidationError("sparse_predictive_moments needs T >= 1");
  return SparseGp(field).moments(points);
}

std::vector<MatrixXd> sample_field_along_curve(const JacobianField& field, const MatrixXd& points,
                                               const std::vector<MatrixXd>& noise) {
  if (noise.empty()) return {};
  const SparseGp gp(field);
  const auto mom = gp.moments(points);
  const auto chol = robust_cholesky(mom.cov, field.kernel.jitter(), field.kernel.max_jitter());
  std::vector<MatrixXd> out;
  out.reserve(noise.size());
  for (const auto& eps : noise) {
    if (eps.rows() != points.rows() || eps.cols() != field.channels())
      throw ValidationError("noise draws must be T x P");
    out.push_back(mom.mean + chol.lower.triangularView<Eigen::Lower>() * eps);
  }
  return out;
}

double kl_qu_pu(const InducingState& inducing, const KernelParams& kp) {
  JacobianField f;
  f.kernel = kp;
  f.inducing = inducing;
  f.latent_dim = static_cast<int>(kp.dim());
  if (inducing.mean.cols() % f.latent_dim != 0)
    throw ValidationError("inducing mean columns must be a multiple of latent_dim");
  f.ambient_dim = static_cast<int>(inducing.mean.cols() / f.latent_dim);
  return SparseGp(f).kl();
}

}  // namespace isogplvm
