#include "isogplvm/baselines.hpp"

#include "isogplvm/errors.hpp"
#include "isogplvm/graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace isogplvm {

MatrixXd classical_mds(const MatrixXd& d, int q) {
  const auto n = d.rows();
  if (d.cols() != n) throw ValidationError("classical_mds needs a square matrix");
  if (q < 1 || q > n - 1) throw ValidationError("classical_mds needs 1 <= q <= N-1");
  const MatrixXd d2 = d.array().square().matrix();
  const VectorXd row_mean = d2.rowwise().mean();
  const VectorXd col_mean = d2.colwise().mean().transpose();
  const double all_mean = d2.mean();
  MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      b(i, j) = -0.5 * (d2(i, j) - row_mean(i) - col_mean(j) + all_mean);
  b = 0.5 * (b + b.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw NumericalError("classical_mds eigensolver failed");
  // Eigen returns ascending eigenvalues.
  MatrixXd z(n, q);
  for (int c = 0; c < q; ++c) {
    const Eigen::Index k = n - 1 - c;
    const double lambda = std::max(0.0, es.eigenvalues()(k));
    VectorXd v = es.eigenvectors().col(k);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (std::abs(v(i)) > std::abs(v(arg)) + 1e-12) arg = i;
    if (v(arg) < 0.0) v = -v;
    z.col(c) = std::sqrt(lambda) * v;
  }
  // Exact centering: the eigenvectors of a centered Gram matrix are already
  // orthogonal to 1 up to round-off.
  z.rowwise() -= z.colwise().mean();
  return z;
}

MatrixXd classical_mds(const DissimilarityMatrix& d, int q) { return classical_mds(d.values(), q); }

IsomapResult isomap(const DissimilarityMatrix& d, double eps, int q, int threads) {
  if (!(eps > 0.0)) throw ValidationError("isomap needs eps > 0");
  const auto g = build_eps_graph(d, eps);
  const auto labels = connected_components(g);
  const int n_comp = component_count(labels);
  std::vector<int> sizes(static_cast<std::size_t>(n_comp), 0);
  for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
  const int largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

  IsomapResult out;
  for (int v = 0; v < static_cast<int>(labels.size()); ++v)
    (labels[static_cast<std::size_t>(v)] == largest ? out.kept : out.dropped).push_back(v);
  if (static_cast<int>(out.kept.size()) < q + 1)
    throw ValidationError("isomap: largest component has " + std::to_string(out.kept.size()) +
                          " vertices, need at least q+1 = " + std::to_string(q + 1));

  const MatrixXd geo = all_pairs_shortest(g, threads);
  const auto k = static_cast<Eigen::Index>(out.kept.size());
  MatrixXd sub(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      sub(a, b) = geo(out.kept[static_cast<std::size_t>(a)], out.kept[static_cast<std::size_t>(b)]);
  out.embedding = classical_mds(sub, q);
  return out;
}

MatrixXd isomap_initialization(const DissimilarityMatrix& d, double eps, int q, int threads) {
  if (!(eps > 0.0)) throw ValidationError("isomap needs eps > 0");
  const auto g = build_eps_graph(d, eps);
  MatrixXd geo = all_pairs_shortest(g, threads);
  for (Eigen::Index i = 0; i < geo.rows(); ++i)
    for (Eigen::Index j = 0; j < geo.cols(); ++j)
      if (!std::isfinite(geo(i, j))) geo(i, j) = d(i, j);
  return classical_mds(geo, q);
}

double stress(const DissimilarityMatrix& d, const MatrixXd& z) {
  if (z.rows() != d.size()) throw ValidationError("stress: embedding has wrong row count");
  std::vector<double> terms;
  const auto n = d.size();
  terms.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = d(i, j) - (z.row(i) - z.row(j)).norm();
      terms.push_back(r * r);
    }
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

ProcrustesResult procrustes(const MatrixXd& x, const MatrixXd& target, bool with_scaling) {
  if (x.rows() != target.rows() || x.cols() != target.cols())
    throw ValidationError("procrustes: shapes differ");
  const VectorXd mx = x.colwise().mean().transpose();
  const VectorXd mt = target.colwise().mean().transpose();
  const MatrixXd xc = x.rowwise() - mx.transpose();
  const MatrixXd tc = target.rowwise() - mt.transpose();
  Eigen::JacobiSVD<MatrixXd> svd(xc.transpose() * tc, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult out;
  out.rotation = svd.matrixU() * svd.matrixV().transpose();
  const double xx = xc.squaredNorm();
  out.scale = (with_scaling && xx > 0.0) ? svd.singularValues().sum() / xx : 1.0;
  out.translation = mt - out.scale * out.rotation.transpose() * mx;
  out.aligned = (out.scale * xc * out.rotation).rowwise() + mt.transpose();
  return out;
}

std::vector<double> pairwise_distances(const MatrixXd& z) {
  std::vector<double> out;
  const auto n = z.rows();
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) out.push_back((z.row(i) - z.row(j)).norm());
  return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("pearson: need equal sizes >= 2");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
  std::vector<double> r(v.size());
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s;
    while (e + 1 < idx.size() && v[idx[e + 1]] == v[idx[s]]) ++e;
    const double avg = 0.5 * static_cast<double>(s + e) + 1.0;
    for (std::size_t k = s; k <= e; ++k) r[idx[k]] = avg;
    s = e + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

}  // namespace isogplvm
