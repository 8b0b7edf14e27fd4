#include "isogplvm/geometry.hpp"

#include "isogplvm/errors.hpp"
#include "isogplvm/linalg.hpp"
#include "isogplvm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace isogplvm {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

SparseGp::PointMoments ConstantJacobian::moments(const VectorXd& z, bool with_derivatives) const {
  if (z.size() != value_.cols()) throw ValidationError("point has wrong dimension");
  SparseGp::PointMoments out;
  out.mean = value_;
  out.variance = 0.0;
  if (with_derivatives) {
    out.d_mean.assign(static_cast<std::size_t>(value_.cols()),
                      MatrixXd::Zero(value_.rows(), value_.cols()));
    out.d_variance = VectorXd::Zero(value_.cols());
  }
  return out;
}

MatrixXd expected_metric(const JacobianDistribution& j, const VectorXd& z) {
  if (z.size() != j.latent_dim()) throw ValidationError("point has wrong dimension");
  const auto pm = j.moments(z, false);
  MatrixXd g = pm.mean.transpose() * pm.mean;
  g.diagonal().array() += j.ambient_dim() * pm.variance;
  return 0.5 * (g + g.transpose());
}

MatrixXd expected_metric(const JacobianField& field, const VectorXd& z) {
  return expected_metric(GpJacobian(field), z);
}

VectorXd MetricGrid::node(Eigen::Index flat) const {
  const auto q = static_cast<Eigen::Index>(resolution.size());
  VectorXd z(q);
  for (Eigen::Index d = q - 1; d >= 0; --d) {
    const int r = resolution[static_cast<std::size_t>(d)];
    const auto k = flat % r;
    flat /= r;
    z(d) = lower(d) + (upper(d) - lower(d)) * static_cast<double>(k) / (r - 1);
  }
  return z;
}

std::string MetricGrid::to_csv() const {
  std::ostringstream os;
  for (std::size_t d = 0; d < resolution.size(); ++d) os << "z" << d << ",";
  os << "value\n";
  for (Eigen::Index g = 0; g < size(); ++g) {
    const VectorXd z = node(g);
    for (Eigen::Index d = 0; d < z.size(); ++d) os << fmt(z(d)) << ",";
    os << fmt(values(g)) << "\n";
  }
  return os.str();
}

std::string MetricGrid::header_json() const {
  std::ostringstream os;
  auto arr = [&](auto get, std::size_t n) {
    os << "[";
    for (std::size_t i = 0; i < n; ++i) os << (i ? ", " : "") << get(i);
    os << "]";
  };
  const auto q = resolution.size();
  os << "{\"kind\": \"metric_grid\", \"quantity\": \"E[sqrt(det(J^T J))]\", \"lower\": ";
  arr([&](std::size_t i) { return fmt(lower(static_cast<Eigen::Index>(i))); }, q);
  os << ", \"upper\": ";
  arr([&](std::size_t i) { return fmt(upper(static_cast<Eigen::Index>(i))); }, q);
  os << ", \"resolution\": ";
  arr([&](std::size_t i) { return std::to_string(resolution[i]); }, q);
  os << ", \"n_mc\": " << n_mc << ", \"seed\": " << seed << "}\n";
  return os.str();
}

MetricGrid magnification_grid(const JacobianDistribution& j, const VectorXd& lower,
                              const VectorXd& upper, const std::vector<int>& resolution, int n_mc,
                              std::uint64_t seed, int threads) {
  const int q = j.latent_dim();
  if (lower.size() != q || upper.size() != q || static_cast<int>(resolution.size()) != q)
    throw ValidationError("grid bounds and resolution must have latent_dim entries");
  if (n_mc < 1) throw ValidationError("magnification_grid needs n_mc >= 1");
  Eigen::Index total = 1;
  for (int r : resolution) {
    if (r < 2) throw ValidationError("grid resolution must be >= 2 per axis");
    total *= r;
  }
  for (int d = 0; d < q; ++d)
    if (!(upper(d) > lower(d))) throw ValidationError("grid upper bound must exceed lower bound");

  MetricGrid grid;
  grid.lower = lower;
  grid.upper = upper;
  grid.resolution = resolution;
  grid.n_mc = n_mc;
  grid.seed = seed;
  grid.values = VectorXd::Zero(total);
  const int dp = j.ambient_dim();
  constexpr Eigen::Index kBlock = 64;
  const auto n_blocks = static_cast<std::size_t>((total + kBlock - 1) / kBlock);
  parallel_blocks(n_blocks, threads, [&](std::size_t b) {
    const auto begin = static_cast<Eigen::Index>(b) * kBlock;
    const auto end = std::min(total, begin + kBlock);
    for (Eigen::Index g = begin; g < end; ++g) {
      const auto pm = j.moments(grid.node(g), false);
      const double sd = std::sqrt(pm.variance);
      CounterRng rng(seed, Stream::Grid, {static_cast<std::uint64_t>(g)});
      std::vector<double> vols(static_cast<std::size_t>(n_mc));
      MatrixXd jm(dp, q);
      for (auto& v : vols) {
        if (sd > 0.0) {
          for (int r = 0; r < dp; ++r)
            for (int c = 0; c < q; ++c) jm(r, c) = pm.mean(r, c) + sd * rng.normal();
        } else {
          jm = pm.mean;
        }
        const double det = (jm.transpose() * jm).determinant();
        v = std::sqrt(std::max(0.0, det));
      }
      grid.values(g) = pairwise_sum(vols) / n_mc;
    }
  });
  return grid;
}

double curve_energy(const JacobianDistribution& j, const MatrixXd& points, MatrixXd* gradient) {
  const auto k_seg = points.rows() - 1;
  const int q = j.latent_dim();
  const int dp = j.ambient_dim();
  if (k_seg < 1 || points.cols() != q) throw ValidationError("curve must be (K+1) x latent_dim");
  if (gradient) *gradient = MatrixXd::Zero(points.rows(), q);
  const double kf = static_cast<double>(k_seg);
  std::vector<double> terms(static_cast<std::size_t>(k_seg));
  for (Eigen::Index k = 0; k < k_seg; ++k) {
    const VectorXd s = (points.row(k + 1) - points.row(k)).transpose();
    const VectorXd mid = 0.5 * (points.row(k) + points.row(k + 1)).transpose();
    const auto pm = j.moments(mid, gradient != nullptr);
    const VectorXd ms = pm.mean * s;
    const double ss = s.squaredNorm();
    terms[static_cast<std::size_t>(k)] = kf * (ms.squaredNorm() + dp * pm.variance * ss);
    if (!gradient) continue;
    // G s = M^T M s + D' v s
    const VectorXd gs = pm.mean.transpose() * ms + dp * pm.variance * s;
    VectorXd h(q);
    for (int d = 0; d < q; ++d)
      h(d) = 2.0 * ms.dot(pm.d_mean[static_cast<std::size_t>(d)] * s) + dp * pm.d_variance(d) * ss;
    gradient->row(k) += kf * (-2.0 * gs + 0.5 * h).transpose();
    gradient->row(k + 1) += kf * (2.0 * gs + 0.5 * h).transpose();
  }
  return pairwise_sum(terms);
}

double curve_expected_length(const JacobianDistribution& j, const MatrixXd& points) {
  std::vector<double> terms;
  for (Eigen::Index k = 0; k + 1 < points.rows(); ++k) {
    const VectorXd s = (points.row(k + 1) - points.row(k)).transpose();
    const VectorXd mid = 0.5 * (points.row(k) + points.row(k + 1)).transpose();
    terms.push_back(std::sqrt(std::max(0.0, s.dot(expected_metric(j, mid) * s))));
  }
  return pairwise_sum(terms);
}

Geodesic geodesic(const JacobianDistribution& j, const VectorXd& a, const VectorXd& b,
                  const GeodesicOptions& opt) {
  const int q = j.latent_dim();
  if (opt.segments < 2) throw ValidationError("geodesic needs K >= 2");
  if (opt.max_iter < 0) throw ValidationError("geodesic needs max_iter >= 0");
  if (a.size() != q || b.size() != q) throw ValidationError("geodesic endpoints have wrong dimension");
  const int k_seg = opt.segments;
  MatrixXd chord(k_seg + 1, q);
  for (int k = 0; k <= k_seg; ++k) {
    const double t = static_cast<double>(k) / k_seg;
    chord.row(k) = ((1.0 - t) * a + t * b).transpose();
  }
  chord.row(0) = a.transpose();
  chord.row(k_seg) = b.transpose();

  Geodesic out;
  if ((b - a).squaredNorm() == 0.0) {
    out.points = chord;
    out.converged = true;
    return out;
  }

  MatrixXd x = chord;
  MatrixXd grad;
  double energy = curve_energy(j, x, &grad);
  std::vector<double> history{energy};
  double step = 1.0;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter; ++it) {
    grad.row(0).setZero();
    grad.row(k_seg).setZero();
    const double g2 = grad.squaredNorm();
    if (!(g2 > 0.0)) {
      converged = true;
      break;
    }
    bool accepted = false;
    MatrixXd trial;
    MatrixXd trial_grad;
    double trial_energy = energy;
    while (step > 1e-30) {
      trial = x - step * grad;
      trial_energy = curve_energy(j, trial, &trial_grad);
      if (trial_energy <= energy - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent direction left at machine precision: stationary.
      converged = true;
      break;
    }
    x = std::move(trial);
    grad = std::move(trial_grad);
    energy = trial_energy;
    history.push_back(energy);
    step *= 2.0;
    if (history.size() > 10) {
      const double before = history[history.size() - 11];
      if (before - energy < opt.tol * std::max(1.0, std::abs(energy))) {
        converged = true;
        ++it;
        break;
      }
    }
  }

  const double len = curve_expected_length(j, x);
  const double chord_len = curve_expected_length(j, chord);
  if (len <= chord_len) {
    out.points = x;
    out.expected_length = len;
    out.energy = energy;
  } else {
    out.points = chord;
    out.expected_length = chord_len;
    out.energy = curve_energy(j, chord);
  }
  out.iterations = it;
  out.converged = converged;
  return out;
}

std::string geodesic_csv(const std::vector<Geodesic>& paths) {
  std::ostringstream os;
  const auto q = paths.empty() ? 2 : paths.front().points.cols();
  os << "path,index";
  for (Eigen::Index d = 0; d < q; ++d) os << ",z" << d;
  os << ",expected_length\n";
  for (std::size_t p = 0; p < paths.size(); ++p)
    for (Eigen::Index k = 0; k < paths[p].points.rows(); ++k) {
      os << p << "," << k;
      for (Eigen::Index d = 0; d < paths[p].points.cols(); ++d) os << "," << fmt(paths[p].points(k, d));
      os << "," << fmt(paths[p].expected_length) << "\n";
    }
  return os.str();
}

namespace {

std::string xml_escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

// Fixed 640 x 640 viewport with a 40 px margin. The embedding (and the grid,
// when present) is mapped linearly into the plotting square with a common
// scale on both axes. Heatmap color: linear ramp from white (grid minimum) to
// rgb(33, 102, 172) (grid maximum). Points are colored by label from a
// 10-color palette, black when unlabeled; geodesics are drawn in red.
std::string render_svg(const PlotInput& in) {
  if (in.embedding.cols() != 2) throw ValidationError("render_svg needs a 2-D embedding");
  constexpr double size = 640.0, margin = 40.0;
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  auto extend = [&](double x, double y) {
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  };
  for (Eigen::Index i = 0; i < in.embedding.rows(); ++i) extend(in.embedding(i, 0), in.embedding(i, 1));
  if (in.grid && in.grid->lower.size() == 2) {
    extend(in.grid->lower(0), in.grid->lower(1));
    extend(in.grid->upper(0), in.grid->upper(1));
  }
  for (const auto& g : in.geodesics)
    for (Eigen::Index k = 0; k < g.points.rows(); ++k) extend(g.points(k, 0), g.points(k, 1));
  if (!std::isfinite(x0)) x0 = y0 = 0.0, x1 = y1 = 1.0;
  const double span = std::max({x1 - x0, y1 - y0, 1e-12});
  const double scale = (size - 2 * margin) / span;
  auto px = [&](double x) { return margin + (x - x0) * scale; };
  auto py = [&](double y) { return size - margin - (y - y0) * scale; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n";
  os << "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n";
  if (!in.title.empty())
    os << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << xml_escape(in.title) << "</text>\n";
  if (in.grid && in.grid->resolution.size() == 2 && in.grid->size() > 0) {
    const auto& g = *in.grid;
    const double vmin = g.values.minCoeff(), vmax = g.values.maxCoeff();
    const int r0 = g.resolution[0], r1 = g.resolution[1];
    const double cw = (g.upper(0) - g.lower(0)) / (r0 - 1) * scale;
    const double ch = (g.upper(1) - g.lower(1)) / (r1 - 1) * scale;
    for (Eigen::Index n = 0; n < g.size(); ++n) {
      const VectorXd z = g.node(n);
      const double t = vmax > vmin ? (g.values(n) - vmin) / (vmax - vmin) : 0.0;
      const int r = static_cast<int>(std::lround(255 + t * (33 - 255)));
      const int gg = static_cast<int>(std::lround(255 + t * (102 - 255)));
      const int b = static_cast<int>(std::lround(255 + t * (172 - 255)));
      os << "<rect x=\"" << fmt_short(px(z(0)) - cw / 2) << "\" y=\"" << fmt_short(py(z(1)) - ch / 2)
         << "\" width=\"" << fmt_short(cw) << "\" height=\"" << fmt_short(ch) << "\" fill=\"rgb(" << r
         << "," << gg << "," << b << ")\"/>\n";
    }
  }
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  for (Eigen::Index i = 0; i < in.embedding.rows(); ++i) {
    const char* color = "black";
    if (static_cast<std::size_t>(i) < in.labels.size())
      color = palette[static_cast<std::size_t>(((in.labels[static_cast<std::size_t>(i)] % 10) + 10) % 10)];
    os << "<circle cx=\"" << fmt_short(px(in.embedding(i, 0))) << "\" cy=\""
       << fmt_short(py(in.embedding(i, 1))) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }
  for (const auto& g : in.geodesics) {
    os << "<polyline fill=\"none\" stroke=\"red\" stroke-width=\"1.5\" points=\"";
    for (Eigen::Index k = 0; k < g.points.rows(); ++k)
      os << (k ? " " : "") << fmt_short(px(g.points(k, 0))) << "," << fmt_short(py(g.points(k, 1)));
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace isogplvm
