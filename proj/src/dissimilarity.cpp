#include "isogplvm/dissimilarity.hpp"

#include "isogplvm/errors.hpp"
#include "isogplvm/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace isogplvm {

void PointSet::validate() const {
  if (points.rows() < 2) throw ValidationError("point set needs at least 2 points");
  if (!points.allFinite()) throw ValidationError("point set has non-finite coordinates");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != points.rows())
    throw ValidationError("label count does not match point count");
}

void ImageStack::validate() const {
  if (pixels.rows() == 0) throw ValidationError("empty image stack");
  if (height <= 0 || width <= 0 || pixels.cols() != static_cast<Eigen::Index>(height) * width)
    throw ValidationError("image stack dimensions do not match pixel rows");
  if (!pixels.allFinite()) throw ValidationError("image stack has non-finite pixels");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != pixels.rows())
    throw ValidationError("label count does not match image count");
}

DissimilarityMatrix::DissimilarityMatrix(Eigen::MatrixXd values, double symmetry_tol)
    : values_(std::move(values)) {
  const auto n = values_.rows();
  if (values_.cols() != n) throw ValidationError("dissimilarity matrix must be square");
  if (!values_.allFinite()) throw ValidationError("dissimilarity matrix has non-finite entries");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (values_(i, i) != 0.0)
      throw ValidationError("dissimilarity matrix has nonzero diagonal at " + std::to_string(i));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (values_(i, j) < 0.0)
        throw std::domain_error("negative dissimilarity at (" + std::to_string(i) + ", " +
                                std::to_string(j) + ")");
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = values_(i, j);
      const double b = values_(j, i);
      if (std::abs(a - b) > symmetry_tol)
        throw ValidationError("dissimilarity matrix is not symmetric at (" + std::to_string(i) +
                              ", " + std::to_string(j) + ")");
      const double m = 0.5 * (a + b);
      values_(i, j) = m;
      values_(j, i) = m;
    }
  }
}

double DissimilarityMatrix::min_offdiagonal() const {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < size(); ++i)
    for (Eigen::Index j = i + 1; j < size(); ++j) best = std::min(best, values_(i, j));
  return best;
}

double DissimilarityMatrix::max_offdiagonal() const {
  double best = 0.0;
  for (Eigen::Index i = 0; i < size(); ++i)
    for (Eigen::Index j = i + 1; j < size(); ++j) best = std::max(best, values_(i, j));
  return best;
}

namespace {

DissimilarityMatrix row_distances(const Eigen::MatrixXd& rows) {
  const auto n = rows.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (rows.row(i) - rows.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return DissimilarityMatrix(std::move(d));
}

}  // namespace

DissimilarityMatrix euclidean_distances(const PointSet& ps) {
  ps.validate();
  return row_distances(ps.points);
}

DissimilarityMatrix euclidean_distances(const ImageStack& imgs) {
  imgs.validate();
  return row_distances(imgs.pixels);
}

Eigen::VectorXd rotate_image(const Eigen::VectorXd& image, int height, int width, double angle) {
  const double cy = 0.5 * (height - 1);
  const double cx = 0.5 * (width - 1);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  auto at = [&](int r, int col) -> double {
    if (r < 0 || r >= height || col < 0 || col >= width) return 0.0;
    return image(static_cast<Eigen::Index>(r) * width + col);
  };
  Eigen::VectorXd out(image.size());
  for (int r = 0; r < height; ++r) {
    for (int col = 0; col < width; ++col) {
      // Inverse map: the output pixel pulls from the source rotated by -angle.
      const double dx = col - cx;
      const double dy = r - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      const int x0 = static_cast<int>(fx);
      const int y0 = static_cast<int>(fy);
      const double v = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                       ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
      out(static_cast<Eigen::Index>(r) * width + col) = v;
    }
  }
  return out;
}

DissimilarityMatrix rotation_invariant_distances(const ImageStack& imgs, int n_angles) {
  imgs.validate();
  if (n_angles < 1) throw ValidationError("n_angles must be >= 1");
  const auto n = imgs.size();
  // rotated[k] holds all images rotated by angle k; k = 0 is the identity.
  std::vector<Eigen::MatrixXd> rotated(static_cast<std::size_t>(n_angles));
  rotated[0] = imgs.pixels;
  for (int k = 1; k < n_angles; ++k) {
    const double angle = 2.0 * M_PI * k / n_angles;
    Eigen::MatrixXd r(n, imgs.pixels.cols());
    for (Eigen::Index i = 0; i < n; ++i)
      r.row(i) = rotate_image(imgs.pixels.row(i).transpose(), imgs.height, imgs.width, angle)
                     .transpose();
    rotated[static_cast<std::size_t>(k)] = std::move(r);
  }
  Eigen::MatrixXd directed(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) {
        directed(i, j) = 0.0;
        continue;
      }
      double best = std::numeric_limits<double>::infinity();
      for (const auto& r : rotated)
        best = std::min(best, (r.row(i) - imgs.pixels.row(j)).squaredNorm());
      directed(i, j) = std::sqrt(best);
    }
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::min(directed(i, j), directed(j, i));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return DissimilarityMatrix(std::move(d));
}

DissimilarityMatrix lexicographic_distances(const DissimilarityMatrix& base,
                                            const std::vector<int>& labels, double eps,
                                            std::optional<double> r) {
  const auto n = base.size();
  if (labels.empty()) throw ValidationError("lexicographic distances require labels");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw ValidationError("label count does not match matrix size");
  if (!(eps > 0.0)) throw ValidationError("lexicographic eps must be positive");
  const double radius = r.value_or(eps / 4.0);
  if (!(radius > 0.0) || !(2.0 * radius < eps))
    throw ValidationError("lexicographic radius must satisfy 0 < 2r < eps");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(j)]
                           ? eps
                           : std::min(2.0 * radius, base(i, j));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return DissimilarityMatrix(std::move(d));
}

double swiss_roll_arc_length(double t) {
  return 0.5 * (t * std::sqrt(1.0 + t * t) + std::asinh(t));
}

Normalization parse_normalization(const std::string& name) {
  if (name == "none") return Normalization::None;
  if (name == "max") return Normalization::Max;
  if (name == "median") return Normalization::Median;
  if (name == "rms") return Normalization::Rms;
  throw ValidationError("unknown normalization '" + name + "' (expected none, max, median or rms)");
}

DissimilarityMatrix normalize_distances(const DissimilarityMatrix& d, Normalization mode) {
  const auto n = d.size();
  if (mode == Normalization::None || n < 2) return d;
  std::vector<double> off;
  off.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) off.push_back(d(i, j));
  double scale = 0.0;
  switch (mode) {
    case Normalization::Max:
      scale = *std::max_element(off.begin(), off.end());
      break;
    case Normalization::Median: {
      auto mid = off.begin() + static_cast<std::ptrdiff_t>(off.size() / 2);
      std::nth_element(off.begin(), mid, off.end());
      scale = *mid;
      break;
    }
    case Normalization::Rms: {
      double acc = 0.0;
      for (double v : off) acc += v * v;
      scale = std::sqrt(acc / static_cast<double>(off.size()));
      break;
    }
    case Normalization::None:
      break;
  }
  if (!(scale > 0.0)) throw ValidationError("cannot normalize: scale statistic is zero");
  return DissimilarityMatrix(d.values() / scale);
}

SwissRoll gen_swiss_roll(int n, double noise_sd, std::uint64_t seed) {
  if (n < 10) throw ValidationError("swiss roll needs n >= 10");
  if (!(noise_sd >= 0.0)) throw ValidationError("noise_sd must be nonnegative");
  CounterRng rng(seed, Stream::Data, {1});
  SwissRoll out;
  out.data.points.resize(n, 3);
  out.ground_truth.resize(n, 2);
  out.t.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = 1.5 * M_PI * (1.0 + 2.0 * rng.uniform());
    const double h = 21.0 * rng.uniform();
    out.t(i) = t;
    out.data.points.row(i) << t * std::cos(t), h, t * std::sin(t);
    out.ground_truth.row(i) << swiss_roll_arc_length(t), h;
  }
  if (noise_sd > 0.0) {
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d) out.data.points(i, d) += noise_sd * rng.normal();
  }
  return out;
}

namespace {

struct Glyph {
  // Axis-aligned bars (x0, y0, x1, y1) and one disc (cx, cy, radius), in
  // normalized coordinates where the frame spans [-1, 1].
  std::array<std::array<double, 4>, 3> bars;
  std::array<double, 3> disc;

  bool contains(double x, double y) const {
    for (const auto& b : bars)
      if (x >= b[0] && x <= b[2] && y >= b[1] && y <= b[3]) return true;
    const double dx = x - disc[0];
    const double dy = y - disc[1];
    return dx * dx + dy * dy <= disc[2] * disc[2];
  }
};

Glyph make_glyph(std::uint64_t seed) {
  CounterRng rng(seed, Stream::Data, {2});
  auto j = [&] { return 0.05 * (2.0 * rng.uniform() - 1.0); };
  Glyph g{};
  // An "F" with a dot: no rotational or mirror symmetry.
  g.bars[0] = {-0.40 + j(), -0.60, -0.18 + j(), 0.60};
  g.bars[1] = {-0.40, 0.40 + j(), 0.45 + j(), 0.60};
  g.bars[2] = {-0.40, -0.08 + j(), 0.22 + j(), 0.12};
  g.disc = {0.40 + j(), -0.42 + j(), 0.16};
  return g;
}

}  // namespace

Eigen::VectorXd render_glyph_frame(int frame, int n_frames, int size, std::uint64_t seed) {
  const Glyph glyph = make_glyph(seed);
  const int k = ((frame % n_frames) + n_frames) % n_frames;
  const double angle = 2.0 * M_PI * k / n_frames;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double center = 0.5 * (size - 1);
  const double half = 0.5 * size;
  constexpr int kSuper = 4;
  Eigen::VectorXd img(static_cast<Eigen::Index>(size) * size);
  for (int r = 0; r < size; ++r) {
    for (int col = 0; col < size; ++col) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = (col - center + (sx + 0.5) / kSuper - 0.5) / half;
          const double py = (center - r - (sy + 0.5) / kSuper + 0.5) / half;
          // Rotate the sample point backwards into the glyph frame.
          const double gx = c * px + s * py;
          const double gy = -s * px + c * py;
          hits += glyph.contains(gx, gy) ? 1 : 0;
        }
      }
      img(static_cast<Eigen::Index>(r) * size + col) =
          static_cast<double>(hits) / (kSuper * kSuper);
    }
  }
  return img;
}

ImageStack gen_rotated_glyph(int n_frames, int size, std::uint64_t seed) {
  if (n_frames < 8) throw ValidationError("rotated glyph needs n_frames >= 8");
  if (size < 8) throw ValidationError("glyph image size must be >= 8");
  ImageStack out;
  out.height = size;
  out.width = size;
  out.pixels.resize(n_frames, static_cast<Eigen::Index>(size) * size);
  for (int k = 0; k < n_frames; ++k)
    out.pixels.row(k) = render_glyph_frame(k, n_frames, size, seed).transpose();
  return out;
}

PlaneData gen_plane(int n, double width, double height, std::uint64_t seed) {
  if (n < 2) throw ValidationError("plane needs n >= 2");
  CounterRng rng(seed, Stream::Data, {3});
  Eigen::Matrix3d g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(g);
  const Eigen::Matrix3d rot = qr.householderQ();
  const Eigen::Vector3d shift(rng.normal(), rng.normal(), rng.normal());
  PlaneData out;
  out.ground_truth.resize(n, 2);
  out.data.points.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    const double u = width * rng.uniform();
    const double v = height * rng.uniform();
    out.ground_truth.row(i) << u, v;
    const Eigen::Vector3d p = rot.col(0) * u + rot.col(1) * v + shift;
    out.data.points.row(i) = p.transpose();
  }
  return out;
}

PointSet gen_two_clusters(int n_per_cluster, double separation, double sd, std::uint64_t seed) {
  if (n_per_cluster < 1) throw ValidationError("two clusters need n_per_cluster >= 1");
  CounterRng rng(seed, Stream::Data, {4});
  PointSet out;
  out.points.resize(2 * n_per_cluster, 3);
  out.labels.resize(static_cast<std::size_t>(2 * n_per_cluster));
  for (int i = 0; i < 2 * n_per_cluster; ++i) {
    const int label = i < n_per_cluster ? 0 : 1;
    out.labels[static_cast<std::size_t>(i)] = label;
    out.points.row(i) << sd * rng.normal() + label * separation, sd * rng.normal(),
        sd * rng.normal();
  }
  return out;
}

}  // namespace isogplvm
