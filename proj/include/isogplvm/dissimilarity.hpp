#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace isogplvm {

// N x D coordinates with optional integer labels.
struct PointSet {
  Eigen::MatrixXd points;
  std::vector<int> labels;

  Eigen::Index size() const { return points.rows(); }
  bool has_labels() const { return !labels.empty(); }
  void validate() const;
};

// Symmetric, nonnegative, zero-diagonal N x N matrix. The invariant is
// checked on construction; the stored values are exactly symmetric.
class DissimilarityMatrix {
public:
  DissimilarityMatrix() = default;
  // Throws ValidationError (asymmetry beyond `symmetry_tol`, nonzero diagonal,
  // non-finite) or std::domain_error (negative entries).
  explicit DissimilarityMatrix(Eigen::MatrixXd values, double symmetry_tol = 1e-9);

  Eigen::Index size() const { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }
  double min_offdiagonal() const;
  double max_offdiagonal() const;

private:
  Eigen::MatrixXd values_;
};

// Grayscale images, each stored row-major as one row of `pixels`
// (N x height*width), values in [0, 1].
struct ImageStack {
  Eigen::MatrixXd pixels;
  int height = 0;
  int width = 0;
  std::vector<int> labels;

  Eigen::Index size() const { return pixels.rows(); }
  void validate() const;
};

DissimilarityMatrix euclidean_distances(const PointSet& ps);
DissimilarityMatrix euclidean_distances(const ImageStack& imgs);

// Bilinear rotation of a row-major image about its center; samples that fall
// outside the frame read as zero.
Eigen::VectorXd rotate_image(const Eigen::VectorXd& image, int height, int width, double angle);

// min over angles 2*pi*k/n_angles of ||R(x_i) - x_j||, symmetrized by taking
// the smaller of the two directions.
DissimilarityMatrix rotation_invariant_distances(const ImageStack& imgs, int n_angles = 36);

// eps for differing labels, min(2r, d_ij) otherwise. r defaults to eps / 4.
DissimilarityMatrix lexicographic_distances(const DissimilarityMatrix& base,
                                            const std::vector<int>& labels, double eps,
                                            std::optional<double> r = std::nullopt);

// Rescaling of a dissimilarity matrix by one of its own statistics over the
// off-diagonal entries. Applied before the lexicographic metric so that a
// fixed eps means the same thing across datasets.
enum class Normalization { None, Max, Median, Rms };
Normalization parse_normalization(const std::string& name);  // none|max|median|rms
DissimilarityMatrix normalize_distances(const DissimilarityMatrix& d, Normalization mode);

struct SwissRoll {
  PointSet data;
  Eigen::MatrixXd ground_truth;  // N x 2: (arc length, height)
  Eigen::VectorXd t;             // roll parameter per point
};

// Arc length of the spiral (t cos t, t sin t) from 0 to t.
double swiss_roll_arc_length(double t);

SwissRoll gen_swiss_roll(int n, double noise_sd, std::uint64_t seed);

// Rotated asymmetric glyph: frame k shows the glyph rotated by 2*pi*k/n_frames.
ImageStack gen_rotated_glyph(int n_frames, int size, std::uint64_t seed);
Eigen::VectorXd render_glyph_frame(int frame, int n_frames, int size, std::uint64_t seed);

struct PlaneData {
  PointSet data;
  Eigen::MatrixXd ground_truth;  // N x 2 in-plane coordinates
};

// Uniform points on a width x height rectangle, rigidly embedded in R^3.
PlaneData gen_plane(int n, double width, double height, std::uint64_t seed);

// Two isotropic Gaussian blobs in R^3 with centers `separation` apart;
// labels 0 / 1.
PointSet gen_two_clusters(int n_per_cluster, double separation, double sd, std::uint64_t seed);

}  // namespace isogplvm
