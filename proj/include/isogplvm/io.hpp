#pragma once

#include "isogplvm/dissimilarity.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace isogplvm {

// Comma-separated numeric CSV. A first row that does not parse as numbers is
// treated as a header; every other row must have the same column count.
Eigen::MatrixXd load_csv_matrix(const std::filesystem::path& path,
                                std::vector<std::string>* header = nullptr);

// Writes with round-trip precision (%.17g).
void save_csv_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path,
                     const std::vector<std::string>& header = {});

// Points CSV; labels come from the sidecar JSON (same stem, .json) if present.
PointSet load_csv_points(const std::filesystem::path& path);
DissimilarityMatrix load_csv_distances(const std::filesystem::path& path,
                                       double symmetry_tol = 1e-9);

void save_points(const PointSet& ps, const std::filesystem::path& path);
// Flattened row-major rows plus sidecar {kind, height, width, labels}.
void save_images(const ImageStack& imgs, const std::filesystem::path& path);
ImageStack load_images(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

// Either a point set or an image stack, decided by the sidecar's "kind".
struct Dataset {
  bool is_images = false;
  PointSet points;
  ImageStack images;

  const std::vector<int>& labels() const { return is_images ? images.labels : points.labels; }
};
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace isogplvm
