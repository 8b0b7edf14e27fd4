#pragma once

#include "isogplvm/dissimilarity.hpp"
#include "isogplvm/linalg.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace isogplvm {

// Classical scaling: top-q eigenpairs of -1/2 H D^2 H, negative eigenvalues
// truncated to zero, columns by descending eigenvalue. Each column's sign is
// fixed so its largest-magnitude entry is positive.
MatrixXd classical_mds(const DissimilarityMatrix& d, int q);
// Same on a raw symmetric distance matrix (no validation beyond shape).
MatrixXd classical_mds(const MatrixXd& d, int q);

struct IsomapResult {
  MatrixXd embedding;        // |kept| x q
  std::vector<int> kept;     // vertices of the largest component, ascending
  std::vector<int> dropped;  // everything else
};

// eps-graph -> largest component -> geodesic distances -> classical MDS.
IsomapResult isomap(const DissimilarityMatrix& d, double eps, int q, int threads = 1);

// IsoMap over all N points: unreachable geodesic entries are replaced by the
// direct dissimilarity before classical scaling.
MatrixXd isomap_initialization(const DissimilarityMatrix& d, double eps, int q, int threads = 1);

double stress(const DissimilarityMatrix& d, const MatrixXd& z);

struct ProcrustesResult {
  MatrixXd aligned;
  MatrixXd rotation;
  VectorXd translation;
  double scale = 1.0;
};

// Orthogonal (optionally scaled) alignment of x onto target, both N x k.
ProcrustesResult procrustes(const MatrixXd& x, const MatrixXd& target, bool with_scaling);

// Upper-triangle Euclidean distances of the rows, in (i < j) order.
std::vector<double> pairwise_distances(const MatrixXd& z);

double pearson(std::span<const double> a, std::span<const double> b);
// Pearson on average ranks.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace isogplvm
