#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>

namespace isogplvm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct CholeskyResult {
  MatrixXd lower;
  double jitter = 0.0;  // diagonal shift actually applied
};

// Cholesky of a + jitter * I. The jitter starts at `base_jitter` and grows by
// 10x up to `max_jitter`; NumericalError if the factorization still fails.
CholeskyResult robust_cholesky(const MatrixXd& a, double base_jitter, double max_jitter = 1e-4);

// Reverse-mode adjoint of A = L L^T. Given dF/dL (lower triangle used),
// returns the symmetric dF/dA.
MatrixXd cholesky_backward(const MatrixXd& lower, const MatrixXd& d_lower);

// Solves L L^T x = b for a lower Cholesky factor.
MatrixXd cholesky_solve(const MatrixXd& lower, const MatrixXd& b);

// Recursive pairwise summation in index order.
double pairwise_sum(std::span<const double> values);

// Runs fn(block) for block in [0, n_blocks) on up to `threads` workers.
// Each block is processed exactly once; callers store per-block results and
// reduce them in block order, which keeps results independent of `threads`.
void parallel_blocks(std::size_t n_blocks, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace isogplvm
