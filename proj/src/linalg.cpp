#include "isogplvm/linalg.hpp"

#include "isogplvm/errors.hpp"
#include "isogplvm/rng.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace isogplvm {

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double x, y, r2;
  do {
    x = 2.0 * uniform() - 1.0;
    y = 2.0 * uniform() - 1.0;
    r2 = x * x + y * y;
  } while (r2 >= 1.0 || r2 == 0.0);
  const double f = std::sqrt(-2.0 * std::log(r2) / r2);
  spare_ = y * f;
  has_spare_ = true;
  return x * f;
}

CholeskyResult robust_cholesky(const MatrixXd& a, double base_jitter, double max_jitter) {
  const auto n = a.rows();
  double jitter = base_jitter;
  while (true) {
    MatrixXd shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      MatrixXd lower = llt.matrixL();
      bool ok = lower.allFinite();
      for (Eigen::Index i = 0; ok && i < n; ++i) ok = lower(i, i) > 0.0;
      if (ok) return {std::move(lower), jitter};
    }
    if (jitter >= max_jitter) break;
    jitter = std::min(jitter * 10.0, max_jitter);
  }
  throw NumericalError("Cholesky factorization failed after jitter escalation to " +
                       std::to_string(jitter));
}

MatrixXd cholesky_backward(const MatrixXd& lower, const MatrixXd& d_lower) {
  // Murray (2016): A_bar = L^{-T} Phi(L^T L_bar) L^{-1}, symmetrized.
  MatrixXd p = lower.transpose() * d_lower.triangularView<Eigen::Lower>();
  p = p.triangularView<Eigen::Lower>();
  p.diagonal() *= 0.5;
  const auto tri = lower.triangularView<Eigen::Lower>();
  MatrixXd x = tri.transpose().solve(p);                            // L^{-T} P
  x = tri.transpose().solve(x.transpose()).transpose();             // ... L^{-1}
  return 0.5 * (x + x.transpose());
}

MatrixXd cholesky_solve(const MatrixXd& lower, const MatrixXd& b) {
  const auto tri = lower.triangularView<Eigen::Lower>();
  MatrixXd y = tri.solve(b);
  return tri.transpose().solve(y);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const auto half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

void parallel_blocks(std::size_t n_blocks, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n_blocks, threads > 1 ? static_cast<std::size_t>(threads) : 1);
  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t b = next++; b < n_blocks; b = next++) {
      try {
        fn(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace isogplvm
