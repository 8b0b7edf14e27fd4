#pragma once

#include "isogplvm/dissimilarity.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

namespace isogplvm {

inline constexpr double kNakagamiMinShape = 0.5;
inline constexpr double kNakagamiMaxShape = 1e4;

// Nakagami-m distribution: m is the shape (>= 1/2), omega = E[s^2].
struct NakagamiParams {
  double m = 1.0;
  double omega = 1.0;

  void validate() const;
};

double log_pdf(double s, const NakagamiParams& p);
double cdf(double s, const NakagamiParams& p);
double log_survival(double s, const NakagamiParams& p);

// Moment matching: omega = E[s^2], m = omega^2 / Var(s^2), clamped to
// [kNakagamiMinShape, kNakagamiMaxShape].
NakagamiParams estimate_params(double mean_sq, double var_sq);

// s^2 ~ Gamma(shape m, scale omega / m).
std::vector<double> sample(const NakagamiParams& p, std::size_t n, std::uint64_t seed);

// One likelihood term and its partial derivatives in (m, omega).
struct TermValue {
  double value = 0.0;
  double d_m = 0.0;
  double d_omega = 0.0;
};

// log g(e) for an observed neighbor distance.
TermValue neighbor_term(double e, const NakagamiParams& p);
// log(1 - G(eps)) for a censored pair. d_m uses a central difference in the
// incomplete-gamma shape argument.
TermValue censored_term(double eps, const NakagamiParams& p);

using IndexPair = std::pair<int, int>;

// Pairs with e_ij < eps contribute log g(e_ij); the rest contribute
// log(1 - G(eps)). Terms are reduced by pairwise summation over the pairs
// sorted by index. ValidationError if a pair has no parameters.
double censored_log_likelihood(const DissimilarityMatrix& e,
                               const std::map<IndexPair, NakagamiParams>& params, double eps,
                               std::span<const IndexPair> pairs);

}  // namespace isogplvm
