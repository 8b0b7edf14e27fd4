#include "isogplvm/nakagami.hpp"

#include "isogplvm/errors.hpp"
#include "isogplvm/linalg.hpp"
#include "isogplvm/special.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace isogplvm {

void NakagamiParams::validate() const {
  if (!std::isfinite(m) || !std::isfinite(omega) || m < kNakagamiMinShape || !(omega > 0.0))
    throw std::domain_error("invalid Nakagami parameters m=" + std::to_string(m) +
                            " omega=" + std::to_string(omega));
}

double log_pdf(double s, const NakagamiParams& p) {
  if (!(s > 0.0)) throw std::domain_error("Nakagami log_pdf requires s > 0");
  p.validate();
  const double m = p.m;
  return std::log(2.0) + m * std::log(m) - special::log_gamma(m) - m * std::log(p.omega) +
         (2.0 * m - 1.0) * std::log(s) - (m / p.omega) * s * s;
}

double cdf(double s, const NakagamiParams& p) {
  if (!(s >= 0.0)) throw std::domain_error("Nakagami cdf requires s >= 0");
  p.validate();
  return special::reg_lower_gamma(p.m, p.m / p.omega * s * s);
}

double log_survival(double s, const NakagamiParams& p) {
  if (!(s >= 0.0)) throw std::domain_error("Nakagami log_survival requires s >= 0");
  p.validate();
  return special::log_reg_upper_gamma(p.m, p.m / p.omega * s * s);
}

NakagamiParams estimate_params(double mean_sq, double var_sq) {
  if (!(mean_sq > 0.0) || !(var_sq > 0.0))
    throw ValidationError("estimate_params needs positive second moment and variance");
  const double m = std::clamp(mean_sq * mean_sq / var_sq, kNakagamiMinShape, kNakagamiMaxShape);
  return {m, mean_sq};
}

std::vector<double> sample(const NakagamiParams& p, std::size_t n, std::uint64_t seed) {
  p.validate();
  std::mt19937_64 gen(seed);
  std::gamma_distribution<double> gamma(p.m, p.omega / p.m);
  std::vector<double> out(n);
  for (auto& v : out) {
    double g = 0.0;
    while (!(g > 0.0)) g = gamma(gen);
    v = std::sqrt(g);
  }
  return out;
}

TermValue neighbor_term(double e, const NakagamiParams& p) {
  TermValue t;
  t.value = log_pdf(e, p);
  const double m = p.m;
  const double w = p.omega;
  t.d_m = std::log(m) + 1.0 - special::digamma(m) - std::log(w) + 2.0 * std::log(e) - e * e / w;
  t.d_omega = -m / w + m * e * e / (w * w);
  return t;
}

TermValue censored_term(double eps, const NakagamiParams& p) {
  p.validate();
  TermValue t;
  const double m = p.m;
  const double w = p.omega;
  const double x = m * eps * eps / w;
  t.value = special::log_reg_upper_gamma(m, x);
  const double dx = special::log_reg_upper_gamma_dx(m, x);
  t.d_omega = dx * (-x / w);
  t.d_m = special::log_reg_upper_gamma_da(m, x) + dx * (eps * eps / w);
  return t;
}

double censored_log_likelihood(const DissimilarityMatrix& e,
                               const std::map<IndexPair, NakagamiParams>& params, double eps,
                               std::span<const IndexPair> pairs) {
  std::vector<IndexPair> sorted;
  sorted.reserve(pairs.size());
  for (auto [i, j] : pairs) sorted.emplace_back(std::min(i, j), std::max(i, j));
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> terms;
  terms.reserve(sorted.size());
  for (const auto& pr : sorted) {
    auto it = params.find(pr);
    if (it == params.end()) it = params.find({pr.second, pr.first});
    if (it == params.end())
      throw ValidationError("missing Nakagami parameters for pair (" + std::to_string(pr.first) +
                            ", " + std::to_string(pr.second) + ")");
    const double eij = e(pr.first, pr.second);
    terms.push_back(eij < eps ? neighbor_term(eij, it->second).value
                              : censored_term(eps, it->second).value);
  }
  return pairwise_sum(terms);
}

}  // namespace isogplvm
