#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sibp/types.hpp"

namespace sibp {

// ψ(x) for x > 0: upward recurrence to x ≥ 6 then the asymptotic series.
double digamma(double x);

double log_sum_exp(std::span<const double> values);

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// E[π_k] = Π_{t≤k} τ_t1 / (τ_t1 + τ_t2). Throws on a non-positive entry.
std::vector<double> expected_pi(const MatrixD& tau);

}  // namespace sibp
