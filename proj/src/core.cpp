#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sibp/config.hpp"
#include "sibp/error.hpp"
#include "sibp/math.hpp"
#include "sibp/types.hpp"

namespace sibp {

std::string to_string(MessageKind kind) {
  return kind == MessageKind::posterior_mean ? "posterior-mean" : "raw-logit";
}

std::string to_string(PriorForm form) {
  return form == PriorForm::digamma_ratio ? "digamma-ratio" : "expected-log-pi";
}

MessageKind parse_message_kind(const std::string& s) {
  if (s == "posterior-mean") return MessageKind::posterior_mean;
  if (s == "raw-logit") return MessageKind::raw_logit;
  fail(ErrorCode::invalid_argument, "unknown message kind: " + s);
}

PriorForm parse_prior_form(const std::string& s) {
  if (s == "digamma-ratio") return PriorForm::digamma_ratio;
  if (s == "expected-log-pi") return PriorForm::expected_log_pi;
  fail(ErrorCode::invalid_argument, "unknown prior form: " + s);
}

void ModelConfig::validate() const {
  auto positive = [](double v, const char* name) {
    require(std::isfinite(v) && v > 0, ErrorCode::invalid_argument,
            std::string(name) + " must be a positive real");
  };
  auto non_negative = [](double v, const char* name) {
    require(std::isfinite(v) && v >= 0, ErrorCode::invalid_argument,
            std::string(name) + " must be non-negative");
  };
  positive(alpha, "alpha");
  positive(sigma_a, "sigma_a");
  positive(sigma, "sigma");
  non_negative(beta, "beta");
  non_negative(rho, "rho");
  require(!std::isnan(tol) && tol >= 0, ErrorCode::invalid_argument, "tol must be non-negative");
  require(k_objects >= 0 && k_attributes >= 0 && k_extra >= 0, ErrorCode::invalid_argument,
          "factor counts must be non-negative");
  require(k_max() > 0, ErrorCode::invalid_argument, "k_max must be positive");
  require(max_iters >= 1, ErrorCode::invalid_argument, "max_iters must be at least 1");
}

WeakLabels::WeakLabels(std::vector<unsigned char> annotated, int k_extra) : bits_(std::move(annotated)) {
  for (auto& b : bits_) b = b ? 1 : 0;
  bits_.insert(bits_.end(), static_cast<std::size_t>(std::max(k_extra, 0)), 1);
}

WeakLabels WeakLabels::all_ones(int k_max) { return WeakLabels({}, k_max); }

std::vector<std::string> make_vocab(std::vector<std::string> objects,
                                    const std::vector<std::string>& attributes, int k_extra) {
  objects.insert(objects.end(), attributes.begin(), attributes.end());
  for (int k = 0; k < k_extra; ++k) objects.push_back("bg" + std::to_string(k));
  return objects;
}

double digamma(double x) {
  require(x > 0 && std::isfinite(x), ErrorCode::invalid_argument, "digamma requires a positive argument");
  double shift = 0.0;
  while (x < 6.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // ln x − 1/2x − Σ B_2n / (2n x^2n), through B_20
  static constexpr double kCoeff[] = {1.0 / 12,          -1.0 / 120,    1.0 / 252,          -1.0 / 240,
                                      1.0 / 132,         -691.0 / 32760, 1.0 / 12,           -3617.0 / 8160,
                                      43867.0 / 14364,   -174611.0 / 6600};
  double series = 0.0;
  for (int n = 9; n >= 0; --n) series = inv2 * (kCoeff[n] + series);
  return shift + std::log(x) - 0.5 * inv - series;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double s = 0.0;
  for (double v : values) s += std::exp(v - peak);
  return peak + std::log(s);
}

std::vector<double> expected_pi(const MatrixD& tau) {
  require(tau.cols() == 2, ErrorCode::invalid_argument, "tau must have two columns");
  std::vector<double> out(tau.rows());
  double prod = 1.0;
  for (std::size_t k = 0; k < tau.rows(); ++k) {
    const double a = tau(k, 0), b = tau(k, 1);
    require(a > 0 && b > 0, ErrorCode::invalid_argument,
            "tau entries must be positive (factor " + std::to_string(k) + ")");
    prod *= a / (a + b);
    out[k] = prod;
  }
  return out;
}

}  // namespace sibp
