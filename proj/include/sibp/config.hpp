#pragma once

#include <cstdint>
#include <string>

namespace sibp {

// How neighbour and cross-factor messages enter the MRF-adjusted logit.
enum class MessageKind {
  posterior_mean,  // messages are the current ν of neighbours / other factors
  raw_logit,       // messages are the most recent η of neighbours / other factors
};

// Form of the stick-breaking prior term in the per-instance logit.
enum class PriorForm {
  digamma_ratio,   // Σ_{t≤k} ψ(τ_t1) − ψ(τ_t2)
  expected_log_pi, // Σ_{t≤k} ψ(τ_t1) − ψ(τ_t1 + τ_t2), i.e. E[log π_k]
};

std::string to_string(MessageKind kind);
std::string to_string(PriorForm form);
MessageKind parse_message_kind(const std::string& s);
PriorForm parse_prior_form(const std::string& s);

// Hyperparameters and run controls. Factor layout is
// [objects 0..k_objects) ++ [attributes ..k_objects+k_attributes) ++ [extras].
struct ModelConfig {
  double alpha = 2.0;    // α, IBP sparsity prior
  double sigma_a = 1.0;  // σ_A, appearance prior std
  double sigma = 0.5;    // σ, observation noise std
  double beta = 1.0;     // β, spatial MRF coupling
  double rho = 0.1;      // ρ, factorial MRF weight
  int k_objects = 0;     // K_o
  int k_attributes = 0;  // K_a
  int k_extra = 20;      // K_bg
  int max_iters = 1500;
  double tol = 1e-4;  // threshold on mean |Δν|
  std::uint64_t seed = 0;
  MessageKind messages = MessageKind::posterior_mean;
  PriorForm prior = PriorForm::expected_log_pi;

  int k_annotated() const { return k_objects + k_attributes; }
  int k_max() const { return k_objects + k_attributes + k_extra; }

  // Throws Error(invalid_argument) naming the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace sibp
