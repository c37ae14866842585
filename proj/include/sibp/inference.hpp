#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sibp/config.hpp"
#include "sibp/dataset.hpp"
#include "sibp/types.hpp"

namespace sibp {

// Multinomial lower bound on E[log(1 − Π_{t≤k} v_t)] under q(v_t) = Beta(τ_t1, τ_t2).
// Row k of `q` is the optimal auxiliary distribution over sticks 0..k;
// `neg_log_terms[k]` is the resulting bound.
struct StickBoundCache {
  MatrixD q;                         // K_max × K_max, lower triangular
  std::vector<double> neg_log_terms; // K_max

  static StickBoundCache build(const MatrixD& tau);
};

struct StickBound {
  std::vector<double> q_row; // over sticks 0..k
  double bound = 0.0;
};

// Bound for factor index k (0-based; covers sticks 0..k).
StickBound stick_bound(const MatrixD& tau, std::size_t k);

struct IterationRecord {
  double mean_abs_delta_nu = 0.0;
  double seconds = 0.0;
};

struct FitResult {
  AppearanceModel model;
  std::vector<BagPosterior> posteriors;
  CorrelationMatrix correlation;
  std::vector<IterationRecord> trace;
};

struct ExecutionOptions {
  int threads = 1;
  // When false the MRF adjustment is never evaluated (η′ = η). Used to check
  // that β = ρ = 0 reduces to the plain weakly supervised model.
  bool mrf_enabled = true;
};

// ---- individual update steps --------------------------------------------

// Gauss–Seidel sweep over factors, ascending. `model` holds φ and Φ on entry
// and is updated in place.
void update_appearance(std::span<const Bag> bags, std::span<const BagPosterior> posteriors,
                       const ModelConfig& config, AppearanceModel& model, const ExecutionOptions& exec = {});

// Stick-breaking update for one bag given the bound cache for its current τ.
void update_stick(BagPosterior& posterior, const StickBoundCache& cache, const ModelConfig& config);

// Per-factor prior logit: stick term minus the bound on E[log(1 − π_k)].
std::vector<double> prior_logits(const MatrixD& tau, const StickBoundCache& cache, PriorForm form);

// η for every (j, k) from the current ν, τ and appearance (no MRF).
MatrixD compute_logits(const Bag& bag, const BagPosterior& posterior, const AppearanceModel& model,
                       const StickBoundCache& cache, const ModelConfig& config);

// η′ = η + β Σ_{m∈N(j)} msg_mk + ρ Σ_{n≠k} M_kn msg_jn with msg chosen by config.messages.
MatrixD apply_mrf(const MatrixD& eta, const BagPosterior& posterior, const CorrelationMatrix& correlation,
                  std::span<const Edge> edges, const ModelConfig& config);

// ν_jk = L_k σ(η′_jk), η′ clipped to [−30, 30]; exactly 0 where L_k = 0.
void update_nu(const MatrixD& eta_prime, const WeakLabels& labels, MatrixD& nu);

// First iteration: M = Σ_i LᵀL. Afterwards: M = Σ_i Σ_j ν_jᵀ ν_j. Then zero
// diagonal, symmetrize and scale so the largest entry is 1.
CorrelationMatrix update_correlation(std::span<const BagPosterior> posteriors, std::span<const WeakLabels> labels,
                                     bool first_iteration);

// ---- drivers --------------------------------------------------------------

// Initial posterior: ν = L(0.5 + U(−0.01, 0.01)), τ = (α, 1).
BagPosterior init_posterior(const Bag& bag, const ModelConfig& config, std::uint64_t stream);

FitResult fit(const Dataset& data, const ModelConfig& config, const ExecutionOptions& exec = {});

// Test-time inference on one bag: appearance and correlation frozen, all
// labels forced to 1. `stream` selects the initialization noise stream.
BagPosterior infer_test(const Bag& bag, const AppearanceModel& model, const CorrelationMatrix& correlation,
                        const ModelConfig& config, std::uint64_t stream = 0);

// infer_test over many bags, parallel across bags; bag i uses stream i.
std::vector<BagPosterior> infer_batch(std::span<const Bag> bags, const AppearanceModel& model,
                                      const CorrelationMatrix& correlation, const ModelConfig& config,
                                      const ExecutionOptions& exec = {});

enum class TestLabelSource { all_ones, provided };

struct TransductiveResult {
  FitResult fit;                           // over train ++ test
  std::vector<BagPosterior> test_posteriors;
};

// Fits over the union of training and test bags. With `provided`, each test
// bag keeps its own labels; with `all_ones` every factor is available.
TransductiveResult fit_transductive(const Dataset& train, std::span<const Bag> test_bags, TestLabelSource source,
                                    const ModelConfig& config, const ExecutionOptions& exec = {});

}  // namespace sibp
