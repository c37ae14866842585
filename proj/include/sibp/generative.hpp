#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sibp/config.hpp"
#include "sibp/dataset.hpp"
#include "sibp/types.hpp"

namespace sibp {

struct SyntheticShape {
  std::size_t num_bags = 0;
  std::size_t instances_per_bag = 0;
  std::size_t feature_dim = 0;
  bool grid_adjacency = true;
  // Global index of the first bag. Bag k always draws from stream k and is
  // named `bag<k>`, so a later range under the same seed gives fresh bags
  // with the same appearance.
  std::size_t first_bag = 0;
};

// Either explicit annotated label vectors (one per bag, K_o + K_a bits) or a
// Bernoulli density for drawing them.
struct LabelScheme {
  std::vector<std::vector<unsigned char>> per_bag;
  double density = 0.5;

  static LabelScheme random(double density) { return {{}, density}; }
  static LabelScheme fixed(std::vector<std::vector<unsigned char>> labels) { return {std::move(labels), 0.0}; }
};

struct SyntheticDataset {
  ModelConfig config;                 // hyperparameters the data was drawn with
  std::vector<Bag> bags;
  std::vector<Matrix<unsigned char>> true_z;  // per bag, N_i × K_max
  MatrixD true_a;                     // K_max × D
  std::vector<std::vector<double>> true_pi;   // per bag, K_max
  std::size_t first_bag = 0;
};

// 4-neighbour grid over `n` instances laid out row-major on a
// ceil(sqrt(n))-wide grid.
std::vector<Edge> grid_edges(std::size_t n);

// Draws A, per-bag sticks v ~ Beta(α, 1), Z ~ Bern(π L) and X ~ N(Z A, σ² I).
SyntheticDataset sample_dataset(const ModelConfig& config, const SyntheticShape& shape,
                                const LabelScheme& labels, std::uint64_t seed);

// Re-draws every bag's features from its current true_z and true_a.
void emit_features(SyntheticDataset& data, std::uint64_t seed);

// Whenever z_k = 1, sets z_l = 1 with probability `strength` for each (k, l)
// pair, then re-emits X. An activated annotated factor l also sets the bag's
// label bit so the masking invariant keeps holding.
SyntheticDataset plant_correlation(SyntheticDataset data, const std::vector<std::pair<int, int>>& pairs,
                                   double strength, std::uint64_t seed);

// Wraps the bags with generated names `obj0..` and `attr0..`.
Dataset to_dataset(const SyntheticDataset& data);

}  // namespace sibp
