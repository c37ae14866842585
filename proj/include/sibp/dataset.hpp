#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sibp/config.hpp"
#include "sibp/types.hpp"

namespace sibp {

// Bags plus the annotated vocabulary (objects first, then attributes).
struct Dataset {
  std::vector<std::string> objects;
  std::vector<std::string> attributes;
  std::vector<Bag> bags;
};

// Result of a successful validation pass over a list of bags.
struct DatasetInfo {
  std::size_t num_bags = 0;    // M
  std::size_t feature_dim = 0; // D
  std::size_t k_max = 0;
};

// Checks uniform D, edge validity, finite features and label lengths.
// Errors name the offending bag id.
DatasetInfo validate_dataset(std::span<const Bag> bags, const ModelConfig& config);

// Additionally checks that the vocabulary sizes agree with K_o and K_a.
DatasetInfo validate_dataset(const Dataset& data, const ModelConfig& config);

// Checks a single bag against an expected feature dim and factor count.
void validate_bag(const Bag& bag, std::size_t feature_dim, std::size_t k_max);

}  // namespace sibp
