#include "sibp/dataset.hpp"

#include <cmath>
#include <string>

#include "sibp/error.hpp"

namespace sibp {

void validate_bag(const Bag& bag, std::size_t feature_dim, std::size_t k_max) {
  const std::string who = "bag '" + bag.id + "'";
  require(bag.feature_dim() == feature_dim, ErrorCode::dimension_mismatch,
          who + ": feature dim " + std::to_string(bag.feature_dim()) + ", expected " +
              std::to_string(feature_dim));
  require(bag.labels.size() == k_max, ErrorCode::dimension_mismatch,
          who + ": label length " + std::to_string(bag.labels.size()) + ", expected " + std::to_string(k_max));
  const std::size_t n = bag.num_instances();
  for (const Edge& e : bag.edges) {
    require(e.a < n && e.b < n, ErrorCode::edge_out_of_range,
            who + ": edge (" + std::to_string(e.a) + "," + std::to_string(e.b) + ") outside " +
                std::to_string(n) + " instances");
    require(e.a != e.b, ErrorCode::edge_out_of_range, who + ": self-edge at " + std::to_string(e.a));
  }
  for (float v : bag.features.data()) {
    require(std::isfinite(v), ErrorCode::format, who + ": non-finite feature value");
  }
}

DatasetInfo validate_dataset(std::span<const Bag> bags, const ModelConfig& config) {
  require(!bags.empty(), ErrorCode::empty_dataset, "dataset has no bags");
  DatasetInfo info{bags.size(), bags.front().feature_dim(), static_cast<std::size_t>(config.k_max())};
  require(info.feature_dim > 0, ErrorCode::dimension_mismatch, "bag '" + bags.front().id + "' has zero feature dim");
  for (const Bag& bag : bags) validate_bag(bag, info.feature_dim, info.k_max);
  return info;
}

DatasetInfo validate_dataset(const Dataset& data, const ModelConfig& config) {
  require(data.objects.size() == static_cast<std::size_t>(config.k_objects) &&
              data.attributes.size() == static_cast<std::size_t>(config.k_attributes),
          ErrorCode::vocab_mismatch,
          "vocabulary has " + std::to_string(data.objects.size()) + " objects and " +
              std::to_string(data.attributes.size()) + " attributes; config expects " +
              std::to_string(config.k_objects) + " and " + std::to_string(config.k_attributes));
  return validate_dataset(std::span<const Bag>(data.bags), config);
}

}  // namespace sibp
