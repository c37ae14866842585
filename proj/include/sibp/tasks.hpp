#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sibp/config.hpp"
#include "sibp/types.hpp"

namespace sibp {

struct ScoredFactor {
  int factor = 0;
  double score = 0.0;
  bool operator==(const ScoredFactor&) const = default;
};

struct Annotation {
  int object = 0;
  double object_score = 0.0;  // ranking score for free annotation, ν_{j*k} when the object is given
  std::size_t object_instance = 0;
  std::vector<ScoredFactor> attributes;  // descending score
};

struct SegmentationMap {
  std::vector<int> labels;     // object index per instance
  std::vector<double> scores;  // winning ν
};

struct Query {
  int object = 0;
  std::vector<int> attributes;
};

struct QueryHit {
  std::size_t bag = 0;  // index into the posterior list
  std::string bag_id;
  std::size_t instance = 0;
  double score = 0.0;
};

// How free annotation orders the object factors of a bag.
//   max_nu:      max_j ν_jk, the confidence of the best instance
//   expected_pi: E[π_k] under q(v). Stick-breaking makes this decrease with k
//                whatever the bag contains, so it mostly reproduces index order.
enum class ObjectRanking { max_nu, expected_pi };
ObjectRanking parse_object_ranking(const std::string& name);
std::string to_string(ObjectRanking r);

// Ranks objects (k < K_o), locates each at j* = argmax_j ν_jk, and ranks the
// attribute factors of that instance. Throws if top_objects > K_o.
std::vector<Annotation> free_annotation(const BagPosterior& posterior, const ModelConfig& config,
                                        std::size_t top_objects, std::size_t top_attributes,
                                        ObjectRanking ranking = ObjectRanking::max_nu);

// Attributes of a named object. `instance_mask`, when given, restricts the
// search for j* to the flagged instances.
Annotation annotate_given_object(const BagPosterior& posterior, const ModelConfig& config, int object,
                                 std::size_t top_attributes,
                                 const std::optional<std::vector<bool>>& instance_mask = std::nullopt);

// Scores each bag by max_j Π_{f ∈ query} ν_jf and sorts descending (stable).
std::vector<QueryHit> rank_query(std::span<const BagPosterior> posteriors, std::span<const std::string> bag_ids,
                                 const Query& query, const ModelConfig& config);

// Per instance, argmax over object factors (lowest index wins ties).
SegmentationMap segment(const BagPosterior& posterior, const ModelConfig& config);

}  // namespace sibp
