#include "sibp/tasks.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "sibp/error.hpp"
#include "sibp/math.hpp"

namespace sibp {
namespace {

void check_layout(const BagPosterior& posterior, const ModelConfig& config) {
  require(posterior.nu.cols() == static_cast<std::size_t>(config.k_max()), ErrorCode::dimension_mismatch,
          "posterior factor count does not match the config");
}

std::size_t locate(const MatrixD& nu, int factor, const std::optional<std::vector<bool>>& mask) {
  std::size_t best = 0;
  double best_score = -1.0;
  bool found = false;
  for (std::size_t j = 0; j < nu.rows(); ++j) {
    if (mask && !(*mask)[j]) continue;
    if (!found || nu(j, factor) > best_score) {
      best = j;
      best_score = nu(j, factor);
      found = true;
    }
  }
  require(found, ErrorCode::invalid_argument, "no instance available to locate the object");
  return best;
}

std::vector<ScoredFactor> rank_attributes(const MatrixD& nu, std::size_t instance, const ModelConfig& config,
                                          std::size_t top) {
  std::vector<ScoredFactor> attrs;
  for (int k = config.k_objects; k < config.k_annotated(); ++k) attrs.push_back({k, nu(instance, k)});
  std::stable_sort(attrs.begin(), attrs.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  if (attrs.size() > top) attrs.resize(top);
  return attrs;
}

}  // namespace

ObjectRanking parse_object_ranking(const std::string& name) {
  if (name == "max-nu") return ObjectRanking::max_nu;
  if (name == "expected-pi") return ObjectRanking::expected_pi;
  fail(ErrorCode::invalid_argument, "unknown object ranking '" + name + "' (expected max-nu or expected-pi)");
}

std::string to_string(ObjectRanking r) { return r == ObjectRanking::max_nu ? "max-nu" : "expected-pi"; }

std::vector<Annotation> free_annotation(const BagPosterior& posterior, const ModelConfig& config,
                                        std::size_t top_objects, std::size_t top_attributes, ObjectRanking ranking) {
  check_layout(posterior, config);
  require(top_objects <= static_cast<std::size_t>(config.k_objects), ErrorCode::invalid_argument,
          "top_objects exceeds the number of object factors");
  std::vector<double> pi;
  if (ranking == ObjectRanking::expected_pi) {
    pi = expected_pi(posterior.tau);
  } else {
    pi.assign(static_cast<std::size_t>(config.k_objects), 0.0);
    for (std::size_t j = 0; j < posterior.nu.rows(); ++j) {
      for (std::size_t k = 0; k < pi.size(); ++k) pi[k] = std::max(pi[k], posterior.nu(j, k));
    }
  }
  std::vector<int> order(static_cast<std::size_t>(config.k_objects));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pi[a] > pi[b]; });

  std::vector<Annotation> out;
  for (std::size_t r = 0; r < top_objects; ++r) {
    Annotation a;
    a.object = order[r];
    a.object_score = pi[order[r]];
    a.object_instance = locate(posterior.nu, a.object, std::nullopt);
    a.attributes = rank_attributes(posterior.nu, a.object_instance, config, top_attributes);
    out.push_back(std::move(a));
  }
  return out;
}

Annotation annotate_given_object(const BagPosterior& posterior, const ModelConfig& config, int object,
                                 std::size_t top_attributes, const std::optional<std::vector<bool>>& instance_mask) {
  check_layout(posterior, config);
  require(object >= 0 && object < config.k_objects, ErrorCode::invalid_argument,
          "object index " + std::to_string(object) + " is not an object factor");
  if (instance_mask) {
    require(instance_mask->size() == posterior.nu.rows(), ErrorCode::dimension_mismatch,
            "instance mask length does not match the bag");
  }
  Annotation a;
  a.object = object;
  a.object_instance = locate(posterior.nu, object, instance_mask);
  a.object_score = posterior.nu(a.object_instance, object);
  a.attributes = rank_attributes(posterior.nu, a.object_instance, config, top_attributes);
  return a;
}

std::vector<QueryHit> rank_query(std::span<const BagPosterior> posteriors, std::span<const std::string> bag_ids,
                                 const Query& query, const ModelConfig& config) {
  require(bag_ids.size() == posteriors.size(), ErrorCode::invalid_argument, "one bag id per posterior required");
  require(query.object >= 0 && query.object < config.k_objects, ErrorCode::invalid_argument,
          "query object " + std::to_string(query.object) + " is not an object factor");
  for (int a : query.attributes) {
    require(a >= config.k_objects && a < config.k_annotated(), ErrorCode::invalid_argument,
            "query attribute " + std::to_string(a) + " is not an attribute factor");
  }
  std::vector<QueryHit> hits;
  hits.reserve(posteriors.size());
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    check_layout(posteriors[i], config);
    const MatrixD& nu = posteriors[i].nu;
    QueryHit hit{i, bag_ids[i], 0, -1.0};
    for (std::size_t j = 0; j < nu.rows(); ++j) {
      double score = nu(j, query.object);
      for (int a : query.attributes) score *= nu(j, a);
      if (score > hit.score) {
        hit.score = score;
        hit.instance = j;
      }
    }
    hit.score = std::max(hit.score, 0.0);
    hits.push_back(std::move(hit));
  }
  std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return hits;
}

SegmentationMap segment(const BagPosterior& posterior, const ModelConfig& config) {
  check_layout(posterior, config);
  require(config.k_objects > 0, ErrorCode::invalid_argument, "segmentation needs at least one object factor");
  SegmentationMap map;
  const MatrixD& nu = posterior.nu;
  map.labels.resize(nu.rows());
  map.scores.resize(nu.rows());
  for (std::size_t j = 0; j < nu.rows(); ++j) {
    int best = 0;
    for (int k = 1; k < config.k_objects; ++k) {
      if (nu(j, k) > nu(j, best)) best = k;
    }
    map.labels[j] = best;
    map.scores[j] = nu(j, best);
  }
  return map;
}

}  // namespace sibp
