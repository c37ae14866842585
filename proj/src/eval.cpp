#include "sibp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sibp/error.hpp"

namespace sibp {

double ap_at_t(std::span<const std::vector<Annotation>> predictions, std::span<const AnnotationTruth> truth,
               std::size_t t) {
  require(t >= 1, ErrorCode::invalid_argument, "t must be at least 1");
  require(!predictions.empty(), ErrorCode::invalid_argument, "empty prediction set");
  require(predictions.size() == truth.size(), ErrorCode::dimension_mismatch,
          "predictions and truth cover different numbers of bags");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].empty()) continue;
    const Annotation& top = predictions[i].front();
    std::set<int> relevant;
    bool object_found = false;
    for (const ObjectAttributes& oa : truth[i]) {
      if (oa.object != top.object) continue;
      object_found = true;
      relevant.insert(oa.attributes.begin(), oa.attributes.end());
    }
    if (!object_found) continue;
    std::size_t hits = 0;
    double precision_sum = 0.0;
    const std::size_t depth = std::min(t, top.attributes.size());
    for (std::size_t r = 0; r < depth; ++r) {
      if (relevant.count(top.attributes[r].factor)) {
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    if (hits > 0) total += precision_sum / static_cast<double>(hits);
  }
  return total / static_cast<double>(predictions.size());
}

MapResult map_pr(const MatrixD& scores, const Matrix<unsigned char>& truth) {
  require(scores.rows() == truth.rows() && scores.cols() == truth.cols(), ErrorCode::dimension_mismatch,
          "score and truth matrices differ in shape");
  MapResult out;
  double sum = 0.0;
  std::size_t evaluated = 0;
  std::vector<std::size_t> order(scores.rows());
  for (std::size_t a = 0; a < scores.cols(); ++a) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return scores(x, a) > scores(y, a); });
    std::size_t positives = 0;
    for (std::size_t r = 0; r < order.size(); ++r) positives += truth(order[r], a) ? 1 : 0;
    if (positives == 0) {
      out.skipped.push_back(static_cast<int>(a));
      continue;
    }
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (!truth(order[r], a)) continue;
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
    sum += ap / static_cast<double>(positives);
    ++evaluated;
  }
  out.map = evaluated > 0 ? sum / static_cast<double>(evaluated) : 0.0;
  return out;
}

double average_recall(std::span<const std::string> ranking, const std::set<std::string>& relevant) {
  require(!ranking.empty(), ErrorCode::invalid_argument, "empty ranking");
  const std::size_t n = ranking.size();
  std::vector<double> precision(n), recall(n);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n; ++r) {
    hits += relevant.count(ranking[r]);
    precision[r] = static_cast<double>(hits) / static_cast<double>(r + 1);
    recall[r] = static_cast<double>(hits) / static_cast<double>(relevant.size());
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double best = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (precision[s] >= precision[r]) best = std::max(best, recall[s]);
    }
    sum += best;
  }
  return sum / static_cast<double>(n);
}

MarResult mar_query(std::span<const std::vector<std::string>> rankings,
                    std::span<const std::set<std::string>> relevant) {
  require(rankings.size() == relevant.size(), ErrorCode::dimension_mismatch,
          "rankings and relevance sets differ in count");
  MarResult out;
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    if (relevant[q].empty()) {
      out.skipped.push_back(q);
      continue;
    }
    sum += average_recall(rankings[q], relevant[q]);
    ++evaluated;
  }
  out.mar = evaluated > 0 ? sum / static_cast<double>(evaluated) : 0.0;
  return out;
}

SegmentationScores segmentation_metrics(std::span<const std::vector<int>> predicted,
                                        std::span<const std::vector<int>> truth,
                                        std::span<const std::vector<double>> pixel_counts, int num_classes) {
  require(predicted.size() == truth.size(), ErrorCode::dimension_mismatch,
          "predicted and truth maps cover different numbers of bags");
  require(pixel_counts.empty() || pixel_counts.size() == truth.size(), ErrorCode::dimension_mismatch,
          "pixel counts must be given for every bag");
  require(num_classes > 0, ErrorCode::invalid_argument, "num_classes must be positive");
  const auto classes = static_cast<std::size_t>(num_classes);
  std::vector<double> tp(classes, 0.0), fp(classes, 0.0), fn(classes, 0.0), support(classes, 0.0);
  double correct = 0.0, counted = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(predicted[i].size() == truth[i].size(), ErrorCode::dimension_mismatch,
            "bag " + std::to_string(i) + ": predicted and truth maps differ in length");
    if (!pixel_counts.empty()) {
      require(pixel_counts[i].size() == truth[i].size(), ErrorCode::dimension_mismatch,
              "bag " + std::to_string(i) + ": pixel counts differ in length");
    }
    for (std::size_t j = 0; j < truth[i].size(); ++j) {
      const int t = truth[i][j];
      const int p = predicted[i][j];
      if (t == kVoidLabel) continue;
      require(t >= 0 && t < num_classes && p >= 0 && p < num_classes, ErrorCode::invalid_argument,
              "segmentation label out of range in bag " + std::to_string(i));
      const double w = pixel_counts.empty() ? 1.0 : pixel_counts[i][j];
      require(w > 0, ErrorCode::invalid_argument, "pixel counts must be positive");
      counted += w;
      support[t] += w;
      if (p == t) {
        correct += w;
        tp[t] += w;
      } else {
        fp[p] += w;
        fn[t] += w;
      }
    }
  }
  SegmentationScores out;
  out.class_iou.assign(classes, std::numeric_limits<double>::quiet_NaN());
  double iou_sum = 0.0, acc_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (support[c] <= 0) continue;
    out.class_iou[c] = tp[c] / (tp[c] + fp[c] + fn[c]);
    iou_sum += out.class_iou[c];
    acc_sum += tp[c] / support[c];
    ++present;
  }
  if (present > 0) {
    out.mean_iou = iou_sum / static_cast<double>(present);
    out.class_accuracy = acc_sum / static_cast<double>(present);
  }
  out.pixel_accuracy = counted > 0 ? correct / counted : 0.0;
  return out;
}

}  // namespace sibp
