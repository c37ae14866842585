#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include "sibp/tasks.hpp"

namespace sibp {

// One annotated object in a bag together with the attributes it carries.
struct ObjectAttributes {
  int object = 0;
  std::set<int> attributes;
};

using AnnotationTruth = std::vector<ObjectAttributes>;  // per bag

// Label for instances that belong to no evaluated class.
inline constexpr int kVoidLabel = -1;

// AP@t. For each bag only the first (most confident) annotation is scored:
// a wrong object scores 0; otherwise the first t attributes form a ranked
// list whose AP is the mean precision at the relevant ranks (0 when none is
// relevant). The result is the mean over bags.
double ap_at_t(std::span<const std::vector<Annotation>> predictions, std::span<const AnnotationTruth> truth,
               std::size_t t);

struct MapResult {
  double map = 0.0;
  std::vector<int> skipped;  // attributes with no positives
};

// Mean over attributes of the non-interpolated AP of ranking all items by
// score. `scores` and `truth` are items × attributes.
MapResult map_pr(const MatrixD& scores, const Matrix<unsigned char>& truth);

struct MarResult {
  double mar = 0.0;
  std::vector<std::size_t> skipped;  // queries with an empty relevance set
};

// Mean average recall. For a ranked list with precision P_r and recall R_r at
// each cut-off r, the query score is the mean over r of the interpolated
// recall max{R_s : P_s ≥ P_r}.
MarResult mar_query(std::span<const std::vector<std::string>> rankings,
                    std::span<const std::set<std::string>> relevant);

// Single-query average recall used by mar_query.
double average_recall(std::span<const std::string> ranking, const std::set<std::string>& relevant);

struct SegmentationScores {
  double mean_iou = 0.0;
  double pixel_accuracy = 0.0;
  double class_accuracy = 0.0;
  std::vector<double> class_iou;  // NaN for classes absent from truth
};

// Instance labels are lifted to pixels through per-instance pixel counts
// (empty `pixel_counts` means one pixel per instance). Truth instances
// labelled kVoidLabel are ignored; classes absent from truth are excluded
// from the class averages.
SegmentationScores segmentation_metrics(std::span<const std::vector<int>> predicted,
                                        std::span<const std::vector<int>> truth,
                                        std::span<const std::vector<double>> pixel_counts, int num_classes);

}  // namespace sibp
