#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sibp/dataset.hpp"
#include "sibp/eval.hpp"
#include "sibp/generative.hpp"
#include "sibp/inference.hpp"
#include "sibp/tasks.hpp"

// On-disk formats. All are documented byte by byte in docs/formats.md.
namespace sibp::io {

inline constexpr int kFormatVersion = 1;

enum class Encoding { text, binary };

// Dataset directory: `manifest.txt` plus `bags.dat`.
void save_dataset(const Dataset& data, const std::filesystem::path& dir, Encoding encoding = Encoding::text);
Dataset load_dataset(const std::filesystem::path& dir, const ModelConfig* expected = nullptr);

// Model container: config snapshot, vocab, φ, Φ and M.
void save_model(const AppearanceModel& model, const CorrelationMatrix& correlation,
                const std::filesystem::path& path, Encoding encoding = Encoding::binary);
struct LoadedModel {
  AppearanceModel model;
  CorrelationMatrix correlation;
};
LoadedModel load_model(const std::filesystem::path& path);

// Per-bag τ and ν (text, round-trips exactly).
void save_posteriors(const std::vector<std::string>& bag_ids, const std::vector<BagPosterior>& posteriors,
                     const std::filesystem::path& path);
struct LoadedPosteriors {
  std::vector<std::string> bag_ids;
  std::vector<BagPosterior> posteriors;
};
LoadedPosteriors load_posteriors(const std::filesystem::path& path);

// Ground-truth sidecar written next to synthetic datasets.
struct Truth {
  std::vector<std::string> objects;
  std::vector<std::string> attributes;
  std::size_t k_max = 0;
  std::vector<std::string> bag_ids;
  std::vector<Matrix<unsigned char>> z;  // per bag, N_i × K_max
  MatrixD a;

  int factor_index(const std::string& name) const;  // -1 when unknown
  // (object, attributes) pairs co-located on some instance of bag i.
  AnnotationTruth annotation_truth(std::size_t bag) const;
  // Lowest active object per instance, kVoidLabel where none is active.
  std::vector<int> segmentation_truth(std::size_t bag) const;
  // Bags with an instance where every factor of the query is active.
  std::set<std::string> query_relevance(const Query& query) const;
};
Truth truth_from_synthetic(const SyntheticDataset& data, const Dataset& named);
void save_truth(const Truth& truth, const std::filesystem::path& path);
Truth load_truth(const std::filesystem::path& path);

void save_trace(const std::vector<IterationRecord>& trace, const std::filesystem::path& path);

// Instance-id raster: `width height` then `height` rows of `width` ids.
struct Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::size_t> ids;  // row-major
};
Raster load_raster(const std::filesystem::path& path);
void save_raster(const Raster& raster, const std::filesystem::path& path);
// Pixel count of every instance id in [0, n).
std::vector<double> raster_pixel_counts(const Raster& raster, std::size_t n);

// Fixed 20-colour palette used for segmentation images.
struct Rgb {
  int r, g, b;
};
Rgb palette_colour(int label);

// Writes `<stem>.csv` (instance,label_index,label_name,score) and, when a
// raster is given, `<stem>.ppm` as a plain P3 image.
void write_segmentation(const SegmentationMap& map, const std::vector<std::string>& vocab,
                        const std::optional<Raster>& raster, const std::filesystem::path& stem);
struct LoadedSegmentation {
  std::vector<int> labels;
  std::vector<double> scores;
};
LoadedSegmentation read_segmentation_csv(const std::filesystem::path& path);

// Annotation predictions: one CSV row per (bag, rank).
void save_annotations(const std::vector<std::string>& bag_ids, const std::vector<std::vector<Annotation>>& annotations,
                      const std::vector<std::string>& vocab, const std::filesystem::path& path);
struct LoadedAnnotations {
  std::vector<std::string> bag_ids;
  std::vector<std::vector<Annotation>> annotations;
};
// Names are resolved through `vocab` (objects, attributes, ...).
LoadedAnnotations load_annotations(const std::filesystem::path& path, const std::vector<std::string>& vocab);

// Query ranking with a `# query:` header naming the factors.
void save_query(const Query& query, const std::vector<QueryHit>& hits, const std::vector<std::string>& vocab,
                const std::filesystem::path& path);
struct LoadedQuery {
  std::vector<std::string> factor_names;  // object first
  std::vector<std::string> ranking;       // bag ids, best first
};
LoadedQuery load_query(const std::filesystem::path& path);

// External label file: one `bag_id: name,name,...` line per bag.
std::map<std::string, std::vector<std::string>> load_label_file(const std::filesystem::path& path);

// Resolves annotated factor names to a padded label vector.
WeakLabels labels_from_names(const std::vector<std::string>& names, const std::vector<std::string>& objects,
                             const std::vector<std::string>& attributes, int k_extra, const std::string& bag_id);

}  // namespace sibp::io
