#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sibp/error.hpp"
#include "sibp/generative.hpp"
#include "sibp/inference.hpp"
#include "sibp/io.hpp"

using namespace sibp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("sibp_io_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Writes a text dataset by hand from bag sections, computing the offsets.
void write_raw_dataset(const fs::path& dir, std::size_t d, const std::vector<std::string>& ids,
                       const std::vector<std::size_t>& sizes, const std::vector<std::string>& sections,
                       const std::string& version = "1") {
  std::string manifest = "sibp-dataset: " + version + "\nfeature-dim: " + std::to_string(d) +
                         "\nencoding: text\nobjects: cat,dog\nattributes: red\nbags: " + std::to_string(ids.size()) +
                         "\n";
  std::string payload;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    manifest += "bag: " + ids[i] + " " + std::to_string(sizes[i]) + " " + std::to_string(payload.size()) + " " +
                std::to_string(sections[i].size()) + "\n";
    payload += sections[i];
  }
  spit(dir / "manifest.txt", manifest);
  spit(dir / "bags.dat", payload);
}

ModelConfig small_config() {
  ModelConfig c;
  c.k_objects = 2;
  c.k_attributes = 2;
  c.k_extra = 1;
  c.sigma = 0.2;
  c.max_iters = 20;
  return c;
}

SyntheticDataset small_data(std::uint64_t seed, std::size_t d = 6) {
  return sample_dataset(small_config(), {6, 5, d, true}, LabelScheme::random(0.5), seed);
}

void check_same_bags(const Dataset& a, const Dataset& b, double tol) {
  CHECK(a.objects == b.objects);
  CHECK(a.attributes == b.attributes);
  REQUIRE(a.bags.size() == b.bags.size());
  for (std::size_t i = 0; i < a.bags.size(); ++i) {
    CHECK(a.bags[i].id == b.bags[i].id);
    CHECK(a.bags[i].edges == b.bags[i].edges);
    CHECK(a.bags[i].labels.bits() == b.bags[i].labels.bits());
    REQUIRE(a.bags[i].features.rows() == b.bags[i].features.rows());
    for (std::size_t v = 0; v < a.bags[i].features.data().size(); ++v) {
      if (tol == 0.0) {
        CHECK(a.bags[i].features.data()[v] == b.bags[i].features.data()[v]);
      } else {
        CHECK(std::abs(a.bags[i].features.data()[v] - b.bags[i].features.data()[v]) <= tol);
      }
    }
  }
}

}  // namespace

TEST_CASE("dataset round trips") {
  TempDir tmp("dataset");
  const Dataset data = to_dataset(small_data(3));
  const ModelConfig config = small_config();
  SUBCASE("binary is bit exact") {
    io::save_dataset(data, tmp.path, io::Encoding::binary);
    check_same_bags(data, io::load_dataset(tmp.path, &config), 0.0);
  }
  SUBCASE("text within 1e-6") {
    io::save_dataset(data, tmp.path, io::Encoding::text);
    check_same_bags(data, io::load_dataset(tmp.path, &config), 1e-6);
  }
  SUBCASE("padding follows the expected config") {
    io::save_dataset(data, tmp.path);
    const ModelConfig c = small_config();
    const Dataset loaded = io::load_dataset(tmp.path, &c);
    CHECK(loaded.bags[0].labels.size() == 5);
    CHECK(loaded.bags[0].labels.bits()[4] == 1);
    ModelConfig wrong = c;
    wrong.k_attributes = 3;
    CHECK_THROWS_WITH_AS(io::load_dataset(tmp.path, &wrong), doctest::Contains("vocabulary"), Error);
  }
  SUBCASE("D = 1024 is accepted") {
    Dataset wide;
    wide.objects = {"o"};
    wide.attributes = {"a"};
    Bag b;
    b.id = "wide";
    b.features = MatrixF(2, 1024);
    for (std::size_t v = 0; v < b.features.data().size(); ++v) b.features.data()[v] = static_cast<float>(v) * 0.5f;
    b.edges = {{0, 1}};
    b.labels = WeakLabels::all_ones(2);
    wide.bags.push_back(b);
    io::save_dataset(wide, tmp.path, io::Encoding::text);
    const Dataset loaded = io::load_dataset(tmp.path);
    CHECK(loaded.bags[0].features.cols() == 1024);
    CHECK(loaded.bags[0].features(1, 1023) == b.features(1, 1023));
  }
}

TEST_CASE("dataset loading errors") {
  TempDir tmp("dataset_errors");
  const std::string good = "bag: b0\ninstances: 2\nfeatures: text\n1,2\n3,4\nedges: 1\n0,1\nlabels: cat,red\n";
  SUBCASE("hand-written file loads") {
    write_raw_dataset(tmp.path, 2, {"b0"}, {2}, {good});
    const Dataset d = io::load_dataset(tmp.path);
    CHECK(d.bags[0].features(1, 0) == 3.0f);
    CHECK(d.bags[0].labels.bits() == std::vector<unsigned char>{1, 0, 1});
  }
  SUBCASE("unknown label name") {
    const std::string bad = "bag: b0\ninstances: 2\nfeatures: text\n1,2\n3,4\nedges: 0\nlabels: cat,purple\n";
    write_raw_dataset(tmp.path, 2, {"b0"}, {2}, {bad});
    try {
      io::load_dataset(tmp.path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::vocab_mismatch);
      CHECK(std::string(e.what()).find("purple") != std::string::npos);
    }
  }
  SUBCASE("unknown version") {
    write_raw_dataset(tmp.path, 2, {"b0"}, {2}, {good}, "7");
    CHECK_THROWS_WITH_AS(io::load_dataset(tmp.path), doctest::Contains("version"), Error);
  }
  SUBCASE("row of the wrong length names the bag") {
    const std::string bad = "bag: b0\ninstances: 2\nfeatures: text\n1,2\n3\nedges: 0\nlabels: cat\n";
    write_raw_dataset(tmp.path, 2, {"b0"}, {2}, {bad});
    try {
      io::load_dataset(tmp.path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::dimension_mismatch);
      CHECK(std::string(e.what()).find("b0") != std::string::npos);
    }
  }
  SUBCASE("non-numeric value") {
    const std::string bad = "bag: b0\ninstances: 2\nfeatures: text\n1,x\n3,4\nedges: 0\nlabels: cat\n";
    write_raw_dataset(tmp.path, 2, {"b0"}, {2}, {bad});
    try {
      io::load_dataset(tmp.path);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::format);
    }
  }
  SUBCASE("missing directory") {
    try {
      io::load_dataset(tmp.path / "nope");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::io);
    }
  }
}

TEST_CASE("model round trips") {
  TempDir tmp("model");
  const SyntheticDataset syn = small_data(5);
  const FitResult r = fit(to_dataset(syn), small_config());
  for (io::Encoding enc : {io::Encoding::binary, io::Encoding::text}) {
    const fs::path file = tmp.path / (enc == io::Encoding::binary ? "m.bin" : "m.txt");
    io::save_model(r.model, r.correlation, file, enc);
    const io::LoadedModel m = io::load_model(file);
    CHECK(m.model.means == r.model.means);
    CHECK(m.model.variances == r.model.variances);
    CHECK(m.model.vocab == r.model.vocab);
    CHECK(m.correlation == r.correlation);
    const ModelConfig& a = m.model.config;
    const ModelConfig& b = r.model.config;
    CHECK(a.alpha == b.alpha);
    CHECK(a.sigma == b.sigma);
    CHECK(a.sigma_a == b.sigma_a);
    CHECK(a.beta == b.beta);
    CHECK(a.rho == b.rho);
    CHECK(a.k_objects == b.k_objects);
    CHECK(a.k_attributes == b.k_attributes);
    CHECK(a.k_extra == b.k_extra);
    CHECK(a.max_iters == b.max_iters);
    CHECK(a.tol == b.tol);
    CHECK(a.seed == b.seed);
    CHECK(a.messages == b.messages);
    CHECK(a.prior == b.prior);
  }
  SUBCASE("saving twice gives identical bytes") {
    io::save_model(r.model, r.correlation, tmp.path / "a", io::Encoding::binary);
    io::save_model(io::load_model(tmp.path / "a").model, r.correlation, tmp.path / "b", io::Encoding::binary);
    CHECK(slurp(tmp.path / "a") == slurp(tmp.path / "b"));
  }
  SUBCASE("corrupted magic") {
    io::save_model(r.model, r.correlation, tmp.path / "m", io::Encoding::binary);
    std::string bytes = slurp(tmp.path / "m");
    bytes[0] = 'X';
    spit(tmp.path / "m", bytes);
    try {
      io::load_model(tmp.path / "m");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::format);
    }
  }
  SUBCASE("truncated file") {
    io::save_model(r.model, r.correlation, tmp.path / "m", io::Encoding::binary);
    const std::string bytes = slurp(tmp.path / "m");
    spit(tmp.path / "m", bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(io::load_model(tmp.path / "m"), Error);
  }
  SUBCASE("feature dimension must match at inference") {
    io::save_model(r.model, r.correlation, tmp.path / "m", io::Encoding::binary);
    const io::LoadedModel m = io::load_model(tmp.path / "m");
    const SyntheticDataset other = small_data(9, 12);
    try {
      infer_test(other.bags[0], m.model, m.correlation, m.model.config, 0);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::dimension_mismatch);
    }
  }
}

TEST_CASE("posteriors round trip") {
  TempDir tmp("posteriors");
  const FitResult r = fit(to_dataset(small_data(7)), small_config());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < r.posteriors.size(); ++i) ids.push_back("bag" + std::to_string(i));
  io::save_posteriors(ids, r.posteriors, tmp.path / "p.txt");
  const io::LoadedPosteriors p = io::load_posteriors(tmp.path / "p.txt");
  CHECK(p.bag_ids == ids);
  REQUIRE(p.posteriors.size() == r.posteriors.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(p.posteriors[i].tau == r.posteriors[i].tau);
    CHECK(p.posteriors[i].nu == r.posteriors[i].nu);
  }
}

TEST_CASE("truth sidecar") {
  TempDir tmp("truth");
  SyntheticDataset syn = small_data(11);
  const Dataset named = to_dataset(syn);
  const io::Truth t = io::truth_from_synthetic(syn, named);
  io::save_truth(t, tmp.path / "truth.txt");
  const io::Truth back = io::load_truth(tmp.path / "truth.txt");
  CHECK(back.objects == t.objects);
  CHECK(back.attributes == t.attributes);
  CHECK(back.bag_ids == t.bag_ids);
  CHECK(back.a == t.a);
  REQUIRE(back.z.size() == t.z.size());
  for (std::size_t i = 0; i < t.z.size(); ++i) CHECK(back.z[i] == t.z[i]);
  CHECK(back.factor_index("obj1") == 1);
  CHECK(back.factor_index("attr0") == 2);
  CHECK(back.factor_index("nothing") == -1);

  SUBCASE("derived targets") {
    io::Truth h;
    h.objects = {"o0", "o1"};
    h.attributes = {"a0", "a1"};
    h.k_max = 5;
    h.bag_ids = {"x", "y"};
    Matrix<unsigned char> z0(3, 5, 0), z1(2, 5, 0);
    z0(0, 1) = 1;
    z0(0, 2) = 1;
    z0(1, 0) = 1;
    z0(1, 1) = 1;
    z0(2, 4) = 1;
    z1(0, 0) = 1;
    z1(1, 3) = 1;
    h.z = {z0, z1};
    const AnnotationTruth a = h.annotation_truth(0);
    REQUIRE(a.size() == 2);
    CHECK(a[0].object == 0);
    CHECK(a[0].attributes.empty());
    CHECK(a[1].object == 1);
    CHECK(a[1].attributes == std::set<int>{2});
    CHECK(h.segmentation_truth(0) == std::vector<int>{1, 0, kVoidLabel});
    CHECK(h.query_relevance({1, {2}}) == std::set<std::string>{"x"});
    CHECK(h.query_relevance({0, {3}}).empty());
    CHECK(h.query_relevance({0, {}}) == std::set<std::string>{"x", "y"});
  }
}

TEST_CASE("segmentation output") {
  TempDir tmp("segmentation");
  SegmentationMap map;
  map.labels = {0, 1, 0};
  map.scores = {0.9, 0.8, 0.7};
  const std::vector<std::string> vocab{"cat", "dog", "red"};
  SUBCASE("CSV only without a raster") {
    io::write_segmentation(map, vocab, std::nullopt, tmp.path / "b0");
    CHECK(fs::exists(tmp.path / "b0.csv"));
    CHECK_FALSE(fs::exists(tmp.path / "b0.ppm"));
    const std::string csv = slurp(tmp.path / "b0.csv");
    CHECK(csv.find("1,1,dog,0.8") != std::string::npos);
    const io::LoadedSegmentation back = io::read_segmentation_csv(tmp.path / "b0.csv");
    CHECK(back.labels == map.labels);
    CHECK(back.scores == map.scores);
  }
  SUBCASE("raster gives a P3 image") {
    SegmentationMap two;
    two.labels = {0, 1};
    two.scores = {1.0, 1.0};
    io::Raster r{2, 2, {0, 1, 1, 0}};
    io::write_segmentation(two, vocab, r, tmp.path / "b1");
    std::istringstream ppm(slurp(tmp.path / "b1.ppm"));
    std::string magic;
    int w = 0, h = 0, max = 0;
    ppm >> magic >> w >> h >> max;
    CHECK(magic == "P3");
    CHECK(w == 2);
    CHECK(h == 2);
    CHECK(max == 255);
    std::set<std::tuple<int, int, int>> colours;
    int pixels = 0;
    int red = 0, green = 0, blue = 0;
    while (ppm >> red >> green >> blue) {
      colours.insert({red, green, blue});
      ++pixels;
    }
    CHECK(pixels == 4);
    CHECK(colours.size() == 2);
    const io::Rgb c0 = io::palette_colour(0);
    CHECK(colours.count({c0.r, c0.g, c0.b}) == 1);
    CHECK(io::raster_pixel_counts(r, 2) == std::vector<double>{2.0, 2.0});
  }
  SUBCASE("raster naming an unknown instance") {
    io::Raster r{2, 1, {0, 7}};
    CHECK_THROWS_AS(io::write_segmentation(map, vocab, r, tmp.path / "b2"), Error);
    CHECK_FALSE(fs::exists(tmp.path / "b2.csv"));
  }
  SUBCASE("raster file round trip") {
    io::Raster r{3, 2, {0, 0, 1, 2, 2, 1}};
    io::save_raster(r, tmp.path / "r.txt");
    const io::Raster back = io::load_raster(tmp.path / "r.txt");
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.ids == r.ids);
    spit(tmp.path / "bad.txt", "2 2\n0 1\n");
    CHECK_THROWS_AS(io::load_raster(tmp.path / "bad.txt"), Error);
  }
}

TEST_CASE("annotation and query files") {
  TempDir tmp("predictions");
  const std::vector<std::string> vocab{"cat", "dog", "red", "furry"};
  Annotation a;
  a.object = 1;
  a.object_score = 0.75;
  a.object_instance = 3;
  a.attributes = {{3, 0.5}, {2, 0.25}};
  Annotation b = a;
  b.object = 0;
  b.attributes = {};
  const std::vector<std::string> ids{"x", "y"};
  io::save_annotations(ids, {{a, b}, {b}}, vocab, tmp.path / "ann.csv");
  const io::LoadedAnnotations back = io::load_annotations(tmp.path / "ann.csv", vocab);
  CHECK(back.bag_ids == ids);
  REQUIRE(back.annotations.size() == 2);
  REQUIRE(back.annotations[0].size() == 2);
  CHECK(back.annotations[0][0].object == 1);
  CHECK(back.annotations[0][0].object_instance == 3);
  CHECK(back.annotations[0][0].attributes == a.attributes);
  CHECK(back.annotations[0][1].attributes.empty());
  CHECK_THROWS_AS(io::load_annotations(tmp.path / "ann.csv", {"cat"}), Error);

  const std::vector<QueryHit> hits{{1, "y", 0, 0.9}, {0, "x", 2, 0.1}};
  io::save_query({1, {3}}, hits, vocab, tmp.path / "q.csv");
  const io::LoadedQuery q = io::load_query(tmp.path / "q.csv");
  CHECK(q.factor_names == std::vector<std::string>{"dog", "furry"});
  CHECK(q.ranking == std::vector<std::string>{"y", "x"});
}

TEST_CASE("label files and name resolution") {
  TempDir tmp("labels");
  spit(tmp.path / "l.txt", "# comment\nb0: cat,red\nb1:\n");
  const auto labels = io::load_label_file(tmp.path / "l.txt");
  CHECK(labels.at("b0") == std::vector<std::string>{"cat", "red"});
  CHECK(labels.at("b1").empty());
  const WeakLabels l = io::labels_from_names({"red"}, {"cat", "dog"}, {"red"}, 2, "b");
  CHECK(l.bits() == std::vector<unsigned char>{0, 0, 1, 1, 1});
  CHECK_THROWS_AS(io::labels_from_names({"blue"}, {"cat"}, {"red"}, 0, "b"), Error);
}
