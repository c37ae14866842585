#include <doctest.h>

#include <random>

#include "sibp/error.hpp"
#include "sibp/generative.hpp"
#include "sibp/inference.hpp"
#include "sibp/tasks.hpp"

using namespace sibp;

namespace {

ModelConfig layout(int k_o, int k_a, int k_extra) {
  ModelConfig c;
  c.k_objects = k_o;
  c.k_attributes = k_a;
  c.k_extra = k_extra;
  return c;
}

BagPosterior posterior(std::size_t n, std::size_t k_max, double fill = 0.0) {
  BagPosterior p;
  p.tau = MatrixD(k_max, 2, 1.0);
  p.nu = MatrixD(n, k_max, fill);
  p.logits = MatrixD(n, k_max);
  return p;
}

}  // namespace

TEST_CASE("free annotation locates the object and ranks its attributes") {
  const ModelConfig c = layout(1, 1, 0);
  BagPosterior p = posterior(4, 2);
  for (std::size_t j = 0; j < 4; ++j) p.nu(j, 0) = 0.5;
  p.nu(2, 0) = 1.0;
  p.nu(2, 1) = 0.9;
  const auto a = free_annotation(p, c, 1, 5);
  REQUIRE(a.size() == 1);
  CHECK(a[0].object == 0);
  CHECK(a[0].object_instance == 2);
  REQUIRE(a[0].attributes.size() == 1);
  CHECK(a[0].attributes[0] == ScoredFactor{1, 0.9});
  CHECK(free_annotation(p, c, 1, 0)[0].attributes.empty());
}

TEST_CASE("free annotation ranks objects by expected stick weight") {
  const ModelConfig c = layout(3, 2, 1);
  BagPosterior p = posterior(3, 6, 0.1);
  p.tau(0, 0) = 1.0;  // E[π] = 0.5, 0.45, 0.405
  p.tau(1, 0) = 9.0;
  p.tau(1, 1) = 1.0;
  p.tau(2, 0) = 9.0;
  p.tau(2, 1) = 1.0;
  const auto a = free_annotation(p, c, 3, 2, ObjectRanking::expected_pi);
  REQUIRE(a.size() == 3);
  CHECK(a[0].object == 0);
  CHECK(a[1].object == 1);
  CHECK(a[2].object == 2);
  CHECK(a[0].object_score == doctest::Approx(0.5));
  CHECK(a[1].object_score == doctest::Approx(0.45));
  CHECK(a[2].object_score == doctest::Approx(0.405));
  CHECK_THROWS_AS(free_annotation(p, c, 4, 2), Error);
}

TEST_CASE("free annotation ranks objects by their best instance") {
  const ModelConfig c = layout(3, 1, 0);
  BagPosterior p = posterior(3, 4);
  p.nu(1, 2) = 0.95;
  p.nu(0, 0) = 0.3;
  p.nu(2, 0) = 0.6;
  p.nu(0, 1) = 0.6;
  const auto a = free_annotation(p, c, 3, 1);
  CHECK(a[0].object == 2);
  CHECK(a[0].object_score == 0.95);
  CHECK(a[0].object_instance == 1);
  CHECK(a[1].object == 0);  // tie with object 1, lower index first
  CHECK(a[1].object_instance == 2);
  CHECK(a[2].object == 1);
  CHECK(parse_object_ranking("expected-pi") == ObjectRanking::expected_pi);
  CHECK(to_string(parse_object_ranking("max-nu")) == "max-nu");
  CHECK_THROWS_AS(parse_object_ranking("pi"), Error);
}

TEST_CASE("attribute ranking is descending and stable") {
  const ModelConfig c = layout(1, 4, 0);
  BagPosterior p = posterior(1, 5);
  p.nu(0, 0) = 1.0;
  p.nu(0, 1) = 0.2;
  p.nu(0, 2) = 0.7;
  p.nu(0, 3) = 0.2;
  p.nu(0, 4) = 0.9;
  const auto a = annotate_given_object(p, c, 0, 4);
  REQUIRE(a.attributes.size() == 4);
  CHECK(a.attributes[0].factor == 4);
  CHECK(a.attributes[1].factor == 2);
  CHECK(a.attributes[2].factor == 1);  // tie with 3, lower index first
  CHECK(a.attributes[3].factor == 3);
}

TEST_CASE("annotate a given object") {
  const ModelConfig c = layout(2, 2, 1);
  BagPosterior p = posterior(4, 5);
  SUBCASE("ties go to the first instance") {
    for (std::size_t j = 0; j < 4; ++j) p.nu(j, 1) = 0.6;
    p.nu(0, 3) = 0.3;
    const Annotation a = annotate_given_object(p, c, 1, 2);
    CHECK(a.object_instance == 0);
    CHECK(a.object_score == 0.6);
    CHECK(a.attributes[0] == ScoredFactor{3, 0.3});
  }
  SUBCASE("absent object still yields an annotation") {
    const Annotation a = annotate_given_object(p, c, 0, 2);
    CHECK(a.object_score == 0.0);
    CHECK(a.attributes.size() == 2);
  }
  SUBCASE("consistent with free annotation for the top object") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (double& v : p.nu.data()) v = u(rng);
    const auto free = free_annotation(p, c, 1, 2);
    const Annotation given = annotate_given_object(p, c, free[0].object, 2);
    CHECK(given.attributes == free[0].attributes);
    CHECK(given.object_instance == free[0].object_instance);
  }
  SUBCASE("instance mask restricts the search") {
    p.nu(0, 0) = 0.9;
    p.nu(3, 0) = 0.4;
    const Annotation a = annotate_given_object(p, c, 0, 1, std::vector<bool>{false, false, true, true});
    CHECK(a.object_instance == 3);
    CHECK_THROWS_AS(annotate_given_object(p, c, 0, 1, std::vector<bool>{true}), Error);
    CHECK_THROWS_AS(annotate_given_object(p, c, 0, 1, std::vector<bool>(4, false)), Error);
  }
  SUBCASE("non-object index") {
    CHECK_THROWS_AS(annotate_given_object(p, c, 2, 1), Error);
    CHECK_THROWS_AS(annotate_given_object(p, c, -1, 1), Error);
  }
}

TEST_CASE("free annotation recovers a planted object-attribute pair") {
  ModelConfig c = layout(3, 3, 0);
  c.sigma = 0.1;
  const SyntheticDataset train = sample_dataset(c, {50, 20, 16, true}, LabelScheme::random(0.5), 31);
  const FitResult r = fit(to_dataset(train), c);

  int matched = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    const int object = static_cast<int>(rng() % 3);
    const int attribute = 3 + static_cast<int>(rng() % 3);
    std::normal_distribution<double> noise(0.0, c.sigma);
    Bag bag;
    bag.id = "t";
    bag.features = MatrixF(6, 16);
    bag.edges = grid_edges(6);
    bag.labels = WeakLabels::all_ones(6);
    for (std::size_t j = 0; j < 6; ++j) {
      for (std::size_t d = 0; d < 16; ++d) {
        double mean = 0.0;
        if (j < 3) mean = train.true_a(object, d) + train.true_a(attribute, d);
        bag.features(j, d) = static_cast<float>(mean + noise(rng));
      }
    }
    const BagPosterior p = infer_test(bag, r.model, r.correlation, c, trial);
    const auto a = free_annotation(p, c, 1, 1);
    matched += a[0].object == object && a[0].attributes[0].factor == attribute;
  }
  CHECK(matched >= 90);
}

TEST_CASE("query ranking") {
  const ModelConfig c = layout(1, 2, 0);
  std::vector<BagPosterior> posts{posterior(2, 3), posterior(2, 3)};
  const std::vector<std::string> ids{"B", "A"};
  posts[1].nu(1, 0) = 1.0;
  posts[1].nu(1, 1) = 1.0;
  posts[0].nu(0, 0) = 0.5;
  posts[0].nu(0, 1) = 0.5;
  SUBCASE("co-located product wins") {
    const auto hits = rank_query(posts, ids, {0, {1}}, c);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].bag_id == "A");
    CHECK(hits[0].instance == 1);
    CHECK(hits[0].score == 1.0);
    CHECK(hits[1].score == 0.25);
  }
  SUBCASE("object-only query") {
    posts[0].nu(1, 0) = 0.7;
    const auto hits = rank_query(posts, ids, {0, {}}, c);
    CHECK(hits[0].bag_id == "A");
    CHECK(hits[1].score == 0.7);
    CHECK(hits[1].instance == 1);
  }
  SUBCASE("stable on ties") {
    const auto hits = rank_query(posts, ids, {0, {2}}, c);
    CHECK(hits[0].bag_id == "B");
    CHECK(hits[1].bag_id == "A");
  }
  SUBCASE("raising a queried factor never lowers the rank") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<BagPosterior> many(8, posterior(3, 3));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < many.size(); ++i) {
      for (double& v : many[i].nu.data()) v = u(rng);
      names.push_back("b" + std::to_string(i));
    }
    auto position = [&](const std::vector<BagPosterior>& p, const std::string& id) {
      const auto hits = rank_query(p, names, {0, {1, 2}}, c);
      for (std::size_t r = 0; r < hits.size(); ++r) {
        if (hits[r].bag_id == id) return r;
      }
      return hits.size();
    };
    for (std::size_t i = 0; i < many.size(); ++i) {
      const auto hits = rank_query(many, names, {0, {1, 2}}, c);
      const std::size_t before = position(many, names[i]);
      auto raised = many;
      const std::size_t j = [&] {
        for (const auto& h : hits) {
          if (h.bag_id == names[i]) return h.instance;
        }
        return std::size_t{0};
      }();
      raised[i].nu(j, 1) = std::min(1.0, raised[i].nu(j, 1) + 0.3);
      CHECK(position(raised, names[i]) <= before);
    }
  }
  SUBCASE("invalid indices") {
    CHECK_THROWS_AS(rank_query(posts, ids, {1, {1}}, c), Error);
    CHECK_THROWS_AS(rank_query(posts, ids, {0, {0}}, c), Error);
    CHECK_THROWS_AS(rank_query(posts, ids, {0, {3}}, c), Error);
    const std::vector<std::string> one{"x"};
    CHECK_THROWS_AS(rank_query(posts, one, {0, {1}}, c), Error);
  }
}

TEST_CASE("segmentation labels") {
  const ModelConfig c = layout(3, 1, 1);
  BagPosterior p = posterior(3, 5);
  SUBCASE("one-hot object columns") {
    p.nu(0, 2) = 1.0;
    p.nu(1, 0) = 1.0;
    p.nu(2, 1) = 1.0;
    p.nu(2, 3) = 1.0;  // attributes never win
    const SegmentationMap m = segment(p, c);
    CHECK(m.labels == std::vector<int>{2, 0, 1});
    CHECK(m.scores == std::vector<double>{1.0, 1.0, 1.0});
  }
  SUBCASE("ties choose the lowest object") {
    for (double& v : p.nu.data()) v = 0.4;
    CHECK(segment(p, c).labels == std::vector<int>{0, 0, 0});
  }
  SUBCASE("uniform rescaling of object columns keeps the labels") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (double& v : p.nu.data()) v = u(rng);
    BagPosterior scaled = p;
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 3; ++k) scaled.nu(j, k) *= 0.37;
    }
    CHECK(segment(p, c).labels == segment(scaled, c).labels);
  }
  SUBCASE("layout mismatch") {
    CHECK_THROWS_AS(segment(posterior(2, 4), c), Error);
  }
}
