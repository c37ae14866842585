#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "sibp/config.hpp"
#include "sibp/dataset.hpp"
#include "sibp/error.hpp"
#include "sibp/math.hpp"

using namespace sibp;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

MatrixD tau_rows(std::vector<std::pair<double, double>> rows) {
  MatrixD t(rows.size(), 2);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    t(k, 0) = rows[k].first;
    t(k, 1) = rows[k].second;
  }
  return t;
}

Bag make_bag(const std::string& id, std::size_t n, std::size_t d, std::size_t k_max) {
  Bag b;
  b.id = id;
  b.features = MatrixF(n, d, 0.5f);
  b.labels = WeakLabels::all_ones(static_cast<int>(k_max));
  return b;
}

}  // namespace

TEST_CASE("digamma satisfies the recurrence identity") {
  for (double x : {0.5, 1.0, 2.0, 10.0}) {
    CHECK(std::abs(digamma(x + 1) - digamma(x) - 1.0 / x) < 1e-10);
  }
}

TEST_CASE("digamma matches known values") {
  const double euler = 0.57721566490153286;
  CHECK(digamma(1.0) == doctest::Approx(-euler).epsilon(1e-13));
  CHECK(digamma(0.5) == doctest::Approx(-euler - 2 * std::log(2.0)).epsilon(1e-13));
  CHECK(digamma(2.0) - digamma(1.0) == doctest::Approx(1.0).epsilon(1e-13));
  // ψ(100) from the reference tables
  CHECK(digamma(100.0) == doctest::Approx(4.600161852738087).epsilon(1e-13));
}

TEST_CASE("log_sum_exp is stable for large and small inputs") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> small{-1000.0, -1000.0, -1000.0};
  CHECK(log_sum_exp(small) == doctest::Approx(-1000.0 + std::log(3.0)));
  const std::vector<double> one{0.25};
  CHECK(log_sum_exp(one) == 0.25);
}

TEST_CASE("sigmoid values and symmetry") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(2.0) == doctest::Approx(0.8807970779778823));
  for (double x : {-40.0, -3.0, 0.1, 7.0}) CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0));
}

TEST_CASE("expected_pi examples") {
  auto a = expected_pi(tau_rows({{1, 1}, {1, 1}}));
  CHECK(a == std::vector<double>{0.5, 0.25});
  auto b = expected_pi(tau_rows({{3, 1}}));
  CHECK(b == std::vector<double>{0.75});
  auto c = expected_pi(tau_rows({{2, 2}, {2, 2}, {2, 2}}));
  CHECK(c == std::vector<double>{0.5, 0.25, 0.125});
}

TEST_CASE("expected_pi is positive and non-increasing") {
  MatrixD t(12, 2);
  for (std::size_t k = 0; k < 12; ++k) {
    t(k, 0) = 0.1 + 0.7 * static_cast<double>(k);
    t(k, 1) = 5.0 / static_cast<double>(k + 1);
  }
  const auto pi = expected_pi(t);
  for (std::size_t k = 0; k < pi.size(); ++k) {
    CHECK(pi[k] > 0.0);
    CHECK(pi[k] < 1.0);
    if (k > 0) CHECK(pi[k] <= pi[k - 1]);
  }
}

TEST_CASE("expected_pi rejects non-positive tau") {
  CHECK(code_of([] { expected_pi(tau_rows({{1, 0}})); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { expected_pi(tau_rows({{-1, 1}})); }) == ErrorCode::invalid_argument);
}

TEST_CASE("config defaults and validation") {
  ModelConfig c;
  CHECK(c.alpha == 2.0);
  CHECK(c.sigma_a == 1.0);
  CHECK(c.sigma == 0.5);
  CHECK(c.beta == 1.0);
  CHECK(c.rho == 0.1);
  CHECK(c.k_extra == 20);
  CHECK(c.max_iters == 1500);
  CHECK(c.tol == 1e-4);
  c.k_objects = 2;
  c.k_attributes = 3;
  CHECK(c.k_max() == 25);
  CHECK_NOTHROW(c.validate());

  auto bad = [&](auto mutate) {
    ModelConfig x = c;
    mutate(x);
    return code_of([&] { x.validate(); });
  };
  CHECK(bad([](ModelConfig& x) { x.alpha = 0; }) == ErrorCode::invalid_argument);
  CHECK(bad([](ModelConfig& x) { x.sigma = -1; }) == ErrorCode::invalid_argument);
  CHECK(bad([](ModelConfig& x) { x.sigma_a = std::numeric_limits<double>::quiet_NaN(); }) ==
        ErrorCode::invalid_argument);
  CHECK(bad([](ModelConfig& x) { x.beta = -0.1; }) == ErrorCode::invalid_argument);
  CHECK(bad([](ModelConfig& x) { x.rho = -0.1; }) == ErrorCode::invalid_argument);
  CHECK(bad([](ModelConfig& x) { x.tol = -1; }) == ErrorCode::invalid_argument);
  CHECK(bad([](ModelConfig& x) { x.k_objects = x.k_attributes = x.k_extra = 0; }) == ErrorCode::invalid_argument);
  CHECK(bad([](ModelConfig& x) { x.max_iters = 0; }) == ErrorCode::invalid_argument);
}

TEST_CASE("enum names round-trip") {
  for (auto m : {MessageKind::posterior_mean, MessageKind::raw_logit}) CHECK(parse_message_kind(to_string(m)) == m);
  for (auto p : {PriorForm::digamma_ratio, PriorForm::expected_log_pi}) CHECK(parse_prior_form(to_string(p)) == p);
  CHECK(code_of([] { parse_prior_form("nope"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("weak labels pad extras with ones") {
  WeakLabels l({1, 0, 1}, 2);
  REQUIRE(l.size() == 5);
  CHECK(l[0]);
  CHECK_FALSE(l[1]);
  CHECK(l[3]);
  CHECK(l[4]);
  CHECK(WeakLabels::all_ones(4).bits() == std::vector<unsigned char>(4, 1));
}

TEST_CASE("make_vocab appends background names") {
  const auto v = make_vocab({"car"}, {"red", "shiny"}, 2);
  CHECK(v == std::vector<std::string>{"car", "red", "shiny", "bg0", "bg1"});
}

TEST_CASE("validate_dataset accepts consistent bags") {
  ModelConfig c;
  c.k_objects = 1;
  c.k_attributes = 1;
  c.k_extra = 1;
  std::vector<Bag> bags{make_bag("a", 4, 16, 3), make_bag("b", 3, 16, 3)};
  bags[0].edges = {{0, 1}, {2, 3}};
  const DatasetInfo info = validate_dataset(bags, c);
  CHECK(info.num_bags == 2);
  CHECK(info.feature_dim == 16);
  CHECK(info.k_max == 3);
}

TEST_CASE("validate_dataset errors") {
  ModelConfig c;
  c.k_objects = 1;
  c.k_attributes = 1;
  c.k_extra = 1;

  SUBCASE("dimension mismatch names the bag") {
    std::vector<Bag> bags{make_bag("a", 2, 16, 3), make_bag("odd", 2, 15, 3)};
    try {
      validate_dataset(bags, c);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::dimension_mismatch);
      CHECK(std::string(e.what()).find("odd") != std::string::npos);
    }
  }
  SUBCASE("empty dataset") {
    std::vector<Bag> none;
    CHECK(code_of([&] { validate_dataset(none, c); }) == ErrorCode::empty_dataset);
  }
  SUBCASE("edge out of range") {
    std::vector<Bag> bags{make_bag("a", 3, 16, 3)};
    bags[0].edges = {{0, 3}};
    CHECK(code_of([&] { validate_dataset(bags, c); }) == ErrorCode::edge_out_of_range);
  }
  SUBCASE("self edge") {
    std::vector<Bag> bags{make_bag("a", 3, 16, 3)};
    bags[0].edges = {{1, 1}};
    CHECK(code_of([&] { validate_dataset(bags, c); }) == ErrorCode::edge_out_of_range);
  }
  SUBCASE("non-finite feature") {
    std::vector<Bag> bags{make_bag("a", 3, 16, 3)};
    bags[0].features(1, 2) = std::numeric_limits<float>::infinity();
    CHECK(code_of([&] { validate_dataset(bags, c); }) == ErrorCode::format);
  }
  SUBCASE("label length") {
    std::vector<Bag> bags{make_bag("a", 3, 16, 4)};
    CHECK(code_of([&] { validate_dataset(bags, c); }) == ErrorCode::dimension_mismatch);
  }
  SUBCASE("vocabulary sizes") {
    Dataset d;
    d.objects = {"o"};
    d.attributes = {"a", "b"};
    d.bags = {make_bag("a", 3, 16, 3)};
    CHECK(code_of([&] { validate_dataset(d, c); }) == ErrorCode::vocab_mismatch);
  }
}
