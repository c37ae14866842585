#include "sibp/generative.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sibp/error.hpp"
#include "sibp/random.hpp"

namespace sibp {

std::vector<Edge> grid_edges(std::size_t n) {
  std::vector<Edge> edges;
  if (n < 2) return edges;
  const auto width = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  for (std::size_t j = 0; j < n; ++j) {
    if ((j + 1) % width != 0 && j + 1 < n) edges.push_back({j, j + 1});
    if (j + width < n) edges.push_back({j, j + width});
  }
  return edges;
}

void emit_features(SyntheticDataset& data, std::uint64_t seed) {
  const std::size_t d = data.true_a.cols();
  const std::size_t k_max = data.true_a.rows();
  for (std::size_t i = 0; i < data.bags.size(); ++i) {
    Rng rng = make_rng(seed, Stream::emission, data.first_bag + i);
    std::normal_distribution<double> noise(0.0, data.config.sigma);
    Bag& bag = data.bags[i];
    const auto& z = data.true_z[i];
    std::vector<double> mean(d);
    for (std::size_t j = 0; j < bag.num_instances(); ++j) {
      std::fill(mean.begin(), mean.end(), 0.0);
      for (std::size_t k = 0; k < k_max; ++k) {
        if (!z(j, k)) continue;
        for (std::size_t c = 0; c < d; ++c) mean[c] += data.true_a(k, c);
      }
      for (std::size_t c = 0; c < d; ++c) bag.features(j, c) = static_cast<float>(mean[c] + noise(rng));
    }
  }
}

SyntheticDataset sample_dataset(const ModelConfig& config, const SyntheticShape& shape,
                                const LabelScheme& labels, std::uint64_t seed) {
  config.validate();
  require(shape.num_bags > 0 && shape.instances_per_bag > 0 && shape.feature_dim > 0,
          ErrorCode::invalid_argument, "synthetic shape counts must be positive");
  const auto k_oa = static_cast<std::size_t>(config.k_annotated());
  const auto k_max = static_cast<std::size_t>(config.k_max());
  if (!labels.per_bag.empty()) {
    require(labels.per_bag.size() == shape.num_bags, ErrorCode::invalid_argument,
            "label vectors must be given for every bag");
    for (const auto& l : labels.per_bag) {
      require(l.size() == k_oa, ErrorCode::invalid_argument, "label vector length must equal K_o + K_a");
    }
  } else {
    require(labels.density >= 0 && labels.density <= 1, ErrorCode::invalid_argument,
            "label density must lie in [0, 1]");
  }

  SyntheticDataset out;
  out.config = config;
  out.first_bag = shape.first_bag;
  out.true_a = MatrixD(k_max, shape.feature_dim);
  {
    Rng rng = make_rng(seed, Stream::appearance);
    std::normal_distribution<double> prior(0.0, config.sigma_a);
    for (double& v : out.true_a.data()) v = prior(rng);
  }

  const std::vector<Edge> edges = shape.grid_adjacency ? grid_edges(shape.instances_per_bag) : std::vector<Edge>{};
  const std::size_t n = shape.instances_per_bag;
  out.bags.resize(shape.num_bags);
  out.true_z.resize(shape.num_bags);
  out.true_pi.resize(shape.num_bags);
  for (std::size_t i = 0; i < shape.num_bags; ++i) {
    const std::size_t index = shape.first_bag + i;
    std::vector<unsigned char> annotated;
    if (!labels.per_bag.empty()) {
      annotated = labels.per_bag[i];
    } else {
      Rng rng = make_rng(seed, Stream::labels, index);
      std::bernoulli_distribution coin(labels.density);
      annotated.resize(k_oa);
      for (auto& b : annotated) b = coin(rng) ? 1 : 0;
    }

    Bag& bag = out.bags[i];
    bag.id = "bag" + std::to_string(index);
    bag.features = MatrixF(n, shape.feature_dim);
    bag.edges = edges;
    bag.labels = WeakLabels(std::move(annotated), config.k_extra);

    Rng rng = make_rng(seed, Stream::bag_prior, index);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto& pi = out.true_pi[i];
    pi.resize(k_max);
    double prod = 1.0;
    for (std::size_t k = 0; k < k_max; ++k) {
      prod *= std::pow(unit(rng), 1.0 / config.alpha);  // Beta(α, 1) by inversion
      pi[k] = prod;
    }
    auto& z = out.true_z[i];
    z = Matrix<unsigned char>(n, k_max, 0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < k_max; ++k) {
        const double p = bag.labels[k] ? pi[k] : 0.0;
        z(j, k) = unit(rng) < p ? 1 : 0;
      }
    }
  }
  emit_features(out, seed);
  return out;
}

SyntheticDataset plant_correlation(SyntheticDataset data, const std::vector<std::pair<int, int>>& pairs,
                                   double strength, std::uint64_t seed) {
  const auto k_max = static_cast<int>(data.true_a.rows());
  for (const auto& [k, l] : pairs) {
    require(k >= 0 && k < k_max && l >= 0 && l < k_max, ErrorCode::invalid_argument,
            "planted pair (" + std::to_string(k) + "," + std::to_string(l) + ") out of range");
  }
  require(strength >= 0 && strength <= 1, ErrorCode::invalid_argument, "strength must lie in [0, 1]");
  for (std::size_t i = 0; i < data.bags.size(); ++i) {
    Rng rng = make_rng(seed, Stream::planting, data.first_bag + i);
    std::bernoulli_distribution coin(strength);
    auto& z = data.true_z[i];
    for (std::size_t j = 0; j < z.rows(); ++j) {
      for (const auto& [k, l] : pairs) {
        if (z(j, k) && coin(rng)) {
          z(j, l) = 1;
          data.bags[i].labels.set(l, true);
        }
      }
    }
  }
  emit_features(data, mix_seed(seed, 0x706c616e74ULL));
  return data;
}

Dataset to_dataset(const SyntheticDataset& data) {
  Dataset out;
  for (int k = 0; k < data.config.k_objects; ++k) out.objects.push_back("obj" + std::to_string(k));
  for (int k = 0; k < data.config.k_attributes; ++k) out.attributes.push_back("attr" + std::to_string(k));
  out.bags = data.bags;
  return out;
}

}  // namespace sibp
