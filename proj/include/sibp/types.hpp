#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sibp/config.hpp"

namespace sibp {

// Dense row-major matrix with contiguous storage.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixD = Matrix<double>;
using MatrixF = Matrix<float>;

// Bag-level presence vector L, padded to k_max. Extra slots are always 1.
class WeakLabels {
 public:
  WeakLabels() = default;
  // `annotated` holds K_o + K_a bits; extras are appended as ones.
  WeakLabels(std::vector<unsigned char> annotated, int k_extra);
  static WeakLabels all_ones(int k_max);

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t k) const { return bits_[k] != 0; }
  void set(std::size_t k, bool on) { bits_[k] = on ? 1 : 0; }
  const std::vector<unsigned char>& bits() const { return bits_; }
  bool operator==(const WeakLabels&) const = default;

 private:
  std::vector<unsigned char> bits_;
};

struct Edge {
  std::size_t a = 0;
  std::size_t b = 0;
  bool operator==(const Edge&) const = default;
};

// One image: N_i × D instance features, adjacency and weak labels.
struct Bag {
  std::string id;
  MatrixF features;
  std::vector<Edge> edges;
  WeakLabels labels;

  std::size_t num_instances() const { return features.rows(); }
  std::size_t feature_dim() const { return features.cols(); }
};

// Per-factor appearance posterior N(φ_k, Φ_k·I).
struct AppearanceModel {
  MatrixD means;                  // K_max × D
  std::vector<double> variances;  // K_max
  std::vector<std::string> vocab; // objects, attributes, then background names
  ModelConfig config;

  std::size_t num_factors() const { return means.rows(); }
  std::size_t feature_dim() const { return means.cols(); }
  bool operator==(const AppearanceModel&) const = default;
};

// Per-bag variational state.
struct BagPosterior {
  MatrixD tau;    // K_max × 2, Beta(τ_k1, τ_k2) for each stick
  MatrixD nu;     // N_i × K_max, Bernoulli means
  MatrixD logits; // N_i × K_max, η′ from the last sweep

  bool operator==(const BagPosterior&) const = default;
};

// Symmetric inter-factor co-occurrence matrix with zero diagonal.
struct CorrelationMatrix {
  MatrixD m;
  bool operator==(const CorrelationMatrix&) const = default;
};

// Names for a K_max factor layout: the given object and attribute names
// followed by generated background names `bg0`, `bg1`, ...
std::vector<std::string> make_vocab(std::vector<std::string> objects,
                                    const std::vector<std::string>& attributes, int k_extra);

}  // namespace sibp
