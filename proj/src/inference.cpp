#include "sibp/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "sibp/error.hpp"
#include "sibp/kernels.hpp"
#include "sibp/math.hpp"
#include "sibp/random.hpp"

namespace sibp {
namespace {

constexpr double kLogitClip = 30.0;
constexpr double kMinVariance = 1e-12;

// a_s = ψ(τ_s2) + Σ_{t<s} ψ(τ_t1) − Σ_{t≤s} ψ(τ_t1 + τ_t2)
std::vector<double> stick_bound_exponents(const MatrixD& tau, std::size_t count) {
  std::vector<double> a(count);
  double sum_first = 0.0;
  double sum_total = 0.0;
  for (std::size_t s = 0; s < count; ++s) {
    const double t1 = tau(s, 0), t2 = tau(s, 1);
    require(t1 > 0 && t2 > 0, ErrorCode::invalid_argument,
            "tau entries must be positive (factor " + std::to_string(s) + ")");
    sum_total += digamma(t1 + t2);
    a[s] = digamma(t2) + sum_first - sum_total;
    sum_first += digamma(t1);
  }
  return a;
}

double clip_logit(double x) { return std::clamp(x, -kLogitClip, kLogitClip); }

double data_logit(double inv_two_sigma2, double trace_var, double phi_sq, double cross) {
  return -inv_two_sigma2 * (trace_var + phi_sq - 2.0 * cross);
}

// Per-bag working state that lives for the duration of one fit or inference.
struct BagWork {
  MatrixD x;     // N × D features in double precision
  MatrixD recon; // N × D, R_j = Σ_l ν_jl φ_l
  MatrixD eta;   // N × K, pre-MRF logits (raw-logit messages)
  std::vector<std::size_t> nbr_offset;
  std::vector<std::size_t> nbr;

  BagWork(const Bag& bag, std::size_t k_max) {
    const std::size_t n = bag.num_instances(), d = bag.feature_dim();
    x = MatrixD(n, d);
    for (std::size_t i = 0; i < n * d; ++i) x.data()[i] = bag.features.data()[i];
    recon = MatrixD(n, d);
    eta = MatrixD(n, k_max);
    std::vector<std::size_t> degree(n, 0);
    for (const Edge& e : bag.edges) {
      ++degree[e.a];
      ++degree[e.b];
    }
    nbr_offset.assign(n + 1, 0);
    for (std::size_t j = 0; j < n; ++j) nbr_offset[j + 1] = nbr_offset[j] + degree[j];
    nbr.resize(nbr_offset[n]);
    std::vector<std::size_t> fill(nbr_offset.begin(), nbr_offset.end() - 1);
    for (const Edge& e : bag.edges) {
      nbr[fill[e.a]++] = e.b;
      nbr[fill[e.b]++] = e.a;
    }
  }

  std::span<const std::size_t> neighbours(std::size_t j) const {
    return {nbr.data() + nbr_offset[j], nbr_offset[j + 1] - nbr_offset[j]};
  }

  void rebuild_recon(const MatrixD& nu, const MatrixD& means) {
    const std::size_t d = means.cols();
    recon.fill(0.0);
    for (std::size_t j = 0; j < nu.rows(); ++j) {
      double* r = recon.row(j).data();
      for (std::size_t k = 0; k < nu.cols(); ++k) {
        const double v = nu(j, k);
        if (v != 0.0) kernels::axpy(r, v, means.row(k).data(), d);
      }
    }
  }
};

std::vector<BagWork> make_work(std::span<const Bag> bags, std::size_t k_max) {
  std::vector<BagWork> works;
  works.reserve(bags.size());
  for (const Bag& bag : bags) works.emplace_back(bag, k_max);
  return works;
}

int thread_count(const ExecutionOptions& exec) { return std::max(exec.threads, 1); }

// Both MRF messages for entry (j, k). `msg(m, n)` yields the message from
// instance m about factor n.
template <typename Msg>
double mrf_adjustment(std::size_t j, std::size_t k, std::span<const std::size_t> neighbours, const MatrixD& m,
                      const ModelConfig& config, Msg&& msg) {
  double spatial = 0.0;
  for (std::size_t nb : neighbours) spatial += config.beta * msg(nb, k);
  double factorial = 0.0;
  const std::size_t k_max = m.cols();
  for (std::size_t n = 0; n < k_max; ++n) {
    if (n != k) factorial += config.rho * m(k, n) * msg(j, n);
  }
  return spatial + factorial;
}

void appearance_sweep(std::vector<BagWork>& works, std::span<const BagPosterior> posteriors,
                      const ModelConfig& config, AppearanceModel& model, const ExecutionOptions& exec) {
  const std::size_t bags = works.size();
  const std::size_t k_max = model.means.rows();
  const std::size_t d = model.means.cols();
  const int threads = thread_count(exec);

#pragma omp parallel for schedule(static) num_threads(threads)
  for (std::size_t i = 0; i < bags; ++i) works[i].rebuild_recon(posteriors[i].nu, model.means);

  MatrixD partial(bags, d);
  std::vector<double> partial_sum(bags), partial_sq(bags);
  std::vector<double> acc(d), delta(d);
  const double inv_sigma2 = 1.0 / (config.sigma * config.sigma);
  const double inv_sigma_a2 = 1.0 / (config.sigma_a * config.sigma_a);

  for (std::size_t k = 0; k < k_max; ++k) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::size_t i = 0; i < bags; ++i) {
      const MatrixD& nu = posteriors[i].nu;
      const BagWork& w = works[i];
      double* out = partial.row(i).data();
      std::fill(out, out + d, 0.0);
      double s = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < nu.rows(); ++j) {
        const double v = nu(j, k);
        if (v == 0.0) continue;
        s += v;
        s2 += v * v;
        kernels::axpy(out, v, w.x.row(j).data(), d);
        kernels::axpy(out, -v, w.recon.row(j).data(), d);
      }
      partial_sum[i] = s;
      partial_sq[i] = s2;
    }

    // Ordered combine: identical for any thread count.
    std::fill(acc.begin(), acc.end(), 0.0);
    double total = 0.0, total_sq = 0.0;
    for (std::size_t i = 0; i < bags; ++i) {
      kernels::axpy(acc.data(), 1.0, partial.row(i).data(), d);
      total += partial_sum[i];
      total_sq += partial_sq[i];
    }
    // Σ ν (x − Σ_{l≠k} ν_l φ_l) = Σ ν (x − R) + (Σ ν²) φ_k
    double* phi = model.means.row(k).data();
    kernels::axpy(acc.data(), total_sq, phi, d);

    const double variance = std::max(1.0 / (inv_sigma_a2 + inv_sigma2 * total), kMinVariance);
    model.variances[k] = variance;
    const double scale = inv_sigma2 * variance;
    for (std::size_t c = 0; c < d; ++c) {
      const double updated = acc[c] * scale;
      delta[c] = updated - phi[c];
      phi[c] = updated;
    }

#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::size_t i = 0; i < bags; ++i) {
      const MatrixD& nu = posteriors[i].nu;
      BagWork& w = works[i];
      for (std::size_t j = 0; j < nu.rows(); ++j) {
        const double v = nu(j, k);
        if (v != 0.0) kernels::axpy(w.recon.row(j).data(), v, delta.data(), d);
      }
    }
  }
}

// One outer-iteration pass over a bag: stick update, then a single
// Gauss–Seidel pass over (j, k). Returns Σ |Δν|.
double sweep_bag(BagWork& w, BagPosterior& post, const WeakLabels& labels, const AppearanceModel& model,
                 std::span<const double> phi_sq, const CorrelationMatrix& corr, const ModelConfig& config,
                 bool mrf_enabled) {
  update_stick(post, StickBoundCache::build(post.tau), config);
  const StickBoundCache cache = StickBoundCache::build(post.tau);
  const std::vector<double> prior = prior_logits(post.tau, cache, config.prior);

  const std::size_t n = post.nu.rows();
  const std::size_t k_max = post.nu.cols();
  const std::size_t d = model.means.cols();
  const double inv_two_sigma2 = 0.5 / (config.sigma * config.sigma);

  w.rebuild_recon(post.nu, model.means);
  MatrixD& nu = post.nu;
  const bool raw = config.messages == MessageKind::raw_logit;
  auto msg = [&](std::size_t m, std::size_t f) { return raw ? w.eta(m, f) : nu(m, f); };

  double change = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double* xj = w.x.row(j).data();
    double* rj = w.recon.row(j).data();
    for (std::size_t k = 0; k < k_max; ++k) {
      const double* phi = model.means.row(k).data();
      const double old = nu(j, k);
      const double cross = kernels::dot(phi, xj, d) - kernels::dot(phi, rj, d) + old * phi_sq[k];
      const double eta = prior[k] + data_logit(inv_two_sigma2, d * model.variances[k], phi_sq[k], cross);
      w.eta(j, k) = eta;
      double eta_prime = eta;
      if (mrf_enabled) eta_prime += mrf_adjustment(j, k, w.neighbours(j), corr.m, config, msg);
      eta_prime = clip_logit(eta_prime);
      post.logits(j, k) = eta_prime;
      const double updated = labels[k] ? sigmoid(eta_prime) : 0.0;
      if (updated != old) {
        change += std::abs(updated - old);
        kernels::axpy(rj, updated - old, phi, d);
        nu(j, k) = updated;
      }
    }
  }
  return change;
}

std::vector<double> squared_norms(const MatrixD& means) {
  std::vector<double> out(means.rows());
  for (std::size_t k = 0; k < means.rows(); ++k) {
    out[k] = kernels::dot(means.row(k).data(), means.row(k).data(), means.cols());
  }
  return out;
}

void normalize_correlation(MatrixD& m) {
  const std::size_t k_max = m.rows();
  double peak = 0.0;
  for (std::size_t k = 0; k < k_max; ++k) {
    m(k, k) = 0.0;
    for (std::size_t l = k + 1; l < k_max; ++l) {
      const double v = 0.5 * (m(k, l) + m(l, k));
      m(k, l) = v;
      m(l, k) = v;
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0) {
    for (double& v : m.data()) v /= peak;
  }
}

AppearanceModel init_model(const Dataset& data, const ModelConfig& config, std::size_t d) {
  AppearanceModel model;
  const auto k_max = static_cast<std::size_t>(config.k_max());
  model.means = MatrixD(k_max, d);
  model.variances.assign(k_max, config.sigma_a * config.sigma_a);
  model.vocab = make_vocab(data.objects, data.attributes, config.k_extra);
  model.config = config;
  Rng rng = make_rng(config.seed, Stream::init);
  std::normal_distribution<double> noise(0.0, 0.01 * config.sigma_a);
  for (double& v : model.means.data()) v = noise(rng);
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------

StickBoundCache StickBoundCache::build(const MatrixD& tau) {
  const std::size_t k_max = tau.rows();
  const std::vector<double> a = stick_bound_exponents(tau, k_max);
  StickBoundCache cache;
  cache.q = MatrixD(k_max, k_max);
  cache.neg_log_terms.resize(k_max);
  for (std::size_t m = 0; m < k_max; ++m) {
    const double lse = log_sum_exp(std::span<const double>(a.data(), m + 1));
    cache.neg_log_terms[m] = lse;
    for (std::size_t s = 0; s <= m; ++s) cache.q(m, s) = std::exp(a[s] - lse);
  }
  return cache;
}

StickBound stick_bound(const MatrixD& tau, std::size_t k) {
  require(k < tau.rows(), ErrorCode::invalid_argument, "stick_bound factor index out of range");
  const std::vector<double> a = stick_bound_exponents(tau, k + 1);
  StickBound out;
  const double lse = log_sum_exp(a);
  out.q_row.resize(k + 1);
  double expected = 0.0, entropy = 0.0;
  for (std::size_t s = 0; s <= k; ++s) {
    const double q = std::exp(a[s] - lse);
    out.q_row[s] = q;
    expected += q * a[s];
    if (q > 0) entropy -= q * std::log(q);
  }
  out.bound = expected + entropy;
  return out;
}

void update_stick(BagPosterior& posterior, const StickBoundCache& cache, const ModelConfig& config) {
  const MatrixD& nu = posterior.nu;
  const std::size_t k_max = nu.cols();
  const auto n = static_cast<double>(nu.rows());
  std::vector<double> on(k_max, 0.0);
  for (std::size_t j = 0; j < nu.rows(); ++j) {
    for (std::size_t k = 0; k < k_max; ++k) on[k] += nu(j, k);
  }

  std::vector<double> first(k_max, config.alpha), second(k_max, 1.0);
  std::vector<double> prefix(k_max + 1);
  for (std::size_t m = 0; m < k_max; ++m) {
    const double off = n - on[m];
    prefix[0] = 0.0;
    for (std::size_t s = 0; s <= m; ++s) prefix[s + 1] = prefix[s] + cache.q(m, s);
    for (std::size_t k = 0; k <= m; ++k) {
      first[k] += on[m];
      // Σ_{s=k+1..m} q_ms for m > k
      if (m > k) first[k] += off * (prefix[m + 1] - prefix[k + 1]);
      second[k] += off * cache.q(m, k);
    }
  }
  for (std::size_t k = 0; k < k_max; ++k) {
    posterior.tau(k, 0) = first[k];
    posterior.tau(k, 1) = second[k];
  }
}

std::vector<double> prior_logits(const MatrixD& tau, const StickBoundCache& cache, PriorForm form) {
  std::vector<double> out(tau.rows());
  double cumulative = 0.0;
  for (std::size_t k = 0; k < tau.rows(); ++k) {
    const double t1 = tau(k, 0), t2 = tau(k, 1);
    cumulative += digamma(t1) - (form == PriorForm::digamma_ratio ? digamma(t2) : digamma(t1 + t2));
    out[k] = cumulative - cache.neg_log_terms[k];
  }
  return out;
}

MatrixD compute_logits(const Bag& bag, const BagPosterior& posterior, const AppearanceModel& model,
                       const StickBoundCache& cache, const ModelConfig& config) {
  require(bag.feature_dim() == model.feature_dim(), ErrorCode::dimension_mismatch,
          "bag '" + bag.id + "' feature dim does not match the model");
  const std::size_t n = bag.num_instances(), k_max = model.num_factors(), d = model.feature_dim();
  BagWork w(bag, k_max);
  w.rebuild_recon(posterior.nu, model.means);
  const std::vector<double> prior = prior_logits(posterior.tau, cache, config.prior);
  const std::vector<double> phi_sq = squared_norms(model.means);
  const double inv_two_sigma2 = 0.5 / (config.sigma * config.sigma);
  MatrixD eta(n, k_max);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < k_max; ++k) {
      const double* phi = model.means.row(k).data();
      const double cross = kernels::dot(phi, w.x.row(j).data(), d) - kernels::dot(phi, w.recon.row(j).data(), d) +
                           posterior.nu(j, k) * phi_sq[k];
      eta(j, k) = prior[k] + data_logit(inv_two_sigma2, d * model.variances[k], phi_sq[k], cross);
    }
  }
  return eta;
}

MatrixD apply_mrf(const MatrixD& eta, const BagPosterior& posterior, const CorrelationMatrix& correlation,
                  std::span<const Edge> edges, const ModelConfig& config) {
  const std::size_t n = eta.rows(), k_max = eta.cols();
  Bag shape;
  shape.features = MatrixF(n, 0);
  shape.edges.assign(edges.begin(), edges.end());
  const BagWork w(shape, k_max);
  const bool raw = config.messages == MessageKind::raw_logit;
  auto msg = [&](std::size_t m, std::size_t f) { return raw ? eta(m, f) : posterior.nu(m, f); };
  MatrixD out = eta;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < k_max; ++k) {
      out(j, k) += mrf_adjustment(j, k, w.neighbours(j), correlation.m, config, msg);
    }
  }
  return out;
}

void update_nu(const MatrixD& eta_prime, const WeakLabels& labels, MatrixD& nu) {
  for (std::size_t j = 0; j < eta_prime.rows(); ++j) {
    for (std::size_t k = 0; k < eta_prime.cols(); ++k) {
      nu(j, k) = labels[k] ? sigmoid(clip_logit(eta_prime(j, k))) : 0.0;
    }
  }
}

CorrelationMatrix update_correlation(std::span<const BagPosterior> posteriors, std::span<const WeakLabels> labels,
                                     bool first_iteration) {
  std::size_t k_max = 0;
  if (first_iteration) {
    if (!labels.empty()) k_max = labels.front().size();
  } else if (!posteriors.empty()) {
    k_max = posteriors.front().nu.cols();
  }
  CorrelationMatrix out{MatrixD(k_max, k_max)};
  if (first_iteration) {
    for (const WeakLabels& l : labels) {
      for (std::size_t k = 0; k < k_max; ++k) {
        if (!l[k]) continue;
        for (std::size_t n = 0; n < k_max; ++n) out.m(k, n) += l[n] ? 1.0 : 0.0;
      }
    }
  } else {
    for (const BagPosterior& p : posteriors) {
      for (std::size_t j = 0; j < p.nu.rows(); ++j) {
        const double* row = p.nu.row(j).data();
        for (std::size_t k = 0; k < k_max; ++k) {
          if (row[k] != 0.0) kernels::axpy(out.m.row(k).data(), row[k], row, k_max);
        }
      }
    }
  }
  normalize_correlation(out.m);
  return out;
}

BagPosterior init_posterior(const Bag& bag, const ModelConfig& config, std::uint64_t stream) {
  const auto k_max = static_cast<std::size_t>(config.k_max());
  const std::size_t n = bag.num_instances();
  BagPosterior post;
  post.tau = MatrixD(k_max, 2);
  for (std::size_t k = 0; k < k_max; ++k) {
    post.tau(k, 0) = config.alpha;
    post.tau(k, 1) = 1.0;
  }
  post.nu = MatrixD(n, k_max);
  post.logits = MatrixD(n, k_max);
  Rng rng = make_rng(config.seed, Stream::init, stream + 1);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < k_max; ++k) {
      const double noise = jitter(rng);
      post.nu(j, k) = bag.labels[k] ? std::clamp(0.5 + noise, 0.0, 1.0) : 0.0;
    }
  }
  return post;
}

void update_appearance(std::span<const Bag> bags, std::span<const BagPosterior> posteriors,
                       const ModelConfig& config, AppearanceModel& model, const ExecutionOptions& exec) {
  require(bags.size() == posteriors.size(), ErrorCode::invalid_argument, "one posterior per bag required");
  std::vector<BagWork> works = make_work(bags, model.num_factors());
  appearance_sweep(works, posteriors, config, model, exec);
}

namespace {

FitResult fit_bags(const Dataset& data, std::span<const Bag> bags, const ModelConfig& config,
                   const ExecutionOptions& exec) {
  config.validate();
  const DatasetInfo info = validate_dataset(bags, config);
  require(data.objects.size() == static_cast<std::size_t>(config.k_objects) &&
              data.attributes.size() == static_cast<std::size_t>(config.k_attributes),
          ErrorCode::vocab_mismatch, "vocabulary sizes do not match K_o / K_a");

  FitResult result;
  result.model = init_model(data, config, info.feature_dim);
  std::vector<BagWork> works = make_work(bags, info.k_max);
  std::vector<WeakLabels> labels;
  labels.reserve(bags.size());
  result.posteriors.reserve(bags.size());
  std::size_t entries = 0;
  for (std::size_t i = 0; i < bags.size(); ++i) {
    labels.push_back(bags[i].labels);
    result.posteriors.push_back(init_posterior(bags[i], config, i));
    entries += bags[i].num_instances() * info.k_max;
  }
  result.correlation = update_correlation(result.posteriors, labels, true);

  const int threads = thread_count(exec);
  std::vector<double> change(bags.size());
  for (int iter = 0; iter < config.max_iters; ++iter) {
    const auto start = std::chrono::steady_clock::now();
    appearance_sweep(works, result.posteriors, config, result.model, exec);
    const std::vector<double> phi_sq = squared_norms(result.model.means);

#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::size_t i = 0; i < bags.size(); ++i) {
      change[i] = sweep_bag(works[i], result.posteriors[i], labels[i], result.model, phi_sq, result.correlation,
                            config, exec.mrf_enabled);
    }
    result.correlation = update_correlation(result.posteriors, labels, false);

    const double total = std::accumulate(change.begin(), change.end(), 0.0);
    const double mean = entries > 0 ? total / static_cast<double>(entries) : 0.0;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    result.trace.push_back({mean, elapsed.count()});
    if (mean < config.tol) break;
  }
  return result;
}

}  // namespace

FitResult fit(const Dataset& data, const ModelConfig& config, const ExecutionOptions& exec) {
  return fit_bags(data, data.bags, config, exec);
}

BagPosterior infer_test(const Bag& bag, const AppearanceModel& model, const CorrelationMatrix& correlation,
                        const ModelConfig& config, std::uint64_t stream) {
  config.validate();
  const std::size_t k_max = model.num_factors();
  require(static_cast<std::size_t>(config.k_max()) == k_max, ErrorCode::dimension_mismatch,
          "config k_max does not match the model");
  require(bag.feature_dim() == model.feature_dim(), ErrorCode::dimension_mismatch,
          "bag '" + bag.id + "' has feature dim " + std::to_string(bag.feature_dim()) + ", model expects " +
              std::to_string(model.feature_dim()));
  Bag open = bag;
  open.labels = WeakLabels::all_ones(static_cast<int>(k_max));
  validate_bag(open, model.feature_dim(), k_max);

  BagWork w(open, k_max);
  BagPosterior post = init_posterior(open, config, stream);
  const std::vector<double> phi_sq = squared_norms(model.means);
  const double entries = static_cast<double>(std::max<std::size_t>(open.num_instances() * k_max, 1));
  for (int iter = 0; iter < config.max_iters; ++iter) {
    const double change = sweep_bag(w, post, open.labels, model, phi_sq, correlation, config, true);
    if (change / entries < config.tol) break;
  }
  return post;
}

std::vector<BagPosterior> infer_batch(std::span<const Bag> bags, const AppearanceModel& model,
                                      const CorrelationMatrix& correlation, const ModelConfig& config,
                                      const ExecutionOptions& exec) {
  std::vector<BagPosterior> out(bags.size());
  const int threads = thread_count(exec);
  std::vector<std::exception_ptr> errors(bags.size());
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < bags.size(); ++i) {
    try {
      out[i] = infer_test(bags[i], model, correlation, config, i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

TransductiveResult fit_transductive(const Dataset& train, std::span<const Bag> test_bags, TestLabelSource source,
                                    const ModelConfig& config, const ExecutionOptions& exec) {
  std::vector<Bag> all = train.bags;
  for (Bag bag : test_bags) {
    if (source == TestLabelSource::all_ones) bag.labels = WeakLabels::all_ones(config.k_max());
    all.push_back(std::move(bag));
  }
  TransductiveResult out;
  out.fit = fit_bags(train, all, config, exec);
  out.test_posteriors.assign(out.fit.posteriors.begin() + static_cast<std::ptrdiff_t>(train.bags.size()),
                             out.fit.posteriors.end());
  return out;
}

}  // namespace sibp
