#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "sibp/error.hpp"
#include "sibp/eval.hpp"
#include "sibp/generative.hpp"
#include "sibp/inference.hpp"
#include "sibp/io.hpp"
#include "sibp/kernels.hpp"
#include "sibp/tasks.hpp"

namespace sibp::cli {
namespace fs = std::filesystem;

namespace {

// A flag value that parsed but makes no sense; reported as a usage error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto as_usage(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

struct ModelFlags {
  ModelConfig config;
  std::string messages = to_string(ModelConfig{}.messages);
  std::string prior = to_string(ModelConfig{}.prior);

  ModelConfig resolve() const {
    return as_usage([&] {
      ModelConfig c = config;
      c.messages = parse_message_kind(messages);
      c.prior = parse_prior_form(prior);
      // Factor counts come from the data later; check everything else now.
      ModelConfig probe = c;
      probe.k_objects = std::max(probe.k_objects, 1);
      probe.validate();
      return c;
    });
  }
};

struct ExecFlags {
  int threads = 1;
  std::string kernel;

  ExecutionOptions apply() const {
    if (!kernel.empty()) as_usage([&] { kernels::set_backend(kernels::parse_backend(kernel)); });
    ExecutionOptions exec;
    exec.threads = threads;
    return exec;
  }
};

void add_model_flags(CLI::App& app, ModelFlags& f) {
  ModelConfig& c = f.config;
  app.add_option("--alpha", c.alpha, "α: IBP sparsity prior")->capture_default_str();
  app.add_option("--sigma-a", c.sigma_a, "σ_A: appearance prior std")->capture_default_str();
  app.add_option("--sigma", c.sigma, "σ: observation noise std")->capture_default_str();
  app.add_option("--beta", c.beta, "β: spatial MRF coupling")->capture_default_str();
  app.add_option("--rho", c.rho, "ρ: factorial MRF weight")->capture_default_str();
  app.add_option("--k-extra", c.k_extra, "K_bg: unannotated factor slots (K_max = K_o + K_a + K_bg)")
      ->capture_default_str();
  app.add_option("--max-iters", c.max_iters, "iteration cap")->capture_default_str();
  app.add_option("--tol", c.tol, "stop when the mean |Δν| falls below this")->capture_default_str();
  app.add_option("--seed", c.seed, "random seed")->capture_default_str();
  app.add_option("--messages", f.messages, "MRF messages: posterior-mean | raw-logit")->capture_default_str();
  app.add_option("--prior", f.prior, "prior logit form: expected-log-pi | digamma-ratio")->capture_default_str();
}

void add_exec_flags(CLI::App& app, ExecFlags& f) {
  app.add_option("--threads", f.threads, "worker threads (results do not depend on it)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--kernel", f.kernel, "vector kernel backend: scalar | avx2 | neon (default: best available)");
}

io::Encoding parse_encoding(const std::string& s) {
  if (s == "text") return io::Encoding::text;
  if (s == "binary") return io::Encoding::binary;
  throw UsageError("unknown encoding '" + s + "' (expected text or binary)");
}

ModelConfig config_for(const Dataset& data, ModelConfig c) {
  c.k_objects = static_cast<int>(data.objects.size());
  c.k_attributes = static_cast<int>(data.attributes.size());
  as_usage([&] { c.validate(); });
  return c;
}

// The model vocabulary is authoritative: the dataset must name the same
// objects and attributes in the same order.
void check_vocab(const Dataset& data, const AppearanceModel& model) {
  const auto k_o = static_cast<std::size_t>(model.config.k_objects);
  const auto k_a = static_cast<std::size_t>(model.config.k_attributes);
  require(data.objects.size() == k_o && data.attributes.size() == k_a, ErrorCode::vocab_mismatch,
          "dataset vocabulary sizes differ from the model");
  for (std::size_t k = 0; k < k_o + k_a; ++k) {
    const std::string& name = k < k_o ? data.objects[k] : data.attributes[k - k_o];
    require(name == model.vocab[k], ErrorCode::vocab_mismatch,
            "dataset factor '" + name + "' does not match model factor '" + model.vocab[k] + "'");
  }
  for (const Bag& bag : data.bags) {
    require(bag.feature_dim() == model.feature_dim(), ErrorCode::dimension_mismatch,
            "bag '" + bag.id + "' has D=" + std::to_string(bag.feature_dim()) + " but the model expects D=" +
                std::to_string(model.feature_dim()));
  }
}

int resolve_factor(const std::vector<std::string>& vocab, const std::string& name) {
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    if (vocab[k] == name) return static_cast<int>(k);
  }
  fail(ErrorCode::vocab_mismatch, "unknown factor name '" + name + "'");
}

std::vector<std::string> bag_ids(const std::vector<Bag>& bags) {
  std::vector<std::string> ids;
  for (const Bag& b : bags) ids.push_back(b.id);
  return ids;
}

std::optional<io::Raster> raster_for(const std::string& dir, const std::string& id) {
  if (dir.empty()) return std::nullopt;
  return io::load_raster(fs::path(dir) / (id + ".txt"));
}

// ---- subcommands ----------------------------------------------------------

struct SynthArgs {
  ModelFlags model;
  std::string out;
  std::size_t bags = 50;
  std::size_t first_bag = 0;
  std::size_t instances = 20;
  std::size_t dim = 16;
  int objects = 3;
  int attributes = 3;
  double density = 0.5;
  bool no_grid = false;
  std::string encoding = "text";
  std::vector<std::string> plant;
  double plant_strength = 1.0;
};

int do_synth(const SynthArgs& a, std::ostream& out) {
  ModelConfig c = a.model.resolve();
  c.k_objects = a.objects;
  c.k_attributes = a.attributes;
  as_usage([&] { c.validate(); });
  SyntheticDataset synth =
      sample_dataset(c, {a.bags, a.instances, a.dim, !a.no_grid, a.first_bag}, LabelScheme::random(a.density), c.seed);
  if (!a.plant.empty()) {
    std::vector<std::pair<int, int>> pairs;
    for (const std::string& p : a.plant) {
      const std::size_t colon = p.find(':');
      if (colon == std::string::npos) throw UsageError("--plant expects k:l, got '" + p + "'");
      try {
        pairs.emplace_back(std::stoi(p.substr(0, colon)), std::stoi(p.substr(colon + 1)));
      } catch (const std::logic_error&) {
        throw UsageError("--plant expects k:l, got '" + p + "'");
      }
    }
    synth = plant_correlation(std::move(synth), pairs, a.plant_strength, c.seed);
  }
  const Dataset data = to_dataset(synth);
  io::save_dataset(data, a.out, parse_encoding(a.encoding));
  io::save_truth(io::truth_from_synthetic(synth, data), fs::path(a.out) / "truth.txt");
  out << "wrote " << data.bags.size() << " bags to " << a.out << "\n";
  return kOk;
}

struct FitArgs {
  ModelFlags model;
  ExecFlags exec;
  std::string data;
  std::string model_out;
  std::string trace;
  std::string posteriors;
  std::string encoding = "binary";
};

int do_fit(const FitArgs& a, std::ostream& out) {
  const ExecutionOptions exec = a.exec.apply();
  ModelConfig c = a.model.resolve();
  Dataset data = io::load_dataset(a.data);
  c = config_for(data, c);
  // Reload so the label vectors carry the K_bg padding.
  data = io::load_dataset(a.data, &c);
  const FitResult result = fit(data, c, exec);
  io::save_model(result.model, result.correlation, a.model_out, parse_encoding(a.encoding));
  if (!a.trace.empty()) io::save_trace(result.trace, a.trace);
  if (!a.posteriors.empty()) io::save_posteriors(bag_ids(data.bags), result.posteriors, a.posteriors);
  out << "iterations: " << result.trace.size() << "\n";
  if (!result.trace.empty()) out << "final mean |dnu|: " << result.trace.back().mean_abs_delta_nu << "\n";
  return kOk;
}

struct InferArgs {
  ExecFlags exec;
  std::string data;
  std::string model;
  std::string out;
};

int do_infer(const InferArgs& a, std::ostream& out) {
  const ExecutionOptions exec = a.exec.apply();
  const io::LoadedModel m = io::load_model(a.model);
  const Dataset data = io::load_dataset(a.data, &m.model.config);
  check_vocab(data, m.model);
  const std::vector<BagPosterior> post = infer_batch(data.bags, m.model, m.correlation, m.model.config, exec);
  io::save_posteriors(bag_ids(data.bags), post, a.out);
  out << "inferred " << post.size() << " bags\n";
  return kOk;
}

struct AnnotateArgs {
  std::string model;
  std::string posteriors;
  std::string out;
  std::size_t top_objects = 1;
  std::size_t top_attrs = 5;
  std::string object;
  std::string ranking = "max-nu";
};

int do_annotate(const AnnotateArgs& a, std::ostream& out) {
  const io::LoadedModel m = io::load_model(a.model);
  const io::LoadedPosteriors p = io::load_posteriors(a.posteriors);
  const ModelConfig& c = m.model.config;
  const ObjectRanking ranking = as_usage([&] { return parse_object_ranking(a.ranking); });
  std::vector<std::vector<Annotation>> annotations;
  for (const BagPosterior& post : p.posteriors) {
    if (a.object.empty()) {
      annotations.push_back(free_annotation(post, c, a.top_objects, a.top_attrs, ranking));
    } else {
      annotations.push_back({annotate_given_object(post, c, resolve_factor(m.model.vocab, a.object), a.top_attrs)});
    }
  }
  io::save_annotations(p.bag_ids, annotations, m.model.vocab, a.out);
  out << "annotated " << annotations.size() << " bags\n";
  return kOk;
}

struct QueryArgs {
  std::string model;
  std::string posteriors;
  std::string out;
  std::string object;
  std::vector<std::string> attrs;
};

int do_query(const QueryArgs& a, std::ostream& out) {
  const io::LoadedModel m = io::load_model(a.model);
  const io::LoadedPosteriors p = io::load_posteriors(a.posteriors);
  Query q;
  q.object = resolve_factor(m.model.vocab, a.object);
  for (const std::string& name : a.attrs) q.attributes.push_back(resolve_factor(m.model.vocab, name));
  const std::vector<QueryHit> hits = rank_query(p.posteriors, p.bag_ids, q, m.model.config);
  io::save_query(q, hits, m.model.vocab, a.out);
  out << "ranked " << hits.size() << " bags\n";
  return kOk;
}

struct SegmentArgs {
  ModelFlags model_flags;
  ExecFlags exec;
  std::string model;
  std::string posteriors;
  std::string out_dir;
  std::string raster_dir;
  bool transductive = false;
  std::string train;
  std::string data;
  std::string test_labels = "all-ones";
  std::string label_file;
};

int do_segment(const SegmentArgs& a, std::ostream& out) {
  std::vector<std::string> ids;
  std::vector<BagPosterior> posteriors;
  AppearanceModel model;
  if (a.transductive) {
    if (a.train.empty() || a.data.empty()) throw UsageError("--transductive needs --train and --data");
    const ExecutionOptions exec = a.exec.apply();
    ModelConfig c = a.model_flags.resolve();
    c = config_for(io::load_dataset(a.train), c);
    const Dataset train = io::load_dataset(a.train, &c);
    Dataset test = io::load_dataset(a.data, &c);
    require(test.objects == train.objects && test.attributes == train.attributes, ErrorCode::vocab_mismatch,
            "test vocabulary differs from the training vocabulary");
    TestLabelSource source = TestLabelSource::all_ones;
    if (!a.label_file.empty()) {
      const auto names = io::load_label_file(a.label_file);
      for (Bag& bag : test.bags) {
        const auto it = names.find(bag.id);
        require(it != names.end(), ErrorCode::invalid_argument, "label file has no entry for bag '" + bag.id + "'");
        bag.labels = io::labels_from_names(it->second, test.objects, test.attributes, c.k_extra, bag.id);
      }
      source = TestLabelSource::provided;
    } else if (a.test_labels == "provided") {
      source = TestLabelSource::provided;
    } else {
      if (a.test_labels != "all-ones") throw UsageError("--test-labels must be all-ones or provided");
    }
    const TransductiveResult r = fit_transductive(train, test.bags, source, c, exec);
    if (!a.model.empty()) io::save_model(r.fit.model, r.fit.correlation, a.model);
    ids = bag_ids(test.bags);
    posteriors = r.test_posteriors;
    model = r.fit.model;
  } else {
    if (a.model.empty() || a.posteriors.empty()) {
      throw UsageError("segment needs --model and --posteriors (or --transductive)");
    }
    model = io::load_model(a.model).model;
    io::LoadedPosteriors p = io::load_posteriors(a.posteriors);
    ids = std::move(p.bag_ids);
    posteriors = std::move(p.posteriors);
  }
  // Load every raster first so a missing one fails before anything is written.
  std::vector<std::optional<io::Raster>> rasters;
  for (const std::string& id : ids) rasters.push_back(raster_for(a.raster_dir, id));
  fs::create_directories(a.out_dir);
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const SegmentationMap map = segment(posteriors[i], model.config);
    io::write_segmentation(map, model.vocab, rasters[i], fs::path(a.out_dir) / ids[i]);
  }
  out << "segmented " << posteriors.size() << " bags into " << a.out_dir << "\n";
  return kOk;
}

struct EvalArgs {
  std::string task;
  std::string truth;
  std::vector<std::string> pred;
  std::vector<std::size_t> t{1, 3, 5};
  std::string posteriors;
  std::string raster_dir;
};

std::map<std::string, std::size_t> index_by_id(const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out[ids[i]] = i;
  return out;
}

int eval_annotation(const EvalArgs& a, const io::Truth& truth, std::ostream& out) {
  if (a.pred.size() != 1) throw UsageError("annotation evaluation takes one --pred file");
  const int k_oa = static_cast<int>(truth.objects.size() + truth.attributes.size());
  const std::vector<std::string> vocab =
      make_vocab(truth.objects, truth.attributes, static_cast<int>(truth.k_max) - k_oa);
  const io::LoadedAnnotations pred = io::load_annotations(a.pred.front(), vocab);
  const auto by_id = index_by_id(pred.bag_ids);
  std::vector<std::vector<Annotation>> predictions;
  std::vector<AnnotationTruth> truths;
  for (std::size_t i = 0; i < truth.bag_ids.size(); ++i) {
    const auto it = by_id.find(truth.bag_ids[i]);
    predictions.push_back(it == by_id.end() ? std::vector<Annotation>{} : pred.annotations[it->second]);
    truths.push_back(truth.annotation_truth(i));
  }
  for (std::size_t t : a.t) out << "AP@" << t << ": " << ap_at_t(predictions, truths, t) << "\n";

  if (!a.posteriors.empty()) {
    const io::LoadedPosteriors p = io::load_posteriors(a.posteriors);
    const auto k_o = truth.objects.size();
    const auto k_a = truth.attributes.size();
    std::size_t rows = 0;
    for (const BagPosterior& bp : p.posteriors) rows += bp.nu.rows();
    MatrixD scores(rows, k_a);
    Matrix<unsigned char> labels(rows, k_a, 0);
    const auto truth_index = index_by_id(truth.bag_ids);
    std::size_t r = 0;
    for (std::size_t i = 0; i < p.posteriors.size(); ++i) {
      const auto it = truth_index.find(p.bag_ids[i]);
      require(it != truth_index.end(), ErrorCode::invalid_argument, "no truth for bag '" + p.bag_ids[i] + "'");
      const auto& z = truth.z[it->second];
      const MatrixD& nu = p.posteriors[i].nu;
      require(z.rows() == nu.rows(), ErrorCode::dimension_mismatch, "bag '" + p.bag_ids[i] + "' size differs");
      for (std::size_t j = 0; j < nu.rows(); ++j, ++r) {
        for (std::size_t k = 0; k < k_a; ++k) {
          scores(r, k) = nu(j, k_o + k);
          labels(r, k) = z(j, k_o + k);
        }
      }
    }
    const MapResult m = map_pr(scores, labels);
    out << "mAP: " << m.map << "\n";
    out << "mAP skipped attributes: " << m.skipped.size() << "\n";
  }
  return kOk;
}

int eval_query(const EvalArgs& a, const io::Truth& truth, std::ostream& out) {
  require(!a.pred.empty(), ErrorCode::invalid_argument, "query evaluation needs at least one --pred file");
  std::vector<std::vector<std::string>> rankings;
  std::vector<std::set<std::string>> relevant;
  for (const std::string& path : a.pred) {
    io::LoadedQuery q = io::load_query(path);
    require(!q.factor_names.empty(), ErrorCode::format, path + ": query names no factors");
    Query query;
    std::vector<int> idx;
    for (const std::string& name : q.factor_names) {
      const int k = truth.factor_index(name);
      require(k >= 0, ErrorCode::vocab_mismatch, path + ": unknown factor name '" + name + "'");
      idx.push_back(k);
    }
    query.object = idx.front();
    query.attributes.assign(idx.begin() + 1, idx.end());
    rankings.push_back(std::move(q.ranking));
    relevant.push_back(truth.query_relevance(query));
  }
  const MarResult r = mar_query(rankings, relevant);
  out << "MAR: " << r.mar << "\n";
  out << "queries: " << rankings.size() << "\n";
  out << "skipped (no relevant bags): " << r.skipped.size() << "\n";
  return kOk;
}

int eval_segmentation(const EvalArgs& a, const io::Truth& truth, std::ostream& out) {
  if (a.pred.size() != 1) throw UsageError("segmentation evaluation takes one --pred directory");
  std::vector<std::vector<int>> predicted, expected;
  std::vector<std::vector<double>> pixels;
  for (std::size_t i = 0; i < truth.bag_ids.size(); ++i) {
    const std::string& id = truth.bag_ids[i];
    predicted.push_back(io::read_segmentation_csv(fs::path(a.pred.front()) / (id + ".csv")).labels);
    expected.push_back(truth.segmentation_truth(i));
    if (!a.raster_dir.empty()) {
      pixels.push_back(io::raster_pixel_counts(*raster_for(a.raster_dir, id), expected.back().size()));
    }
  }
  const SegmentationScores s =
      segmentation_metrics(predicted, expected, pixels, static_cast<int>(truth.objects.size()));
  out << "mean IOU: " << s.mean_iou << "\n";
  out << "pixel accuracy: " << s.pixel_accuracy << "\n";
  out << "class accuracy: " << s.class_accuracy << "\n";
  for (std::size_t c = 0; c < s.class_iou.size(); ++c) {
    out << "IOU " << truth.objects[c] << ": " << s.class_iou[c] << "\n";
  }
  return kOk;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
  const io::Truth truth = io::load_truth(a.truth);
  if (a.task == "annotation") return eval_annotation(a, truth, out);
  if (a.task == "query") return eval_query(a, truth, out);
  return eval_segmentation(a, truth, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weakly supervised stacked IBP with spatial and factorial MRFs", "sibp"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  SynthArgs synth;
  CLI::App* s = app.add_subcommand("synth", "sample a synthetic dataset and its ground truth");
  add_model_flags(*s, synth.model);
  s->add_option("--out", synth.out, "output dataset directory")->required();
  s->add_option("--bags", synth.bags, "M: number of bags")->capture_default_str();
  s->add_option("--first-bag", synth.first_bag, "index of the first bag; later ranges share A but not bags")
      ->capture_default_str();
  s->add_option("--instances", synth.instances, "N: instances per bag")->capture_default_str();
  s->add_option("--dim", synth.dim, "D: feature dimension")->capture_default_str();
  s->add_option("--objects", synth.objects, "K_o: object factors")->capture_default_str();
  s->add_option("--attributes", synth.attributes, "K_a: attribute factors")->capture_default_str();
  s->add_option("--label-density", synth.density, "probability that an annotated label is on")
      ->capture_default_str();
  s->add_flag("--no-grid", synth.no_grid, "omit the 4-neighbour grid adjacency");
  s->add_option("--encoding", synth.encoding, "feature encoding: text | binary")->capture_default_str();
  s->add_option("--plant", synth.plant, "plant co-occurrence k:l (repeatable)");
  s->add_option("--plant-strength", synth.plant_strength, "probability that k activates l")->capture_default_str();

  FitArgs fit_args;
  CLI::App* f = app.add_subcommand("fit", "learn appearance models from weakly labelled bags");
  add_model_flags(*f, fit_args.model);
  add_exec_flags(*f, fit_args.exec);
  f->add_option("--data", fit_args.data, "training dataset directory")->required();
  f->add_option("--model", fit_args.model_out, "output model file")->required();
  f->add_option("--trace", fit_args.trace, "per-iteration convergence trace (CSV)");
  f->add_option("--posteriors", fit_args.posteriors, "also write training posteriors");
  f->add_option("--encoding", fit_args.encoding, "model encoding: binary | text")->capture_default_str();

  InferArgs infer;
  CLI::App* i = app.add_subcommand("infer", "test-time inference with a frozen model");
  add_exec_flags(*i, infer.exec);
  i->add_option("--data", infer.data, "test dataset directory")->required();
  i->add_option("--model", infer.model, "model file")->required();
  i->add_option("--out", infer.out, "output posteriors file")->required();

  AnnotateArgs annotate;
  CLI::App* an = app.add_subcommand("annotate", "rank objects and their attributes per bag");
  an->add_option("--model", annotate.model, "model file")->required();
  an->add_option("--posteriors", annotate.posteriors, "posteriors file")->required();
  an->add_option("--out", annotate.out, "output annotation CSV")->required();
  an->add_option("--top-objects", annotate.top_objects, "objects reported per bag")->capture_default_str();
  an->add_option("--top-attrs", annotate.top_attrs, "t: attributes reported per object")->capture_default_str();
  an->add_option("--object", annotate.object, "describe this object instead of ranking objects");
  an->add_option("--object-ranking", annotate.ranking, "max-nu or expected-pi")->capture_default_str();

  QueryArgs query;
  CLI::App* q = app.add_subcommand("query", "rank bags for an object-attribute combination");
  q->add_option("--model", query.model, "model file")->required();
  q->add_option("--posteriors", query.posteriors, "posteriors file")->required();
  q->add_option("--out", query.out, "output ranking CSV")->required();
  q->add_option("--object", query.object, "object name")->required();
  q->add_option("--attrs", query.attrs, "attribute names")->delimiter(',')->required();

  SegmentArgs seg;
  CLI::App* sg = app.add_subcommand("segment", "label every instance with an object");
  add_model_flags(*sg, seg.model_flags);
  add_exec_flags(*sg, seg.exec);
  sg->add_option("--model", seg.model, "model file (output when --transductive)");
  sg->add_option("--posteriors", seg.posteriors, "posteriors file");
  sg->add_option("--out-dir", seg.out_dir, "directory for <bag>.csv and <bag>.ppm")->required();
  sg->add_option("--raster", seg.raster_dir, "directory of <bag>.txt instance-id rasters");
  sg->add_flag("--transductive", seg.transductive, "refit over training and test bags together");
  sg->add_option("--train", seg.train, "training dataset directory (transductive)");
  sg->add_option("--data", seg.data, "test dataset directory (transductive)");
  sg->add_option("--test-labels", seg.test_labels, "test label source: all-ones | provided")
      ->capture_default_str();
  sg->add_option("--label-file", seg.label_file, "external test labels, one 'bag: names' line per bag");

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "score task outputs against ground truth");
  e->add_option("--task", ev.task, "annotation | query | segmentation")
      ->required()
      ->check(CLI::IsMember({"annotation", "query", "segmentation"}));
  e->add_option("--truth", ev.truth, "ground-truth sidecar")->required();
  e->add_option("--pred", ev.pred, "prediction file(s); a directory for segmentation")->required();
  e->add_option("--t", ev.t, "AP@t cut-offs")->delimiter(',')->capture_default_str();
  e->add_option("--posteriors", ev.posteriors, "posteriors for attribute mAP (annotation)");
  e->add_option("--raster", ev.raster_dir, "rasters for pixel weighting (segmentation)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto chosen = app.get_subcommands();
    out << (chosen.empty() ? app.help() : chosen.front()->help());
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n\n";
    const auto chosen = app.get_subcommands();
    err << (chosen.empty() ? app.help() : chosen.front()->help());
    return kUsageError;
  }

  try {
    if (s->parsed()) return do_synth(synth, out);
    if (f->parsed()) return do_fit(fit_args, out);
    if (i->parsed()) return do_infer(infer, out);
    if (an->parsed()) return do_annotate(annotate, out);
    if (q->parsed()) return do_query(query, out);
    if (sg->parsed()) return do_segment(seg, out);
    return do_eval(ev, out);
  } catch (const UsageError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kDataError;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);
  return run(args, std::cout, std::cerr);
}

}  // namespace sibp::cli
