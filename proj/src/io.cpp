#include "sibp/io.hpp"

#include <array>
#include <bit>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string_view>

#include "sibp/error.hpp"

namespace sibp::io {
namespace fs = std::filesystem;

namespace {

constexpr std::string_view kModelMagic = "SIBPMODEL\n";

[[noreturn]] void format_error(const std::string& where, const std::string& what) {
  fail(ErrorCode::format, where + ": " + what);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(out.good(), ErrorCode::io, "write failed for " + path.string());
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

double parse_double(std::string_view s, const std::string& where) {
  const std::string tmp(trim(s));
  if (tmp.empty()) format_error(where, "malformed number ''");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size()) format_error(where, "malformed number '" + tmp + "'");
  return v;
}

long long parse_int(std::string_view s, const std::string& where) {
  const std::string tmp(trim(s));
  if (tmp.empty()) format_error(where, "malformed integer ''");
  char* end = nullptr;
  const long long v = std::strtoll(tmp.c_str(), &end, 10);
  if (end != tmp.c_str() + tmp.size()) format_error(where, "malformed integer '" + tmp + "'");
  return v;
}

std::size_t parse_count(std::string_view s, const std::string& where) {
  const long long v = parse_int(s, where);
  if (v < 0) format_error(where, "negative count");
  return static_cast<std::size_t>(v);
}

// Sequential reader over an in-memory buffer.
class Cursor {
 public:
  Cursor(std::string_view buf, std::string where) : buf_(buf), where_(std::move(where)) {}

  bool done() const { return pos_ >= buf_.size(); }
  std::size_t line_no() const { return line_; }
  std::string where() const { return where_ + ":" + std::to_string(line_); }

  std::string_view line() {
    if (done()) format_error(where(), "unexpected end of input");
    const std::size_t end = buf_.find('\n', pos_);
    const std::size_t stop = end == std::string_view::npos ? buf_.size() : end;
    std::string_view out = buf_.substr(pos_, stop - pos_);
    pos_ = end == std::string_view::npos ? buf_.size() : end + 1;
    ++line_;
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    return out;
  }

  // Reads `key: value` and returns the trimmed value.
  std::string_view expect(std::string_view key) {
    std::string_view l = line();
    if (l.size() < key.size() + 1 || l.substr(0, key.size()) != key || l[key.size()] != ':') {
      format_error(where(), "expected '" + std::string(key) + ":'");
    }
    return trim(l.substr(key.size() + 1));
  }

  std::string_view bytes(std::size_t n) {
    if (pos_ + n > buf_.size()) format_error(where(), "truncated binary block");
    std::string_view out = buf_.substr(pos_, n);
    pos_ += n;
    // Binary blocks are followed by a newline.
    if (pos_ < buf_.size() && buf_[pos_] == '\n') ++pos_;
    ++line_;
    return out;
  }

 private:
  std::string_view buf_;
  std::string where_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

template <typename T>
void append_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> raw;
  std::memcpy(raw.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.append(raw.data(), raw.size());
}

template <typename T>
T read_le(const char* p) {
  std::array<char, sizeof(T)> raw;
  std::memcpy(raw.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}

// A block of doubles, `rows × cols`, as text rows or a binary payload.
void write_block(std::string& out, const std::string& key, const double* values, std::size_t rows, std::size_t cols,
                 Encoding encoding) {
  if (encoding == Encoding::binary) {
    out += key + ": binary " + std::to_string(rows * cols * sizeof(double)) + "\n";
    for (std::size_t i = 0; i < rows * cols; ++i) append_le(out, values[i]);
    out += "\n";
    return;
  }
  out += key + ": text\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += ',';
      out += fmt_double(values[r * cols + c]);
    }
    out += "\n";
  }
}

void read_block(Cursor& in, const std::string& key, double* values, std::size_t rows, std::size_t cols) {
  const std::vector<std::string> mode = split(in.expect(key), ' ');
  if (mode.size() == 2 && mode[0] == "binary") {
    const std::size_t n = parse_count(mode[1], in.where());
    if (n != rows * cols * sizeof(double)) format_error(in.where(), key + " block has unexpected size");
    const std::string_view raw = in.bytes(n);
    for (std::size_t i = 0; i < rows * cols; ++i) values[i] = read_le<double>(raw.data() + i * sizeof(double));
    return;
  }
  if (mode.size() != 1 || mode[0] != "text") format_error(in.where(), "unknown block encoding for " + key);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::vector<std::string> cells = split(in.line(), ',');
    if (cells.size() != cols) format_error(in.where(), "malformed row in " + key);
    for (std::size_t c = 0; c < cols; ++c) values[r * cols + c] = parse_double(cells[c], in.where());
  }
}

void check_version(std::string_view value, const std::string& where) {
  if (parse_int(value, where) != kFormatVersion) {
    fail(ErrorCode::format, where + ": unknown format version " + std::string(value));
  }
}

std::string check_id(const std::string& id) {
  require(!id.empty() && id.find_first_of(" \t\n,:") == std::string::npos, ErrorCode::invalid_argument,
          "bag id '" + id + "' must be non-empty without whitespace, ',' or ':'");
  return id;
}

std::string bag_section(const Bag& bag, const Dataset& data, Encoding encoding) {
  std::string out;
  out += "bag: " + bag.id + "\n";
  out += "instances: " + std::to_string(bag.num_instances()) + "\n";
  const std::size_t n = bag.num_instances(), d = bag.feature_dim();
  if (encoding == Encoding::binary) {
    out += "features: binary " + std::to_string(n * d * sizeof(float)) + "\n";
    for (float v : bag.features.data()) append_le(out, v);
    out += "\n";
  } else {
    out += "features: text\n";
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t c = 0; c < d; ++c) {
        if (c) out += ',';
        out += fmt_float(bag.features(j, c));
      }
      out += "\n";
    }
  }
  out += "edges: " + std::to_string(bag.edges.size()) + "\n";
  for (const Edge& e : bag.edges) out += std::to_string(e.a) + "," + std::to_string(e.b) + "\n";
  std::vector<std::string> names;
  const std::size_t k_oa = data.objects.size() + data.attributes.size();
  for (std::size_t k = 0; k < k_oa && k < bag.labels.size(); ++k) {
    if (bag.labels[k]) names.push_back(k < data.objects.size() ? data.objects[k] : data.attributes[k - data.objects.size()]);
  }
  out += "labels: " + join(names, ',') + "\n";
  return out;
}

}  // namespace

WeakLabels labels_from_names(const std::vector<std::string>& names, const std::vector<std::string>& objects,
                             const std::vector<std::string>& attributes, int k_extra, const std::string& bag_id) {
  std::vector<unsigned char> bits(objects.size() + attributes.size(), 0);
  for (const std::string& name : names) {
    std::size_t k = 0;
    bool found = false;
    for (; k < objects.size(); ++k) {
      if (objects[k] == name) {
        found = true;
        break;
      }
    }
    if (!found) {
      for (std::size_t a = 0; a < attributes.size(); ++a) {
        if (attributes[a] == name) {
          k = objects.size() + a;
          found = true;
          break;
        }
      }
    }
    require(found, ErrorCode::vocab_mismatch, "bag '" + bag_id + "': unknown factor name '" + name + "'");
    bits[k] = 1;
  }
  return WeakLabels(std::move(bits), k_extra);
}

void save_dataset(const Dataset& data, const fs::path& dir, Encoding encoding) {
  require(!data.bags.empty(), ErrorCode::empty_dataset, "dataset has no bags");
  const std::size_t d = data.bags.front().feature_dim();
  std::string payload;
  std::string manifest;
  manifest += "sibp-dataset: " + std::to_string(kFormatVersion) + "\n";
  manifest += "feature-dim: " + std::to_string(d) + "\n";
  manifest += std::string("encoding: ") + (encoding == Encoding::binary ? "binary" : "text") + "\n";
  manifest += "objects: " + join(data.objects, ',') + "\n";
  manifest += "attributes: " + join(data.attributes, ',') + "\n";
  manifest += "bags: " + std::to_string(data.bags.size()) + "\n";
  for (const Bag& bag : data.bags) {
    check_id(bag.id);
    require(bag.feature_dim() == d, ErrorCode::dimension_mismatch, "bag '" + bag.id + "': inconsistent feature dim");
    const std::string section = bag_section(bag, data, encoding);
    manifest += "bag: " + bag.id + " " + std::to_string(bag.num_instances()) + " " + std::to_string(payload.size()) +
                " " + std::to_string(section.size()) + "\n";
    payload += section;
  }
  fs::create_directories(dir);
  write_file(dir / "manifest.txt", manifest);
  write_file(dir / "bags.dat", payload);
}

Dataset load_dataset(const fs::path& dir, const ModelConfig* expected) {
  const std::string manifest_text = read_file(dir / "manifest.txt");
  Cursor m(manifest_text, (dir / "manifest.txt").string());
  check_version(m.expect("sibp-dataset"), m.where());
  const std::size_t d = parse_count(m.expect("feature-dim"), m.where());
  const std::string encoding(m.expect("encoding"));
  if (encoding != "text" && encoding != "binary") format_error(m.where(), "unknown encoding '" + encoding + "'");
  Dataset data;
  data.objects = split(m.expect("objects"), ',');
  data.attributes = split(m.expect("attributes"), ',');
  const std::size_t count = parse_count(m.expect("bags"), m.where());
  if (expected) {
    require(data.objects.size() == static_cast<std::size_t>(expected->k_objects) &&
                data.attributes.size() == static_cast<std::size_t>(expected->k_attributes),
            ErrorCode::vocab_mismatch, "dataset vocabulary sizes do not match the configuration");
  }
  const int k_extra = expected ? expected->k_extra : 0;

  const std::string payload = read_file(dir / "bags.dat");
  data.bags.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::vector<std::string> entry = split(m.expect("bag"), ' ');
    if (entry.size() != 4) format_error(m.where(), "bag entry needs id, instances, offset and length");
    const std::size_t n = parse_count(entry[1], m.where());
    const std::size_t offset = parse_count(entry[2], m.where());
    const std::size_t length = parse_count(entry[3], m.where());
    if (offset + length > payload.size()) format_error(m.where(), "bag '" + entry[0] + "' lies outside bags.dat");

    Cursor in(std::string_view(payload).substr(offset, length), (dir / "bags.dat").string() + "[" + entry[0] + "]");
    Bag bag;
    bag.id = std::string(in.expect("bag"));
    if (bag.id != entry[0]) format_error(in.where(), "bag id does not match the manifest");
    if (parse_count(in.expect("instances"), in.where()) != n) format_error(in.where(), "instance count mismatch");
    bag.features = MatrixF(n, d);
    const std::vector<std::string> mode = split(in.expect("features"), ' ');
    if (mode.size() == 2 && mode[0] == "binary") {
      if (parse_count(mode[1], in.where()) != n * d * sizeof(float)) format_error(in.where(), "feature block size");
      const std::string_view raw = in.bytes(n * d * sizeof(float));
      for (std::size_t v = 0; v < n * d; ++v) bag.features.data()[v] = read_le<float>(raw.data() + v * sizeof(float));
    } else if (mode.size() == 1 && mode[0] == "text") {
      for (std::size_t j = 0; j < n; ++j) {
        const std::vector<std::string> cells = split(in.line(), ',');
        require(cells.size() == d, ErrorCode::dimension_mismatch,
                "bag '" + bag.id + "': feature row " + std::to_string(j) + " has " + std::to_string(cells.size()) +
                    " values, expected " + std::to_string(d));
        for (std::size_t c = 0; c < d; ++c) bag.features(j, c) = static_cast<float>(parse_double(cells[c], in.where()));
      }
    } else {
      format_error(in.where(), "unknown feature encoding");
    }
    const std::size_t edges = parse_count(in.expect("edges"), in.where());
    bag.edges.reserve(edges);
    for (std::size_t e = 0; e < edges; ++e) {
      const std::vector<std::string> ends = split(in.line(), ',');
      if (ends.size() != 2) format_error(in.where(), "malformed edge");
      bag.edges.push_back({parse_count(ends[0], in.where()), parse_count(ends[1], in.where())});
    }
    bag.labels = labels_from_names(split(in.expect("labels"), ','), data.objects, data.attributes, k_extra, bag.id);
    data.bags.push_back(std::move(bag));
  }
  return data;
}

// ---- model ----------------------------------------------------------------

void save_model(const AppearanceModel& model, const CorrelationMatrix& correlation, const fs::path& path,
                Encoding encoding) {
  const ModelConfig& c = model.config;
  const std::size_t k = model.num_factors(), d = model.feature_dim();
  require(model.vocab.size() == k && model.variances.size() == k && correlation.m.rows() == k &&
              correlation.m.cols() == k,
          ErrorCode::dimension_mismatch, "model components disagree on the factor count");
  std::string out(kModelMagic);
  out += "version: " + std::to_string(kFormatVersion) + "\n";
  out += "alpha: " + fmt_double(c.alpha) + "\n";
  out += "sigma-a: " + fmt_double(c.sigma_a) + "\n";
  out += "sigma: " + fmt_double(c.sigma) + "\n";
  out += "beta: " + fmt_double(c.beta) + "\n";
  out += "rho: " + fmt_double(c.rho) + "\n";
  out += "k-objects: " + std::to_string(c.k_objects) + "\n";
  out += "k-attributes: " + std::to_string(c.k_attributes) + "\n";
  out += "k-extra: " + std::to_string(c.k_extra) + "\n";
  out += "max-iters: " + std::to_string(c.max_iters) + "\n";
  out += "tol: " + fmt_double(c.tol) + "\n";
  out += "seed: " + std::to_string(c.seed) + "\n";
  out += "messages: " + to_string(c.messages) + "\n";
  out += "prior: " + to_string(c.prior) + "\n";
  out += "feature-dim: " + std::to_string(d) + "\n";
  out += "vocab: " + join(model.vocab, ',') + "\n";
  write_block(out, "means", model.means.data().data(), k, d, encoding);
  write_block(out, "variances", model.variances.data(), 1, k, encoding);
  write_block(out, "correlation", correlation.m.data().data(), k, k, encoding);
  out += "end\n";
  write_file(path, out);
}

LoadedModel load_model(const fs::path& path) {
  const std::string text = read_file(path);
  if (text.compare(0, kModelMagic.size(), kModelMagic) != 0) {
    fail(ErrorCode::format, path.string() + ": not a model file (bad magic bytes)");
  }
  Cursor in(std::string_view(text).substr(kModelMagic.size()), path.string());
  check_version(in.expect("version"), in.where());
  LoadedModel out;
  ModelConfig& c = out.model.config;
  c.alpha = parse_double(in.expect("alpha"), in.where());
  c.sigma_a = parse_double(in.expect("sigma-a"), in.where());
  c.sigma = parse_double(in.expect("sigma"), in.where());
  c.beta = parse_double(in.expect("beta"), in.where());
  c.rho = parse_double(in.expect("rho"), in.where());
  c.k_objects = static_cast<int>(parse_int(in.expect("k-objects"), in.where()));
  c.k_attributes = static_cast<int>(parse_int(in.expect("k-attributes"), in.where()));
  c.k_extra = static_cast<int>(parse_int(in.expect("k-extra"), in.where()));
  c.max_iters = static_cast<int>(parse_int(in.expect("max-iters"), in.where()));
  c.tol = parse_double(in.expect("tol"), in.where());
  c.seed = std::strtoull(std::string(in.expect("seed")).c_str(), nullptr, 10);
  c.messages = parse_message_kind(std::string(in.expect("messages")));
  c.prior = parse_prior_form(std::string(in.expect("prior")));
  const std::size_t d = parse_count(in.expect("feature-dim"), in.where());
  out.model.vocab = split(in.expect("vocab"), ',');
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorCode::format, path.string() + ": invalid config snapshot: " + e.what());
  }
  const auto k = static_cast<std::size_t>(c.k_max());
  require(out.model.vocab.size() == k, ErrorCode::dimension_mismatch, path.string() + ": vocab length != k_max");
  out.model.means = MatrixD(k, d);
  out.model.variances.resize(k);
  out.correlation.m = MatrixD(k, k);
  read_block(in, "means", out.model.means.data().data(), k, d);
  read_block(in, "variances", out.model.variances.data(), 1, k);
  read_block(in, "correlation", out.correlation.m.data().data(), k, k);
  if (trim(in.line()) != "end") format_error(in.where(), "missing end marker");
  return out;
}

// ---- posteriors -----------------------------------------------------------

void save_posteriors(const std::vector<std::string>& bag_ids, const std::vector<BagPosterior>& posteriors,
                     const fs::path& path) {
  require(bag_ids.size() == posteriors.size(), ErrorCode::invalid_argument, "one id per posterior required");
  const std::size_t k = posteriors.empty() ? 0 : posteriors.front().tau.rows();
  std::string out = "sibp-posteriors: " + std::to_string(kFormatVersion) + "\n";
  out += "k-max: " + std::to_string(k) + "\n";
  out += "bags: " + std::to_string(posteriors.size()) + "\n";
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const BagPosterior& p = posteriors[i];
    out += "bag: " + check_id(bag_ids[i]) + " " + std::to_string(p.nu.rows()) + "\n";
    write_block(out, "tau", p.tau.data().data(), k, 2, Encoding::text);
    write_block(out, "nu", p.nu.data().data(), p.nu.rows(), k, Encoding::text);
  }
  write_file(path, out);
}

LoadedPosteriors load_posteriors(const fs::path& path) {
  const std::string text = read_file(path);
  Cursor in(text, path.string());
  check_version(in.expect("sibp-posteriors"), in.where());
  const std::size_t k = parse_count(in.expect("k-max"), in.where());
  const std::size_t count = parse_count(in.expect("bags"), in.where());
  LoadedPosteriors out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::vector<std::string> head = split(in.expect("bag"), ' ');
    if (head.size() != 2) format_error(in.where(), "bag line needs id and instance count");
    const std::size_t n = parse_count(head[1], in.where());
    BagPosterior p;
    p.tau = MatrixD(k, 2);
    p.nu = MatrixD(n, k);
    p.logits = MatrixD(n, k);
    read_block(in, "tau", p.tau.data().data(), k, 2);
    read_block(in, "nu", p.nu.data().data(), n, k);
    out.bag_ids.push_back(head[0]);
    out.posteriors.push_back(std::move(p));
  }
  return out;
}

// ---- truth ----------------------------------------------------------------

int Truth::factor_index(const std::string& name) const {
  for (std::size_t k = 0; k < objects.size(); ++k) {
    if (objects[k] == name) return static_cast<int>(k);
  }
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    if (attributes[a] == name) return static_cast<int>(objects.size() + a);
  }
  return -1;
}

AnnotationTruth Truth::annotation_truth(std::size_t bag) const {
  AnnotationTruth out;
  const auto& zb = z[bag];
  const std::size_t k_o = objects.size(), k_oa = objects.size() + attributes.size();
  for (std::size_t o = 0; o < k_o; ++o) {
    ObjectAttributes oa{static_cast<int>(o), {}};
    bool present = false;
    for (std::size_t j = 0; j < zb.rows(); ++j) {
      if (!zb(j, o)) continue;
      present = true;
      for (std::size_t a = k_o; a < k_oa; ++a) {
        if (zb(j, a)) oa.attributes.insert(static_cast<int>(a));
      }
    }
    if (present) out.push_back(std::move(oa));
  }
  return out;
}

std::vector<int> Truth::segmentation_truth(std::size_t bag) const {
  const auto& zb = z[bag];
  std::vector<int> out(zb.rows(), kVoidLabel);
  for (std::size_t j = 0; j < zb.rows(); ++j) {
    for (std::size_t o = 0; o < objects.size(); ++o) {
      if (zb(j, o)) {
        out[j] = static_cast<int>(o);
        break;
      }
    }
  }
  return out;
}

std::set<std::string> Truth::query_relevance(const Query& query) const {
  std::set<std::string> out;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = 0; j < z[i].rows(); ++j) {
      bool all = z[i](j, static_cast<std::size_t>(query.object)) != 0;
      for (int a : query.attributes) all = all && z[i](j, static_cast<std::size_t>(a)) != 0;
      if (all) {
        out.insert(bag_ids[i]);
        break;
      }
    }
  }
  return out;
}

Truth truth_from_synthetic(const SyntheticDataset& data, const Dataset& named) {
  Truth t;
  t.objects = named.objects;
  t.attributes = named.attributes;
  t.k_max = data.true_a.rows();
  for (const Bag& b : data.bags) t.bag_ids.push_back(b.id);
  t.z = data.true_z;
  t.a = data.true_a;
  return t;
}

void save_truth(const Truth& truth, const fs::path& path) {
  std::string out = "sibp-truth: " + std::to_string(kFormatVersion) + "\n";
  out += "objects: " + join(truth.objects, ',') + "\n";
  out += "attributes: " + join(truth.attributes, ',') + "\n";
  out += "k-max: " + std::to_string(truth.k_max) + "\n";
  out += "feature-dim: " + std::to_string(truth.a.cols()) + "\n";
  write_block(out, "true-a", truth.a.data().data(), truth.a.rows(), truth.a.cols(), Encoding::text);
  out += "bags: " + std::to_string(truth.z.size()) + "\n";
  for (std::size_t i = 0; i < truth.z.size(); ++i) {
    const auto& z = truth.z[i];
    out += "bag: " + truth.bag_ids[i] + " " + std::to_string(z.rows()) + "\n";
    for (std::size_t j = 0; j < z.rows(); ++j) {
      std::vector<std::string> active;
      for (std::size_t k = 0; k < z.cols(); ++k) {
        if (z(j, k)) active.push_back(std::to_string(k));
      }
      out += "z: " + join(active, ',') + "\n";
    }
  }
  write_file(path, out);
}

Truth load_truth(const fs::path& path) {
  const std::string text = read_file(path);
  Cursor in(text, path.string());
  check_version(in.expect("sibp-truth"), in.where());
  Truth t;
  t.objects = split(in.expect("objects"), ',');
  t.attributes = split(in.expect("attributes"), ',');
  t.k_max = parse_count(in.expect("k-max"), in.where());
  const std::size_t d = parse_count(in.expect("feature-dim"), in.where());
  t.a = MatrixD(t.k_max, d);
  read_block(in, "true-a", t.a.data().data(), t.k_max, d);
  const std::size_t count = parse_count(in.expect("bags"), in.where());
  for (std::size_t i = 0; i < count; ++i) {
    const std::vector<std::string> head = split(in.expect("bag"), ' ');
    if (head.size() != 2) format_error(in.where(), "bag line needs id and instance count");
    const std::size_t n = parse_count(head[1], in.where());
    Matrix<unsigned char> z(n, t.k_max, 0);
    for (std::size_t j = 0; j < n; ++j) {
      for (const std::string& k : split(in.expect("z"), ',')) {
        const std::size_t f = parse_count(k, in.where());
        if (f >= t.k_max) format_error(in.where(), "factor index out of range");
        z(j, f) = 1;
      }
    }
    t.bag_ids.push_back(head[0]);
    t.z.push_back(std::move(z));
  }
  return t;
}

void save_trace(const std::vector<IterationRecord>& trace, const fs::path& path) {
  std::string out = "iteration,mean_abs_delta_nu,seconds\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i + 1) + "," + fmt_double(trace[i].mean_abs_delta_nu) + "," + fmt_double(trace[i].seconds) +
           "\n";
  }
  write_file(path, out);
}

// ---- segmentation ---------------------------------------------------------

Raster load_raster(const fs::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  Raster r;
  if (!(in >> r.width >> r.height)) fail(ErrorCode::format, path.string() + ": missing raster size");
  r.ids.resize(r.width * r.height);
  for (auto& id : r.ids) {
    long long v = -1;
    if (!(in >> v) || v < 0) fail(ErrorCode::format, path.string() + ": malformed raster entry");
    id = static_cast<std::size_t>(v);
  }
  return r;
}

void save_raster(const Raster& raster, const fs::path& path) {
  std::string out = std::to_string(raster.width) + " " + std::to_string(raster.height) + "\n";
  for (std::size_t y = 0; y < raster.height; ++y) {
    for (std::size_t x = 0; x < raster.width; ++x) {
      if (x) out += ' ';
      out += std::to_string(raster.ids[y * raster.width + x]);
    }
    out += "\n";
  }
  write_file(path, out);
}

std::vector<double> raster_pixel_counts(const Raster& raster, std::size_t n) {
  std::vector<double> counts(n, 0.0);
  for (std::size_t id : raster.ids) {
    require(id < n, ErrorCode::invalid_argument, "raster references unknown instance id " + std::to_string(id));
    counts[id] += 1.0;
  }
  return counts;
}

Rgb palette_colour(int label) {
  static constexpr std::array<Rgb, 20> kPalette{{
      {128, 0, 0},   {0, 128, 0},    {128, 128, 0},  {0, 0, 128},    {128, 0, 128},
      {0, 128, 128}, {128, 128, 128}, {64, 0, 0},    {192, 0, 0},    {64, 128, 0},
      {192, 128, 0}, {64, 0, 128},   {192, 0, 128},  {64, 128, 128}, {192, 128, 128},
      {0, 64, 0},    {128, 64, 0},   {0, 192, 0},    {128, 192, 0},  {0, 64, 128},
  }};
  return kPalette[static_cast<std::size_t>(label < 0 ? 0 : label) % kPalette.size()];
}

void write_segmentation(const SegmentationMap& map, const std::vector<std::string>& vocab,
                        const std::optional<Raster>& raster, const fs::path& stem) {
  std::string csv = "instance,label_index,label_name,score\n";
  for (std::size_t j = 0; j < map.labels.size(); ++j) {
    const int l = map.labels[j];
    require(l >= 0 && static_cast<std::size_t>(l) < vocab.size(), ErrorCode::invalid_argument,
            "segmentation label outside the vocabulary");
    csv += std::to_string(j) + "," + std::to_string(l) + "," + vocab[static_cast<std::size_t>(l)] + "," +
           fmt_double(map.scores[j]) + "\n";
  }
  if (raster) {
    // Validate before writing anything.
    for (std::size_t id : raster->ids) {
      require(id < map.labels.size(), ErrorCode::invalid_argument,
              "raster references unknown instance id " + std::to_string(id));
    }
  }
  fs::path csv_path = stem;
  csv_path += ".csv";
  write_file(csv_path, csv);
  if (!raster) return;
  std::string ppm = "P3\n" + std::to_string(raster->width) + " " + std::to_string(raster->height) + "\n255\n";
  for (std::size_t y = 0; y < raster->height; ++y) {
    for (std::size_t x = 0; x < raster->width; ++x) {
      const Rgb c = palette_colour(map.labels[raster->ids[y * raster->width + x]]);
      if (x) ppm += ' ';
      ppm += std::to_string(c.r) + " " + std::to_string(c.g) + " " + std::to_string(c.b);
    }
    ppm += "\n";
  }
  fs::path ppm_path = stem;
  ppm_path += ".ppm";
  write_file(ppm_path, ppm);
}

LoadedSegmentation read_segmentation_csv(const fs::path& path) {
  const std::string text = read_file(path);
  Cursor in(text, path.string());
  if (trim(in.line()) != "instance,label_index,label_name,score") format_error(in.where(), "bad header");
  LoadedSegmentation out;
  while (!in.done()) {
    const std::string_view l = in.line();
    if (trim(l).empty()) continue;
    const std::vector<std::string> cells = split(l, ',');
    if (cells.size() != 4) format_error(in.where(), "malformed row");
    if (parse_count(cells[0], in.where()) != out.labels.size()) format_error(in.where(), "instances out of order");
    out.labels.push_back(static_cast<int>(parse_int(cells[1], in.where())));
    out.scores.push_back(parse_double(cells[3], in.where()));
  }
  return out;
}

// ---- annotations and queries ----------------------------------------------

void save_annotations(const std::vector<std::string>& bag_ids, const std::vector<std::vector<Annotation>>& annotations,
                      const std::vector<std::string>& vocab, const fs::path& path) {
  std::string out = "bag,rank,object,object_score,instance,attributes\n";
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    for (std::size_t r = 0; r < annotations[i].size(); ++r) {
      const Annotation& a = annotations[i][r];
      std::vector<std::string> attrs;
      for (const ScoredFactor& f : a.attributes) attrs.push_back(vocab[static_cast<std::size_t>(f.factor)] + ":" + fmt_double(f.score));
      out += bag_ids[i] + "," + std::to_string(r + 1) + "," + vocab[static_cast<std::size_t>(a.object)] + "," +
             fmt_double(a.object_score) + "," + std::to_string(a.object_instance) + "," + join(attrs, '|') + "\n";
    }
  }
  write_file(path, out);
}

LoadedAnnotations load_annotations(const fs::path& path, const std::vector<std::string>& vocab) {
  auto index_of = [&](const std::string& name, const std::string& where) {
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      if (vocab[k] == name) return static_cast<int>(k);
    }
    fail(ErrorCode::vocab_mismatch, where + ": unknown factor name '" + name + "'");
  };
  const std::string text = read_file(path);
  Cursor in(text, path.string());
  if (trim(in.line()) != "bag,rank,object,object_score,instance,attributes") format_error(in.where(), "bad header");
  LoadedAnnotations out;
  while (!in.done()) {
    const std::string_view l = in.line();
    if (trim(l).empty()) continue;
    const std::vector<std::string> cells = split(l, ',');
    if (cells.size() != 6) format_error(in.where(), "malformed row");
    if (out.bag_ids.empty() || out.bag_ids.back() != cells[0]) {
      out.bag_ids.push_back(cells[0]);
      out.annotations.emplace_back();
    }
    Annotation a;
    a.object = index_of(cells[2], in.where());
    a.object_score = parse_double(cells[3], in.where());
    a.object_instance = parse_count(cells[4], in.where());
    for (const std::string& item : split(cells[5], '|')) {
      const std::size_t colon = item.rfind(':');
      if (colon == std::string::npos) format_error(in.where(), "malformed attribute entry");
      a.attributes.push_back({index_of(item.substr(0, colon), in.where()), parse_double(item.substr(colon + 1), in.where())});
    }
    out.annotations.back().push_back(std::move(a));
  }
  return out;
}

void save_query(const Query& query, const std::vector<QueryHit>& hits, const std::vector<std::string>& vocab,
                const fs::path& path) {
  std::vector<std::string> names{vocab[static_cast<std::size_t>(query.object)]};
  for (int a : query.attributes) names.push_back(vocab[static_cast<std::size_t>(a)]);
  std::string out = "# query: " + join(names, '+') + "\n";
  out += "rank,bag,instance,score\n";
  for (std::size_t r = 0; r < hits.size(); ++r) {
    out += std::to_string(r + 1) + "," + hits[r].bag_id + "," + std::to_string(hits[r].instance) + "," +
           fmt_double(hits[r].score) + "\n";
  }
  write_file(path, out);
}

LoadedQuery load_query(const fs::path& path) {
  const std::string text = read_file(path);
  Cursor in(text, path.string());
  const std::string_view head = in.line();
  constexpr std::string_view prefix = "# query:";
  if (head.substr(0, prefix.size()) != prefix) format_error(in.where(), "missing '# query:' header");
  LoadedQuery out;
  out.factor_names = split(head.substr(prefix.size()), '+');
  if (trim(in.line()) != "rank,bag,instance,score") format_error(in.where(), "bad header");
  while (!in.done()) {
    const std::string_view l = in.line();
    if (trim(l).empty()) continue;
    const std::vector<std::string> cells = split(l, ',');
    if (cells.size() != 4) format_error(in.where(), "malformed row");
    out.ranking.push_back(cells[1]);
  }
  return out;
}

std::map<std::string, std::vector<std::string>> load_label_file(const fs::path& path) {
  const std::string text = read_file(path);
  Cursor in(text, path.string());
  std::map<std::string, std::vector<std::string>> out;
  while (!in.done()) {
    const std::string_view l = in.line();
    if (trim(l).empty() || trim(l).front() == '#') continue;
    const std::size_t colon = l.find(':');
    if (colon == std::string_view::npos) format_error(in.where(), "expected 'bag_id: labels'");
    out[std::string(trim(l.substr(0, colon)))] = split(l.substr(colon + 1), ',');
  }
  return out;
}

}  // namespace sibp::io
