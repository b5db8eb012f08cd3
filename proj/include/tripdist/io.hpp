#pragma once

// File formats.
//
//   dataset      JSON lines: header {input_dim, n_samples, n_identities, seed, spec}
//                then one {sample, identity, x} per sample
//   embeddings   binary "TFEMB1", u32 count, u32 dim, then per record
//                u32 identity, u32 sample, dim x f32; or JSON lines
//                {identity, sample, vector}
//   checkpoint   binary "TFMLP1", u32 n_layers (affine layers), n_layers + 1
//                u32 layer dims, u8 normalize flag, then per layer the
//                row-major out x in f32 weights followed by out f32 biases
//   train log    JSON lines {iter, loss, mean_margin, active_frac[, skipped]}
//   pairs        JSON lines {a, b, same}
//   report       one JSON document; optional ROC CSV
//
// All binary integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tripdist/data.hpp"
#include "tripdist/errors.hpp"
#include "tripdist/eval.hpp"
#include "tripdist/model.hpp"
#include "tripdist/teacher.hpp"
#include "tripdist/trainer.hpp"

namespace tripdist::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr std::string_view kEmbeddingMagic = "TFEMB1";
inline constexpr std::string_view kCheckpointMagic = "TFMLP1";

// ---- raw bytes ------------------------------------------------------------

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

class ByteReader {
 public:
  ByteReader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  void expect_magic(std::string_view magic) {
    if (bytes_.substr(0, magic.size()) != magic) {
      throw FormatError(what_ + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
    pos_ = magic.size();
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw FormatError(what_ + ": trailing bytes after payload");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError(what_ + ": truncated file");
  }
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::vector<json> parse_json_lines(std::string_view text, const std::string& what) {
  std::vector<json> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(what + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

template <typename T>
T field(const json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(what + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw FormatError(what + ": field '" + key + "': " + e.what());
  }
}

}  // namespace detail

// ---- dataset --------------------------------------------------------------

inline json spec_to_json(const HierarchySpec& s) {
  return json{{"n_superclusters", s.n_superclusters},
              {"identities_per_supercluster", s.identities_per_supercluster},
              {"samples_per_identity", s.samples_per_identity},
              {"input_dim", s.input_dim},
              {"supercluster_spread", s.supercluster_spread},
              {"identity_spread", s.identity_spread},
              {"sample_noise", s.sample_noise},
              {"seed", s.seed}};
}

inline HierarchySpec spec_from_json(const json& j) {
  const std::string w = "dataset spec";
  HierarchySpec s;
  s.n_superclusters = detail::field<std::size_t>(j, "n_superclusters", w);
  s.identities_per_supercluster = detail::field<std::size_t>(j, "identities_per_supercluster", w);
  s.samples_per_identity = detail::field<std::size_t>(j, "samples_per_identity", w);
  s.input_dim = detail::field<std::size_t>(j, "input_dim", w);
  s.supercluster_spread = detail::field<double>(j, "supercluster_spread", w);
  s.identity_spread = detail::field<double>(j, "identity_spread", w);
  s.sample_noise = detail::field<double>(j, "sample_noise", w);
  s.seed = detail::field<std::uint64_t>(j, "seed", w);
  return s;
}

inline std::string dataset_to_jsonl(const IdentityDataset& ds) {
  json header{{"input_dim", ds.input_dim()},
              {"n_samples", ds.size()},
              {"n_identities", ds.identities().size()},
              {"seed", nullptr}};
  if (ds.spec()) {
    header["seed"] = ds.spec()->seed;
    header["spec"] = spec_to_json(*ds.spec());
  }
  std::string out = header.dump() + "\n";
  for (const Sample& s : ds.samples()) {
    out += json{{"sample", s.id}, {"identity", s.identity}, {"x", s.x}}.dump();
    out += "\n";
  }
  return out;
}

inline IdentityDataset dataset_from_jsonl(std::string_view text) {
  const std::string w = "dataset";
  const auto lines = detail::parse_json_lines(text, w);
  if (lines.empty()) throw FormatError("dataset: empty file");
  const json& header = lines.front();
  const auto input_dim = detail::field<std::size_t>(header, "input_dim", w);
  const auto n_samples = detail::field<std::size_t>(header, "n_samples", w);
  const auto n_identities = detail::field<std::size_t>(header, "n_identities", w);
  std::optional<HierarchySpec> spec;
  if (header.contains("spec")) spec = spec_from_json(header["spec"]);

  std::vector<Sample> samples;
  samples.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    Sample s{detail::field<std::uint32_t>(lines[i], "sample", w),
             detail::field<std::uint32_t>(lines[i], "identity", w),
             detail::field<Vector>(lines[i], "x", w)};
    if (s.x.size() != input_dim) {
      throw FormatError("dataset: sample " + std::to_string(s.id) + " has wrong feature dimension");
    }
    samples.push_back(std::move(s));
  }
  if (samples.size() != n_samples) throw FormatError("dataset: header n_samples does not match records");
  IdentityDataset ds(std::move(samples), spec);
  if (ds.identities().size() != n_identities) {
    throw FormatError("dataset: header n_identities does not match records");
  }
  return ds;
}

inline void write_dataset(const fs::path& path, const IdentityDataset& ds) {
  write_file(path, dataset_to_jsonl(ds));
}

inline IdentityDataset read_dataset(const fs::path& path) { return dataset_from_jsonl(read_file(path)); }

// ---- embedding tables -----------------------------------------------------

inline std::string embeddings_to_binary(const std::vector<EmbeddingRecord>& records) {
  if (records.empty()) throw ContractViolation("embedding table: no records");
  const std::size_t dim = records.front().vector.size();
  std::string out(kEmbeddingMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(records.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& r : records) {
    if (r.vector.size() != dim) throw ContractViolation("embedding table: inconsistent dimension");
    detail::put_u32(out, r.identity);
    detail::put_u32(out, r.sample);
    for (double v : r.vector) detail::put_f32(out, v);
  }
  return out;
}

inline std::string embeddings_to_jsonl(const std::vector<EmbeddingRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += json{{"identity", r.identity}, {"sample", r.sample}, {"vector", r.vector}}.dump();
    out += "\n";
  }
  return out;
}

// Accepts either the binary or the JSON-lines form.
inline std::vector<EmbeddingRecord> embeddings_from_bytes(std::string_view bytes) {
  std::vector<EmbeddingRecord> out;
  if (bytes.substr(0, kEmbeddingMagic.size()) == kEmbeddingMagic) {
    detail::ByteReader r(bytes, "embedding table");
    r.expect_magic(kEmbeddingMagic);
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    if (dim == 0) throw FormatError("embedding table: zero dimension");
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      EmbeddingRecord rec;
      rec.identity = r.u32();
      rec.sample = r.u32();
      rec.vector.resize(dim);
      for (double& v : rec.vector) v = r.f32();
      out.push_back(std::move(rec));
    }
    r.expect_end();
    return out;
  }
  const std::string w = "embedding table";
  for (const json& j : detail::parse_json_lines(bytes, w)) {
    out.push_back({detail::field<std::uint32_t>(j, "identity", w),
                   detail::field<std::uint32_t>(j, "sample", w),
                   detail::field<Vector>(j, "vector", w)});
  }
  if (out.empty()) throw FormatError("embedding table: no records");
  return out;
}

inline bool looks_like_embedding_table(std::string_view bytes) {
  return bytes.substr(0, kEmbeddingMagic.size()) == kEmbeddingMagic ||
         (!bytes.empty() && bytes.front() == '{');
}

inline void write_embeddings(const fs::path& path, const std::vector<EmbeddingRecord>& records) {
  write_file(path, embeddings_to_binary(records));
}

inline std::vector<EmbeddingRecord> read_embeddings(const fs::path& path) {
  return embeddings_from_bytes(read_file(path));
}

// ---- checkpoints ----------------------------------------------------------

inline std::string checkpoint_to_bytes(const MlpModel& model) {
  std::string out(kCheckpointMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(model.n_layers()));
  for (std::size_t d : model.layer_dims()) detail::put_u32(out, static_cast<std::uint32_t>(d));
  out.push_back(model.normalize_output() ? char{1} : char{0});
  for (const auto& layer : model.layers()) {
    for (double w : layer.weights) detail::put_f32(out, w);
    for (double b : layer.bias) detail::put_f32(out, b);
  }
  return out;
}

inline MlpModel checkpoint_from_bytes(std::string_view bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 1024) throw FormatError("checkpoint: implausible layer count");
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i <= n_layers; ++i) {
    const std::uint32_t d = r.u32();
    if (d == 0) throw FormatError("checkpoint: zero layer dimension");
    dims.push_back(d);
  }
  const std::uint8_t flag = r.u8();
  if (flag > 1) throw FormatError("checkpoint: bad normalize flag");
  MlpModel model(dims, flag == 1);
  for (auto& layer : model.mutable_layers()) {
    for (double& w : layer.weights) w = r.f32();
    for (double& b : layer.bias) b = r.f32();
  }
  r.expect_end();
  return model;
}

inline void write_checkpoint(const fs::path& path, const MlpModel& model) {
  write_file(path, checkpoint_to_bytes(model));
}

inline MlpModel read_checkpoint(const fs::path& path) { return checkpoint_from_bytes(read_file(path)); }

// Model parameters as the checkpoint stores them (rounded to f32).
inline MlpModel round_to_checkpoint_precision(const MlpModel& model) {
  return checkpoint_from_bytes(checkpoint_to_bytes(model));
}

// ---- training log ---------------------------------------------------------

inline std::string log_to_jsonl(const TrainingLog& log) {
  std::string out;
  for (const LogEntry& e : log) {
    json j{{"iter", e.iter}, {"loss", e.loss}, {"mean_margin", e.mean_margin},
           {"active_frac", e.active_frac}};
    if (e.skipped) j["skipped"] = true;
    out += j.dump();
    out += "\n";
  }
  return out;
}

inline TrainingLog log_from_jsonl(std::string_view text) {
  const std::string w = "training log";
  TrainingLog log;
  for (const json& j : detail::parse_json_lines(text, w)) {
    LogEntry e;
    e.iter = detail::field<std::size_t>(j, "iter", w);
    e.loss = detail::field<double>(j, "loss", w);
    e.mean_margin = detail::field<double>(j, "mean_margin", w);
    e.active_frac = detail::field<double>(j, "active_frac", w);
    e.skipped = j.value("skipped", false);
    log.push_back(e);
  }
  return log;
}

// ---- pairs ----------------------------------------------------------------

inline std::string pairs_to_jsonl(const PairSet& pairs) {
  std::string out;
  for (const auto& p : pairs.pairs) {
    out += json{{"a", p.a}, {"b", p.b}, {"same", p.same}}.dump();
    out += "\n";
  }
  return out;
}

inline PairSet pairs_from_jsonl(std::string_view text) {
  const std::string w = "pair file";
  PairSet out;
  for (const json& j : detail::parse_json_lines(text, w)) {
    out.pairs.push_back({detail::field<std::uint32_t>(j, "a", w),
                         detail::field<std::uint32_t>(j, "b", w),
                         detail::field<bool>(j, "same", w)});
  }
  return out;
}

// Rejects pairs whose label disagrees with the dataset's identity map.
inline void check_pair_labels(const PairSet& pairs, const IdentityDataset& ds) {
  for (const auto& p : pairs.pairs) {
    const bool same = ds.identity_of(p.a) == ds.identity_of(p.b);
    if (same != p.same) {
      throw FormatError("pair (" + std::to_string(p.a) + ", " + std::to_string(p.b) +
                        ") label disagrees with dataset identities");
    }
  }
}

// ---- reports --------------------------------------------------------------

inline json report_to_json(const VerificationReport& r) {
  json roc = json::array();
  for (const auto& p : r.roc_points) roc.push_back({p.false_accept_rate, p.true_accept_rate});
  json thresholds = json::array();
  for (const auto& p : r.roc_points) thresholds.push_back(p.threshold);
  return json{{"best_accuracy", r.best_accuracy},
              {"best_threshold", r.best_threshold},
              {"n_pairs", r.n_pairs},
              {"roc_points", roc},
              {"roc_thresholds", thresholds}};
}

inline VerificationReport report_from_json(const json& j) {
  const std::string w = "verification report";
  VerificationReport r;
  r.best_accuracy = detail::field<double>(j, "best_accuracy", w);
  r.best_threshold = detail::field<double>(j, "best_threshold", w);
  r.n_pairs = j.value("n_pairs", std::size_t{0});
  const auto roc = detail::field<std::vector<std::vector<double>>>(j, "roc_points", w);
  const auto thr = j.value("roc_thresholds", std::vector<double>{});
  for (std::size_t i = 0; i < roc.size(); ++i) {
    if (roc[i].size() != 2) throw FormatError("verification report: roc point must have 2 values");
    r.roc_points.push_back({i < thr.size() ? thr[i] : 0.0, roc[i][0], roc[i][1]});
  }
  return r;
}

inline std::string roc_to_csv(const VerificationReport& r) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,false_accept_rate,true_accept_rate\n";
  for (const auto& p : r.roc_points)
    out << p.threshold << ',' << p.false_accept_rate << ',' << p.true_accept_rate << '\n';
  return out.str();
}

inline json calibration_to_json(const CalibrationReport& c) {
  json triplets = json::array();
  for (const auto& t : c.triplets) triplets.push_back({t.anchor, t.positive, t.negative});
  return json{{"sample_count", c.sample_count},
              {"d_min_observed", c.d_min_observed},
              {"d_max_observed", c.d_max_observed},
              {"suggested_m_min", c.suggested_m_min},
              {"suggested_m_max", c.suggested_m_max},
              {"d_values", c.d_values},
              {"triplets", triplets}};
}

inline CalibrationReport calibration_from_json(const json& j) {
  const std::string w = "calibration report";
  CalibrationReport c;
  c.sample_count = detail::field<std::size_t>(j, "sample_count", w);
  c.d_min_observed = detail::field<double>(j, "d_min_observed", w);
  c.d_max_observed = detail::field<double>(j, "d_max_observed", w);
  c.suggested_m_min = detail::field<double>(j, "suggested_m_min", w);
  c.suggested_m_max = detail::field<double>(j, "suggested_m_max", w);
  c.d_values = detail::field<std::vector<double>>(j, "d_values", w);
  for (const auto& t : detail::field<std::vector<std::vector<std::uint32_t>>>(j, "triplets", w)) {
    if (t.size() != 3) throw FormatError("calibration report: triplet must have 3 ids");
    c.triplets.push_back({t[0], t[1], t[2]});
  }
  return c;
}

}  // namespace tripdist::io
