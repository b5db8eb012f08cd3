#pragma once

// Pipeline stages behind the command-line tool.
//
// Each stage writes into <out>/<stage>-<hash>/ where <hash> is FNV-1a over
// the resolved config keys that stage depends on. Downstream stages find
// their inputs by recomputing upstream directory names from the same config,
// unless an input.* key points somewhere else. Every stage directory gets
// config.txt (the resolved config) and meta.json (timestamp sidecar, the only
// non-deterministic file).

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tripdist/config.hpp"
#include "tripdist/data.hpp"
#include "tripdist/errors.hpp"
#include "tripdist/eval.hpp"
#include "tripdist/io.hpp"
#include "tripdist/model.hpp"
#include "tripdist/teacher.hpp"
#include "tripdist/trainer.hpp"

namespace tripdist::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct Options {
  fs::path out_root = "runs";
  bool quiet = false;
  std::ostream* out = &std::cout;
  std::string command_line;
};

struct StageOutput {
  fs::path dir;
  std::vector<fs::path> artifacts;
};

enum class Stage { data, teacher, calibrate, distill, evaluate };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::data: return "data";
    case Stage::teacher: return "teacher";
    case Stage::calibrate: return "calibrate";
    case Stage::distill: return "distill";
    case Stage::evaluate: return "evaluate";
  }
  return "?";
}

inline const char* producing_command(Stage s) {
  switch (s) {
    case Stage::data: return "gen-data";
    case Stage::teacher: return "train-teacher";
    case Stage::calibrate: return "calibrate";
    case Stage::distill: return "distill";
    case Stage::evaluate: return "evaluate";
  }
  return "?";
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::vector<std::string> stage_keys(const ExperimentConfig& cfg, Stage s) {
  std::vector<std::string> keys{"seed", "data", "input.dataset"};
  if (s == Stage::data) return {"seed", "data"};
  keys.insert(keys.end(), {"teacher", "input.teacher"});
  if (s == Stage::teacher) return {"seed", "data", "input.dataset", "teacher"};
  if (s == Stage::calibrate) {
    keys.push_back("calibrate");
    return keys;
  }
  keys.insert(keys.end(), {"student", "margin", "distill"});
  if (cfg.get_bool("margin.from_calibration")) keys.insert(keys.end(), {"calibrate", "input.calibration"});
  if (s == Stage::distill) return keys;
  keys.insert(keys.end(), {"eval", "label", "input.model"});
  return keys;
}

inline std::string stage_hash(const ExperimentConfig& cfg, Stage s) {
  return hex64(fnv1a64(cfg.resolved_subset(stage_keys(cfg, s))));
}

inline fs::path stage_dir(const ExperimentConfig& cfg, const Options& opt, Stage s) {
  return opt.out_root / (std::string(stage_name(s)) + "-" + stage_hash(cfg, s).substr(0, 12));
}

inline fs::path dataset_path(const ExperimentConfig& cfg, const Options& opt) {
  if (!cfg.get("input.dataset").empty()) return cfg.get("input.dataset");
  return stage_dir(cfg, opt, Stage::data) / "dataset.jsonl";
}

inline fs::path teacher_path(const ExperimentConfig& cfg, const Options& opt) {
  if (!cfg.get("input.teacher").empty()) return cfg.get("input.teacher");
  return stage_dir(cfg, opt, Stage::teacher) / "teacher_embeddings.tfemb";
}

inline fs::path calibration_path(const ExperimentConfig& cfg, const Options& opt) {
  if (!cfg.get("input.calibration").empty()) return cfg.get("input.calibration");
  return stage_dir(cfg, opt, Stage::calibrate) / "calibration.json";
}

inline fs::path student_path(const ExperimentConfig& cfg, const Options& opt) {
  return stage_dir(cfg, opt, Stage::distill) / "student.tfmlp";
}

namespace detail {

inline void require_upstream(const fs::path& path, Stage producer) {
  if (!fs::exists(path)) {
    throw IoError("missing upstream artifact '" + path.string() + "' (run `tripdist " +
                  producing_command(producer) + "` with the same config first)");
  }
}

inline std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void say(const Options& opt, const std::string& line) {
  if (!opt.quiet && opt.out) *opt.out << line << "\n";
}

inline std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

// Re-reads an artifact with the matching parser.
inline void validate_artifact(const fs::path& path) {
  const std::string bytes = io::read_file(path);
  const std::string ext = path.extension().string();
  if (path.filename() == "dataset.jsonl") {
    (void)io::dataset_from_jsonl(bytes);
  } else if (ext == ".tfmlp") {
    (void)io::checkpoint_from_bytes(bytes);
  } else if (ext == ".tfemb") {
    (void)io::embeddings_from_bytes(bytes);
  } else if (ext == ".json") {
    if (!json::accept(bytes)) throw FormatError(path.string() + ": malformed JSON");
  } else if (ext == ".jsonl") {
    (void)io::detail::parse_json_lines(bytes, path.string());
  } else if (bytes.empty()) {
    throw FormatError(path.string() + ": empty artifact");
  }
}

class StageWriter {
 public:
  StageWriter(const ExperimentConfig& cfg, const Options& opt, Stage s)
      : cfg_(cfg), opt_(opt), stage_(s), dir_(stage_dir(cfg, opt, s)) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  fs::path write(const std::string& name, std::string_view bytes) {
    const fs::path p = dir_ / name;
    io::write_file(p, bytes);
    artifacts_.push_back(p);
    return p;
  }

  StageOutput finish() {
    write("config.txt", cfg_.resolved());
    for (const auto& p : artifacts_) validate_artifact(p);
    json meta{{"stage", stage_name(stage_)},
              {"created_utc", timestamp_utc()},
              {"command", opt_.command_line},
              {"config_hash", stage_hash(cfg_, stage_)}};
    io::write_file(dir_ / "meta.json", meta.dump(2) + "\n");
    return {dir_, artifacts_};
  }

 private:
  const ExperimentConfig& cfg_;
  const Options& opt_;
  Stage stage_;
  fs::path dir_;
  std::vector<fs::path> artifacts_;
};

}  // namespace detail

inline std::shared_ptr<const IdentityDataset> load_dataset(const ExperimentConfig& cfg,
                                                           const Options& opt) {
  const fs::path p = dataset_path(cfg, opt);
  detail::require_upstream(p, Stage::data);
  return std::make_shared<const IdentityDataset>(io::read_dataset(p));
}

// Checkpoint or embedding table, told apart by content.
inline TeacherOracle load_oracle(const fs::path& path, const IdentityDataset& ds) {
  const std::string bytes = io::read_file(path);
  if (bytes.rfind("TFMLP", 0) == 0) {
    const MlpModel model = io::checkpoint_from_bytes(bytes);
    if (!model.normalize_output()) {
      throw FormatError(path.string() + ": model does not normalize its output");
    }
    return TeacherOracle::precompute(model, ds);
  }
  if (bytes.rfind("TFEMB", 0) == 0 && bytes.rfind(io::kEmbeddingMagic, 0) != 0) {
    throw FormatError(path.string() + ": unsupported embedding table version");
  }
  if (!io::looks_like_embedding_table(bytes)) {
    throw FormatError(path.string() + ": neither a checkpoint nor an embedding table");
  }
  return TeacherOracle::from_table(io::embeddings_from_bytes(bytes));
}

inline TeacherOracle load_teacher(const ExperimentConfig& cfg, const Options& opt,
                                  const IdentityDataset& ds) {
  const fs::path p = teacher_path(cfg, opt);
  detail::require_upstream(p, Stage::teacher);
  return load_oracle(p, ds);
}

// ---- gen-data -------------------------------------------------------------

inline StageOutput cmd_gen_data(const ExperimentConfig& cfg, const Options& opt) {
  cfg.validate();
  const IdentityDataset ds = generate_hierarchical(cfg.hierarchy_spec());
  detail::StageWriter w(cfg, opt, Stage::data);
  w.write("dataset.jsonl", io::dataset_to_jsonl(ds));
  auto out = w.finish();
  detail::say(opt, "gen-data: " + std::to_string(ds.size()) + " samples, " +
                       std::to_string(ds.identities().size()) + " identities, dim " +
                       std::to_string(ds.input_dim()) + " -> " + (out.dir / "dataset.jsonl").string());
  return out;
}

// ---- train-teacher --------------------------------------------------------

inline StageOutput cmd_train_teacher(const ExperimentConfig& cfg, const Options& opt) {
  cfg.validate();
  const auto ds = load_dataset(cfg, opt);
  const TeacherConfig tc = cfg.teacher_config();
  ProgressFn progress;
  if (!opt.quiet) {
    progress = [&opt](const LogEntry& e) {
      detail::say(opt, "  teacher iter " + std::to_string(e.iter + 1) + " loss " + detail::fmt(e.loss));
    };
  }
  const auto res = train_teacher(ds, tc, derive_seed(cfg.get_u64("seed"), "teacher"), progress,
                                 std::max<std::size_t>(tc.iterations / 5, 1));
  // Downstream stages see exactly what the checkpoint holds.
  const MlpModel stored = io::round_to_checkpoint_precision(res.model);
  const TeacherOracle table = TeacherOracle::precompute(stored, *ds);

  detail::StageWriter w(cfg, opt, Stage::teacher);
  w.write("teacher.tfmlp", io::checkpoint_to_bytes(stored));
  w.write("teacher_embeddings.tfemb", io::embeddings_to_binary(table.to_records()));
  w.write("train_log.jsonl", io::log_to_jsonl(res.log));
  json summary{{"train_accuracy", res.train_accuracy},
               {"iterations", tc.iterations},
               {"layer_dims", stored.layer_dims()},
               {"warning", res.warning ? json(*res.warning) : json(nullptr)}};
  w.write("summary.json", summary.dump(2) + "\n");
  auto out = w.finish();
  if (res.warning) detail::say(opt, "train-teacher: warning: " + *res.warning);
  detail::say(opt, "train-teacher: training-set verification accuracy " +
                       detail::fmt(res.train_accuracy) + " -> " + out.dir.string());
  return out;
}

// ---- calibrate ------------------------------------------------------------

inline StageOutput cmd_calibrate(const ExperimentConfig& cfg, const Options& opt) {
  cfg.validate();
  const auto ds = load_dataset(cfg, opt);
  const TeacherOracle teacher = load_teacher(cfg, opt, *ds);
  Rng rng(derive_seed(cfg.get_u64("seed"), "calibrate"));
  const auto report = calibrate_margins(teacher, *ds, cfg.get_size("calibrate.n_triplets"), rng);
  detail::StageWriter w(cfg, opt, Stage::calibrate);
  w.write("calibration.json", io::calibration_to_json(report).dump(2) + "\n");
  auto out = w.finish();
  detail::say(opt, "calibrate: " + std::to_string(report.sample_count) + " triplets, d in [" +
                       detail::fmt(report.d_min_observed) + ", " +
                       detail::fmt(report.d_max_observed) + "] -> " + out.dir.string());
  return out;
}

// ---- distill --------------------------------------------------------------

inline MlpModel initial_student(const ExperimentConfig& cfg, std::size_t input_dim) {
  return MlpModel::glorot(
      layer_dims_for(input_dim, cfg.get_sizes("student.hidden"), cfg.get_size("student.embed_dim")),
      true, derive_seed(cfg.get_u64("seed"), "student.init"));
}

inline DistillConfig resolved_distill_config(const ExperimentConfig& cfg, const Options& opt) {
  DistillConfig dc = cfg.distill_config();
  if (dc.margin.mode == MarginMode::dynamic && cfg.get_bool("margin.from_calibration")) {
    const fs::path p = calibration_path(cfg, opt);
    detail::require_upstream(p, Stage::calibrate);
    json j;
    try {
      j = json::parse(io::read_file(p));
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
    const auto report = io::calibration_from_json(j);
    dc.margin.m_min = report.suggested_m_min;
    dc.margin.m_max = report.suggested_m_max;
  }
  return dc;
}

inline StageOutput cmd_distill(const ExperimentConfig& cfg, const Options& opt) {
  cfg.validate();
  const auto ds = load_dataset(cfg, opt);
  const TeacherOracle teacher = load_teacher(cfg, opt, *ds);
  const DistillConfig dc = resolved_distill_config(cfg, opt);
  ProgressFn progress;
  if (!opt.quiet) {
    progress = [&opt](const LogEntry& e) {
      detail::say(opt, "  distill iter " + std::to_string(e.iter + 1) + " loss " + detail::fmt(e.loss) +
                           " margin " + detail::fmt(e.mean_margin) + " active " +
                           detail::fmt(e.active_frac));
    };
  }
  const auto res = distill(*ds, teacher, initial_student(cfg, ds->input_dim()), dc, progress);

  detail::StageWriter w(cfg, opt, Stage::distill);
  w.write("student.tfmlp", io::checkpoint_to_bytes(res.student));
  w.write("train_log.jsonl", io::log_to_jsonl(res.log));
  json summary{{"label", cfg.run_label()},
               {"margin_mode", to_string(dc.margin.mode)},
               {"m", dc.margin.m},
               {"m_min", dc.margin.m_min},
               {"m_max", dc.margin.m_max},
               {"iterations", dc.iterations},
               {"final_loss", res.log.empty() ? 0.0 : res.log.back().loss}};
  w.write("summary.json", summary.dump(2) + "\n");
  auto out = w.finish();
  detail::say(opt, "distill: " + cfg.run_label() + ", " + std::to_string(dc.iterations) +
                       " iterations -> " + out.dir.string());
  return out;
}

// ---- evaluate -------------------------------------------------------------

inline StageOutput cmd_evaluate(const ExperimentConfig& cfg, const Options& opt) {
  cfg.validate();
  const auto ds = load_dataset(cfg, opt);
  const std::string target = cfg.get("eval.target");

  std::optional<MlpModel> model;
  std::optional<TeacherOracle> table;
  if (!cfg.get("input.model").empty()) {
    const fs::path p = cfg.get("input.model");
    if (!fs::exists(p)) throw IoError("missing model artifact '" + p.string() + "'");
    const std::string bytes = io::read_file(p);
    if (bytes.rfind("TFMLP", 0) == 0) {
      model = io::checkpoint_from_bytes(bytes);
    } else {
      table = load_oracle(p, *ds);
    }
  } else if (target == "student") {
    const fs::path p = student_path(cfg, opt);
    detail::require_upstream(p, Stage::distill);
    model = io::read_checkpoint(p);
  } else {
    table = load_teacher(cfg, opt, *ds);
  }
  if (model && model->input_dim() != ds->input_dim()) {
    throw FormatError("evaluate: model input dim does not match dataset");
  }

  Rng rng(cfg.eval_seed());
  const PairSet pairs = build_pairs(*ds, cfg.get_size("eval.n_pos"), cfg.get_size("eval.n_neg"), rng);
  const VerificationReport report = model ? verify(*model, *ds, pairs) : verify(*table, pairs);

  // Structure preservation against the teacher, when there is one to compare to.
  std::optional<double> corr;
  const bool scoring_teacher = cfg.get("input.model").empty() && target == "teacher";
  const fs::path tp = teacher_path(cfg, opt);
  if (!scoring_teacher) {
    if (!cfg.get("input.teacher").empty() && !fs::exists(tp)) detail::require_upstream(tp, Stage::teacher);
    if (fs::exists(tp)) {
      const TeacherOracle teacher = load_oracle(tp, *ds);
      const DistanceMatrix tm = centroid_distance_matrix(teacher, *ds);
      const DistanceMatrix sm = model ? centroid_distance_matrix(*model, *ds)
                                      : centroid_distance_matrix(*table, *ds);
      if (tm.n() >= 3) corr = structure_correlation(tm, sm);
    }
  }

  json j = io::report_to_json(report);
  j["label"] = scoring_teacher ? std::string("teacher") : cfg.run_label();
  j["seed"] = cfg.get_u64("seed");
  j["target"] = cfg.get("input.model").empty() ? target : cfg.get("input.model");
  j["structure_correlation"] = corr ? json(*corr) : json(nullptr);

  detail::StageWriter w(cfg, opt, Stage::evaluate);
  w.write("pairs.jsonl", io::pairs_to_jsonl(pairs));
  w.write("report.json", j.dump(2) + "\n");
  if (cfg.get_bool("eval.roc_csv")) w.write("roc.csv", io::roc_to_csv(report));
  auto out = w.finish();
  detail::say(opt, "evaluate: " + j["label"].get<std::string>() + " accuracy " +
                       detail::fmt(report.best_accuracy) + " threshold " +
                       detail::fmt(report.best_threshold) +
                       (corr ? " structure_correlation " + detail::fmt(*corr) : std::string()) +
                       " -> " + out.dir.string());
  return out;
}

// ---- compare --------------------------------------------------------------

struct ComparisonRow {
  std::string kind;  // "run" or "mean"
  std::string label;
  std::optional<std::uint64_t> seed;  // runs only
  double best_accuracy = 0.0;
  std::optional<double> structure_correlation;
  std::size_t runs = 1;

  friend bool operator==(const ComparisonRow&, const ComparisonRow&) = default;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  friend bool operator==(const ComparisonTable&, const ComparisonTable&) = default;
};

inline std::vector<fs::path> find_reports(const std::vector<fs::path>& roots) {
  std::vector<fs::path> out;
  for (const auto& root : roots) {
    if (fs::is_regular_file(root)) {
      out.push_back(root);
      continue;
    }
    if (!fs::is_directory(root)) throw IoError("compare: '" + root.string() + "' does not exist");
    if (fs::exists(root / "report.json")) {
      out.push_back(root / "report.json");
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file() && e.path().filename() == "report.json") found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

// One row per report, then one mean row per label in first-seen order.
inline ComparisonTable build_comparison(const std::vector<fs::path>& reports) {
  ComparisonTable table;
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ComparisonRow*>> by_label;
  table.rows.reserve(reports.size() * 2);
  for (const auto& p : reports) {
    json j;
    try {
      j = json::parse(io::read_file(p));
    } catch (const json::exception& e) {
      throw FormatError(p.string() + ": " + e.what());
    }
    ComparisonRow r;
    r.kind = "run";
    r.label = j.value("label", std::string("?"));
    if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::uint64_t>();
    r.best_accuracy = io::report_from_json(j).best_accuracy;
    if (j.contains("structure_correlation") && !j["structure_correlation"].is_null()) {
      r.structure_correlation = j["structure_correlation"].get<double>();
    }
    table.rows.push_back(r);
  }
  for (const auto& r : table.rows) {
    if (!by_label.count(r.label)) order.push_back(r.label);
    by_label[r.label].push_back(&r);
  }
  std::vector<ComparisonRow> means;
  for (const auto& label : order) {
    const auto& rows = by_label[label];
    ComparisonRow m;
    m.kind = "mean";
    m.label = label;
    m.runs = rows.size();
    double acc = 0.0, corr = 0.0;
    std::size_t n_corr = 0;
    for (const auto* r : rows) {
      acc += r->best_accuracy;
      if (r->structure_correlation) {
        corr += *r->structure_correlation;
        ++n_corr;
      }
    }
    m.best_accuracy = acc / static_cast<double>(rows.size());
    if (n_corr > 0) m.structure_correlation = corr / static_cast<double>(n_corr);
    means.push_back(m);
  }
  table.rows.insert(table.rows.end(), means.begin(), means.end());
  return table;
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline constexpr const char* kComparisonCsvHeader =
    "kind,label,seed,best_accuracy,structure_correlation,runs";

inline std::string comparison_to_csv(const ComparisonTable& t) {
  std::string out = std::string(kComparisonCsvHeader) + "\n";
  for (const auto& r : t.rows) {
    out += r.kind + "," + detail::csv_quote(r.label) + "," +
           (r.seed ? std::to_string(*r.seed) : std::string()) + "," +
           detail::num17(r.best_accuracy) + "," +
           (r.structure_correlation ? detail::num17(*r.structure_correlation) : std::string()) +
           "," + std::to_string(r.runs) + "\n";
  }
  return out;
}

inline ComparisonTable comparison_from_csv(const std::string& text) {
  ComparisonTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kComparisonCsvHeader) {
    throw FormatError("comparison csv: bad header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::csv_split(line);
    if (f.size() != 6) throw FormatError("comparison csv: expected 6 fields");
    ComparisonRow r;
    r.kind = f[0];
    r.label = f[1];
    if (!f[2].empty()) r.seed = std::stoull(f[2]);
    r.best_accuracy = std::stod(f[3]);
    if (!f[4].empty()) r.structure_correlation = std::stod(f[4]);
    r.runs = std::stoull(f[5]);
    t.rows.push_back(r);
  }
  return t;
}

inline std::string comparison_to_text(const ComparisonTable& t) {
  std::size_t w = 5;
  for (const auto& r : t.rows) w = std::max(w, r.label.size());
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s  %-*s  %6s  %9s  %10s\n", "kind", static_cast<int>(w), "label",
                "seed", "accuracy", "structure");
  out << buf;
  for (const auto& r : t.rows) {
    const std::string seed = r.seed ? std::to_string(*r.seed) : (r.kind == "mean" ? "n=" + std::to_string(r.runs) : "");
    const std::string corr = r.structure_correlation ? detail::fmt(*r.structure_correlation) : "-";
    std::snprintf(buf, sizeof buf, "%-4s  %-*s  %6s  %9s  %10s\n", r.kind.c_str(), static_cast<int>(w),
                  r.label.c_str(), seed.c_str(), detail::fmt(r.best_accuracy).c_str(), corr.c_str());
    out << buf;
  }
  return out.str();
}

inline ComparisonTable cmd_compare(const std::vector<fs::path>& runs, const Options& opt) {
  const auto reports = find_reports(runs);
  if (reports.empty()) throw IoError("compare: no evaluation reports found");
  if (reports.size() < 2) throw InsufficientData("compare: need at least 2 evaluation reports");
  const ComparisonTable table = build_comparison(reports);
  fs::create_directories(opt.out_root);
  const std::string csv = comparison_to_csv(table);
  io::write_file(opt.out_root / "comparison.csv", csv);
  io::write_file(opt.out_root / "comparison.txt", comparison_to_text(table));
  if (comparison_from_csv(io::read_file(opt.out_root / "comparison.csv")).rows.size() != table.rows.size()) {
    throw FormatError("compare: comparison.csv failed validation");
  }
  if (!opt.quiet && opt.out) *opt.out << comparison_to_text(table);
  return table;
}

}  // namespace tripdist::pipeline
