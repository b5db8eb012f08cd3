#pragma once

// Flat `key = value` experiment configuration.
//
// Every key has a default; unknown keys are rejected. Lines starting with '#'
// and blank lines are ignored. The resolved config (all keys, schema order)
// is what gets echoed next to every artifact and hashed into directory names.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tripdist/data.hpp"
#include "tripdist/errors.hpp"
#include "tripdist/loss.hpp"
#include "tripdist/trainer.hpp"

namespace tripdist {

struct ConfigKey {
  const char* key;
  const char* default_value;
  const char* doc;
};

// clang-format off
inline const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
    {"seed", "0", "master seed; every stage derives a labeled sub-seed from it"},
    {"label", "", "row label for compare; empty derives one from the margin settings"},

    {"data.n_superclusters", "4", "number of superclusters"},
    {"data.identities_per_supercluster", "8", "identities per supercluster"},
    {"data.samples_per_identity", "30", "samples per identity"},
    {"data.input_dim", "16", "raw feature dimension"},
    {"data.supercluster_spread", "1.5", "std-dev of supercluster centers"},
    {"data.identity_spread", "0.5", "std-dev of identity centers around their supercluster"},
    {"data.sample_noise", "0.2", "std-dev of samples around their identity"},

    {"teacher.hidden", "128,128,128", "teacher hidden layer widths"},
    {"teacher.embed_dim", "32", "teacher embedding dimension"},
    {"teacher.iterations", "300", "teacher pre-training iterations"},
    {"teacher.learning_rate", "0.01", "teacher SGD learning rate (constant)"},
    {"teacher.momentum", "0.9", "teacher SGD momentum"},
    {"teacher.margin", "0.1", "fixed triplet margin for teacher pre-training"},
    {"teacher.p", "8", "identities per teacher batch"},
    {"teacher.k", "8", "samples per identity in a teacher batch"},
    {"teacher.mining", "semi_hard", "teacher mining: all | random_per_anchor | semi_hard"},
    {"teacher.accuracy_floor", "0.9", "warn when training-set verification accuracy is below this"},

    {"calibrate.n_triplets", "1000", "random triplets sampled for margin calibration"},

    {"student.hidden", "32,32", "student hidden layer widths"},
    {"student.embed_dim", "16", "student embedding dimension"},

    {"margin.mode", "dynamic", "fixed | dynamic"},
    {"margin.m", "0.3", "fixed margin"},
    {"margin.m_min", "0.2", "smallest dynamic margin"},
    {"margin.m_max", "0.5", "largest dynamic margin"},
    {"margin.from_calibration", "false", "take m_min/m_max from the calibration report"},

    {"distill.iterations", "2000", "fine-tuning iterations"},
    {"distill.learning_rate", "0.001", "fine-tuning SGD learning rate (constant)"},
    {"distill.momentum", "0.9", "fine-tuning SGD momentum"},
    {"distill.p", "10", "identities per batch"},
    {"distill.k", "18", "samples per identity in a batch"},
    {"distill.mining", "semi_hard", "all | random_per_anchor | semi_hard"},
    {"distill.eval_every", "500", "progress report period in iterations (0 = silent)"},

    {"eval.target", "student", "student | teacher"},
    {"eval.n_pos", "3000", "positive verification pairs"},
    {"eval.n_neg", "3000", "negative verification pairs"},
    {"eval.seed", "", "pair sampling seed; empty derives one from seed"},
    {"eval.roc_csv", "true", "also write roc.csv"},

    {"input.dataset", "", "dataset file; empty uses the gen-data artifact for this config"},
    {"input.teacher", "", "teacher checkpoint or embedding table; empty uses train-teacher's"},
    {"input.calibration", "", "calibration report; empty uses calibrate's"},
    {"input.model", "", "evaluate: checkpoint or embedding table to score instead of eval.target"},
  };
  return schema;
}
// clang-format on

class ExperimentConfig {
 public:
  ExperimentConfig() {
    for (const auto& k : config_schema()) values_[k.key] = k.default_value;
  }

  static ExperimentConfig parse(std::string_view text, const std::string& origin = "config") {
    ExperimentConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ContractViolation(origin + ":" + std::to_string(lineno) + ": expected key = value");
      }
      cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ContractViolation("unknown config key '" + key + "'");
    it->second = value;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ContractViolation("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const std::string& v = get(key);
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) bad(key, "an unsigned integer");
    return out;
  }
  std::size_t get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }

  double get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) bad(key, "a number");
      return d;
    } catch (const std::logic_error&) {
      bad(key, "a number");
    }
  }

  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key, "true or false");
  }

  std::vector<std::size_t> get_sizes(const std::string& key) const {
    std::vector<std::size_t> out;
    std::stringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc{} || p != item.data() + item.size() || v == 0) {
        bad(key, "a comma-separated list of positive integers");
      }
      out.push_back(v);
    }
    return out;
  }

  // All keys in schema order, `key = value` per line.
  std::string resolved() const { return render(nullptr); }

  // Only keys whose name starts with one of the prefixes (exact key or "prefix.").
  std::string resolved_subset(const std::vector<std::string>& prefixes) const {
    return render(&prefixes);
  }

  // ---- typed views --------------------------------------------------------

  HierarchySpec hierarchy_spec() const {
    HierarchySpec s;
    s.n_superclusters = get_size("data.n_superclusters");
    s.identities_per_supercluster = get_size("data.identities_per_supercluster");
    s.samples_per_identity = get_size("data.samples_per_identity");
    s.input_dim = get_size("data.input_dim");
    s.supercluster_spread = get_double("data.supercluster_spread");
    s.identity_spread = get_double("data.identity_spread");
    s.sample_noise = get_double("data.sample_noise");
    s.seed = derive_seed(get_u64("seed"), "data");
    return s;
  }

  TeacherConfig teacher_config() const {
    TeacherConfig t;
    t.hidden = get_sizes("teacher.hidden");
    t.embed_dim = get_size("teacher.embed_dim");
    t.iterations = get_size("teacher.iterations");
    t.learning_rate = get_double("teacher.learning_rate");
    t.momentum = get_double("teacher.momentum");
    t.margin = get_double("teacher.margin");
    t.P = get_size("teacher.p");
    t.K = get_size("teacher.k");
    t.mining = parse_mining_strategy(get("teacher.mining"));
    t.accuracy_floor = get_double("teacher.accuracy_floor");
    return t;
  }

  MarginConfig margin_config() const {
    MarginConfig m;
    const std::string& mode = get("margin.mode");
    if (mode == "fixed") {
      m.mode = MarginMode::fixed;
    } else if (mode == "dynamic") {
      m.mode = MarginMode::dynamic;
    } else {
      bad("margin.mode", "fixed or dynamic");
    }
    m.m = get_double("margin.m");
    m.m_min = get_double("margin.m_min");
    m.m_max = get_double("margin.m_max");
    return m;
  }

  DistillConfig distill_config() const {
    DistillConfig d;
    d.margin = margin_config();
    d.P = get_size("distill.p");
    d.K = get_size("distill.k");
    d.iterations = get_size("distill.iterations");
    d.learning_rate = get_double("distill.learning_rate");
    d.momentum = get_double("distill.momentum");
    d.mining = parse_mining_strategy(get("distill.mining"));
    d.seed = derive_seed(get_u64("seed"), "distill");
    d.eval_every = get_size("distill.eval_every");
    return d;
  }

  std::string run_label() const {
    if (!get("label").empty()) return get("label");
    const MarginConfig m = margin_config();
    char buf[96];
    if (m.mode == MarginMode::fixed) {
      std::snprintf(buf, sizeof buf, "fixed m=%g", m.m);
    } else if (get_bool("margin.from_calibration")) {
      std::snprintf(buf, sizeof buf, "dynamic calibrated");
    } else {
      std::snprintf(buf, sizeof buf, "dynamic [%g,%g]", m.m_min, m.m_max);
    }
    return buf;
  }

  std::uint64_t eval_seed() const {
    if (!get("eval.seed").empty()) return get_u64("eval.seed");
    return derive_seed(get_u64("seed"), "eval.pairs");
  }

  // Every typed view parses; spec-level invariants hold.
  void validate() const {
    (void)get_u64("seed");
    hierarchy_spec().validate();
    teacher_config().validate();
    distill_config().validate();
    (void)get_sizes("student.hidden");
    detail::require(get_size("student.embed_dim") >= 1, "student.embed_dim must be >= 1");
    detail::require(get_size("calibrate.n_triplets") >= 1, "calibrate.n_triplets must be >= 1");
    (void)get_bool("margin.from_calibration");
    (void)get_bool("eval.roc_csv");
    (void)eval_seed();
    const std::string& target = get("eval.target");
    if (target != "student" && target != "teacher") bad("eval.target", "student or teacher");
  }

 private:
  [[noreturn]] void bad(const std::string& key, const char* expected) const {
    throw ContractViolation("config key '" + key + "' = '" + get(key) + "' is not " + expected);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::string render(const std::vector<std::string>* prefixes) const {
    std::string out;
    for (const auto& k : config_schema()) {
      const std::string key = k.key;
      if (prefixes) {
        bool keep = false;
        for (const auto& p : *prefixes) {
          if (key == p || key.rfind(p + ".", 0) == 0) keep = true;
        }
        if (!keep) continue;
      }
      out += key + " = " + values_.at(key) + "\n";
    }
    return out;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace tripdist
