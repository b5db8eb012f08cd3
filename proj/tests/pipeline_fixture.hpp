#pragma once

// Scratch directories and a desk-scale config small enough for unit tests.

#include <filesystem>
#include <map>
#include <random>
#include <string>

#include "tripdist/config.hpp"
#include "tripdist/io.hpp"

namespace fixture {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("tripdist-" + tag + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline const char* kTinyConfig = R"(seed = 3
data.n_superclusters = 2
data.identities_per_supercluster = 3
data.samples_per_identity = 6
data.input_dim = 4
teacher.hidden = 8
teacher.embed_dim = 4
teacher.iterations = 20
teacher.p = 3
teacher.k = 3
calibrate.n_triplets = 50
student.hidden = 16
student.embed_dim = 4
distill.iterations = 20
distill.p = 3
distill.k = 3
distill.eval_every = 0
eval.n_pos = 20
eval.n_neg = 20
)";

inline tripdist::ExperimentConfig tiny_config() { return tripdist::ExperimentConfig::parse(kTinyConfig); }

// Relative path -> bytes for every file under root except timestamp sidecars.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "meta.json") continue;
    out[fs::relative(e.path(), root).generic_string()] = tripdist::io::read_file(e.path());
  }
  return out;
}

}  // namespace fixture
