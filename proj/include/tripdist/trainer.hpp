#pragma once

// Teacher pre-training and triplet-distillation fine-tuning loops.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tripdist/data.hpp"
#include "tripdist/errors.hpp"
#include "tripdist/eval.hpp"
#include "tripdist/loss.hpp"
#include "tripdist/model.hpp"
#include "tripdist/numerics.hpp"
#include "tripdist/teacher.hpp"

namespace tripdist {

struct LogEntry {
  std::size_t iter = 0;
  double loss = 0.0;
  double mean_margin = 0.0;
  double active_frac = 0.0;
  bool skipped = false;  // mining produced no triplets

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

using TrainingLog = std::vector<LogEntry>;
using ProgressFn = std::function<void(const LogEntry&)>;

// Give up after this many consecutive batches without a single triplet.
inline constexpr std::size_t kMaxEmptyBatches = 50;

struct DistillConfig {
  MarginConfig margin;
  std::size_t P = 10;
  std::size_t K = 18;
  std::size_t iterations = 2000;
  double learning_rate = 0.001;
  double momentum = 0.9;
  MiningStrategy mining = MiningStrategy::semi_hard;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // progress callback period; 0 disables

  void validate() const {
    margin.validate();
    detail::require(P >= 2, "DistillConfig: P must be >= 2");
    detail::require(K >= 2, "DistillConfig: K must be >= 2");
    detail::require(learning_rate > 0.0, "DistillConfig: learning_rate must be > 0");
    detail::require(momentum >= 0.0 && momentum < 1.0, "DistillConfig: momentum must be in [0, 1)");
  }
};

struct TeacherConfig {
  std::vector<std::size_t> hidden = {128, 128, 128};
  std::size_t embed_dim = 32;
  std::size_t iterations = 1000;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double margin = 0.5;
  std::size_t P = 8;
  std::size_t K = 8;
  MiningStrategy mining = MiningStrategy::semi_hard;
  double accuracy_floor = 0.9;
  std::size_t check_pairs = 500;  // per polarity, capped by availability

  void validate() const {
    detail::require(embed_dim >= 1, "TeacherConfig: embed_dim must be >= 1");
    detail::require(margin >= 0.0, "TeacherConfig: margin must be >= 0");
    detail::require(P >= 2 && K >= 2, "TeacherConfig: P and K must be >= 2");
    detail::require(learning_rate > 0.0, "TeacherConfig: learning_rate must be > 0");
    detail::require(momentum >= 0.0 && momentum < 1.0, "TeacherConfig: momentum must be in [0, 1)");
  }
};

inline std::vector<std::size_t> layer_dims_for(std::size_t input_dim,
                                               const std::vector<std::size_t>& hidden,
                                               std::size_t embed_dim) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(embed_dim);
  return dims;
}

namespace detail {

inline bool all_of_zero(const Vector& v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

struct StepOutcome {
  LogEntry entry;
  bool empty = false;
};

// One PK-batch update. `teacher` is consulted only in dynamic margin mode.
inline StepOutcome triplet_step(MlpModel& model, SgdState& sgd, const IdentityDataset& ds,
                                std::size_t P, std::size_t K, MiningStrategy mining,
                                const MarginConfig& margin, const TeacherOracle* teacher,
                                Rng& rng) {
  const PkBatch batch = sample_pk_batch(ds, P, K, rng);
  std::vector<Vector> emb;
  std::vector<ForwardCache> caches;
  emb.reserve(batch.size());
  caches.reserve(batch.size());
  for (std::size_t idx : batch.entries) {
    auto [e, c] = forward(model, ds.at(idx).x);
    emb.push_back(std::move(e));
    caches.push_back(std::move(c));
  }
  const auto triplets = mine_triplets(batch, emb, mining, rng);

  StepOutcome out;
  out.entry.iter = sgd.iteration;
  if (triplets.empty()) {
    out.empty = true;
    out.entry.skipped = true;
    return out;
  }

  std::vector<double> gaps;
  if (margin.mode == MarginMode::dynamic) {
    detail::require(teacher != nullptr, "dynamic margins need a teacher");
    std::vector<Vector> t_emb;
    t_emb.reserve(batch.size());
    for (std::size_t idx : batch.entries) t_emb.push_back(teacher->embed(ds.at(idx).id));
    gaps.reserve(triplets.size());
    for (const Triplet& t : triplets) {
      gaps.push_back(teacher_gap_from_distances(sq_euclidean(t_emb[t.anchor], t_emb[t.negative]),
                                                sq_euclidean(t_emb[t.anchor], t_emb[t.positive])));
    }
  }
  const BatchLossResult res = batch_loss(emb, triplets, gaps, margin);

  Gradients grads = Gradients::zeros_like(model);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!all_of_zero(res.grads[i])) backward_accumulate(model, caches[i], res.grads[i], grads);
  }
  sgd_step(sgd, model, grads);

  out.entry.loss = res.loss;
  out.entry.mean_margin = res.mean_margin();
  out.entry.active_frac = res.active_fraction();
  return out;
}

}  // namespace detail

struct DistillResult {
  MlpModel student;
  TrainingLog log;
};

// Fine-tunes the student with teacher-driven (or fixed) margins. Teacher gaps
// come from the oracle's own embeddings of each batch entry.
inline DistillResult distill(const IdentityDataset& ds, const TeacherOracle& teacher,
                             MlpModel student, const DistillConfig& cfg,
                             const ProgressFn& progress = {}) {
  cfg.validate();
  detail::require(student.input_dim() == ds.input_dim(),
                  "distill: student input dim does not match dataset");
  if (cfg.margin.mode == MarginMode::dynamic) {
    for (const Sample& s : ds.samples()) {
      if (!teacher.contains(s.id)) {
        throw LookupError("distill: teacher has no embedding for sample " + std::to_string(s.id));
      }
    }
  }
  DistillResult out;
  SgdState sgd(student, cfg.learning_rate, cfg.momentum);
  Rng rng(cfg.seed);
  std::size_t empty_run = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto step = detail::triplet_step(student, sgd, ds, cfg.P, cfg.K, cfg.mining, cfg.margin,
                                     &teacher, rng);
    step.entry.iter = it;
    if (step.empty) {
      if (++empty_run > kMaxEmptyBatches) {
        throw StagnationError("distill: no triplets mined for " + std::to_string(empty_run) +
                              " consecutive batches");
      }
    } else {
      empty_run = 0;
    }
    out.log.push_back(step.entry);
    if (progress && cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0) progress(step.entry);
  }
  out.student = std::move(student);
  return out;
}

struct TeacherTrainingResult {
  MlpModel model;
  TeacherOracle oracle;
  double train_accuracy = 0.0;
  std::optional<std::string> warning;
  TrainingLog log;
};

// Trains a fresh MLP with fixed-margin triplet loss and freezes it.
// Sub-seeds: "teacher.init" for weights, "teacher.batches" for batches and
// mining, "teacher.pairs" for the training-set verification check.
inline TeacherTrainingResult train_teacher(std::shared_ptr<const IdentityDataset> ds,
                                           const TeacherConfig& cfg, std::uint64_t seed,
                                           const ProgressFn& progress = {},
                                           std::size_t progress_every = 0) {
  detail::require(ds != nullptr, "train_teacher: null dataset");
  cfg.validate();
  std::size_t eligible = 0;
  for (std::uint32_t id : ds->identities()) eligible += ds->members(id).size() >= cfg.K ? 1 : 0;
  if (ds->identities().size() < 2 || eligible < cfg.P) {
    throw CapacityError("train_teacher: dataset too small for P=" + std::to_string(cfg.P) +
                        ", K=" + std::to_string(cfg.K) + " batches");
  }

  MlpModel model = MlpModel::glorot(layer_dims_for(ds->input_dim(), cfg.hidden, cfg.embed_dim),
                                    true, derive_seed(seed, "teacher.init"));
  SgdState sgd(model, cfg.learning_rate, cfg.momentum);
  Rng rng(derive_seed(seed, "teacher.batches"));
  const MarginConfig margin = MarginConfig::fixed(cfg.margin);
  TrainingLog log;
  std::size_t empty_run = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    auto step = detail::triplet_step(model, sgd, *ds, cfg.P, cfg.K, cfg.mining, margin, nullptr, rng);
    step.entry.iter = it;
    empty_run = step.empty ? empty_run + 1 : 0;
    if (empty_run > kMaxEmptyBatches) throw StagnationError("train_teacher: mining keeps failing");
    log.push_back(step.entry);
    if (progress && progress_every > 0 && (it + 1) % progress_every == 0) progress(step.entry);
  }

  TeacherTrainingResult out{model, TeacherOracle::from_model(model, ds), 0.0, std::nullopt,
                            std::move(log)};
  std::size_t total_pos = 0;
  for (std::uint32_t id : ds->identities()) {
    const std::size_t k = ds->members(id).size();
    total_pos += k * (k - 1) / 2;
  }
  const std::size_t n = ds->size();
  const std::size_t total_neg = n * (n - 1) / 2 - total_pos;
  Rng pair_rng(derive_seed(seed, "teacher.pairs"));
  const PairSet pairs = build_pairs(*ds, std::min(cfg.check_pairs, total_pos),
                                    std::min(cfg.check_pairs, total_neg), pair_rng);
  out.train_accuracy = verify(out.oracle, pairs).best_accuracy;
  if (cfg.iterations == 0) {
    out.warning = "teacher was not trained (zero-iteration budget)";
  } else if (out.train_accuracy < cfg.accuracy_floor) {
    out.warning = "under-trained teacher: training-set verification accuracy " +
                  std::to_string(out.train_accuracy) + " is below the floor " +
                  std::to_string(cfg.accuracy_floor);
  }
  return out;
}

}  // namespace tripdist
