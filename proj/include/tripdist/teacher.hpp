#pragma once

// Frozen teacher: embeddings, teacher gaps and margin calibration.
//
// Teacher distance is squared Euclidean between unit-norm teacher
// embeddings, the same convention the student's hinge uses.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tripdist/data.hpp"
#include "tripdist/errors.hpp"
#include "tripdist/model.hpp"
#include "tripdist/numerics.hpp"

namespace tripdist {

struct EmbeddingRecord {
  std::uint32_t identity = 0;
  std::uint32_t sample = 0;
  Vector vector;
};

class TeacherOracle {
 public:
  enum class Backing { embedding_table, frozen_model };

  // Rows are L2-normalized on the way in.
  static TeacherOracle from_table(std::vector<EmbeddingRecord> records) {
    if (records.empty()) throw ContractViolation("TeacherOracle: empty embedding table");
    TeacherOracle o;
    o.backing_ = Backing::embedding_table;
    o.dim_ = records.front().vector.size();
    detail::require(o.dim_ >= 1, "TeacherOracle: zero-dimensional embeddings");
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto& r = records[i];
      if (r.vector.size() != o.dim_) {
        throw ContractViolation("TeacherOracle: inconsistent embedding dimension for sample " +
                                std::to_string(r.sample));
      }
      r.vector = l2_normalize(r.vector);
      if (!o.index_.emplace(r.sample, i).second) {
        throw ContractViolation("TeacherOracle: duplicate sample " + std::to_string(r.sample));
      }
    }
    o.table_ = std::make_shared<const std::vector<EmbeddingRecord>>(std::move(records));
    return o;
  }

  // Queries run the frozen model on the dataset's features each time.
  static TeacherOracle from_model(MlpModel model, std::shared_ptr<const IdentityDataset> dataset) {
    detail::require(dataset != nullptr, "TeacherOracle: null dataset");
    detail::require(model.normalize_output(), "TeacherOracle: teacher model must normalize output");
    detail::require(model.input_dim() == dataset->input_dim(),
                    "TeacherOracle: model input dim does not match dataset");
    TeacherOracle o;
    o.backing_ = Backing::frozen_model;
    o.dim_ = model.output_dim();
    o.model_ = std::make_shared<const MlpModel>(std::move(model));
    o.dataset_ = std::move(dataset);
    return o;
  }

  // Runs the model once over every sample and keeps the results as a table.
  static TeacherOracle precompute(const MlpModel& model, const IdentityDataset& dataset) {
    detail::require(model.normalize_output(), "TeacherOracle: teacher model must normalize output");
    std::vector<EmbeddingRecord> records;
    records.reserve(dataset.size());
    for (const Sample& s : dataset.samples()) records.push_back({s.identity, s.id, tripdist::embed(model, s.x)});
    return from_table(std::move(records));
  }

  Backing backing() const { return backing_; }
  std::size_t dim() const { return dim_; }
  const MlpModel* model() const { return model_.get(); }

  bool contains(std::uint32_t sample) const {
    return backing_ == Backing::embedding_table ? index_.count(sample) != 0
                                                : dataset_->contains(sample);
  }

  std::uint32_t identity_of(std::uint32_t sample) const {
    if (backing_ == Backing::embedding_table) return record(sample).identity;
    return dataset_->identity_of(sample);
  }

  Vector embed(std::uint32_t sample) const {
    if (backing_ == Backing::embedding_table) return record(sample).vector;
    return tripdist::embed(*model_, dataset_->sample(sample).x);
  }

  Vector embed_input(std::span<const double> x) const {
    if (backing_ != Backing::frozen_model) {
      throw ContractViolation("TeacherOracle: embed_input needs a model-backed oracle");
    }
    return tripdist::embed(*model_, x);
  }

  double distance(std::uint32_t a, std::uint32_t b) const { return sq_euclidean(embed(a), embed(b)); }

  // Sample ids known to the oracle, ascending.
  std::vector<std::uint32_t> sample_ids() const {
    std::vector<std::uint32_t> ids;
    if (backing_ == Backing::embedding_table) {
      for (const auto& r : *table_) ids.push_back(r.sample);
    } else {
      for (const auto& s : dataset_->samples()) ids.push_back(s.id);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  std::vector<EmbeddingRecord> to_records() const {
    std::vector<EmbeddingRecord> out;
    for (std::uint32_t id : sample_ids()) out.push_back({identity_of(id), id, embed(id)});
    return out;
  }

  // FNV-1a over every embedding in sample-id order; changes iff any answer does.
  std::uint64_t output_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::uint32_t id : sample_ids()) {
      for (double d : embed(id)) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &d, sizeof d);
        for (unsigned char c : bytes) {
          h ^= c;
          h *= 0x100000001b3ULL;
        }
      }
    }
    return h;
  }

 private:
  TeacherOracle() = default;

  const EmbeddingRecord& record(std::uint32_t sample) const {
    auto it = index_.find(sample);
    if (it == index_.end()) throw LookupError("teacher: unknown sample id " + std::to_string(sample));
    return (*table_)[it->second];
  }

  Backing backing_ = Backing::embedding_table;
  std::size_t dim_ = 0;
  std::shared_ptr<const std::vector<EmbeddingRecord>> table_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
  std::shared_ptr<const MlpModel> model_;
  std::shared_ptr<const IdentityDataset> dataset_;
};

inline Vector teacher_embed(const TeacherOracle& oracle, std::uint32_t sample) {
  return oracle.embed(sample);
}

// max(T(a,n) - T(a,p), 0)
inline double teacher_gap_from_distances(double t_an, double t_ap) {
  return std::max(t_an - t_ap, 0.0);
}

inline double teacher_gap(const TeacherOracle& oracle, std::uint32_t a, std::uint32_t p,
                          std::uint32_t n) {
  const std::uint32_t label = oracle.identity_of(a);
  if (oracle.identity_of(p) != label) {
    throw ContractViolation("teacher_gap: positive " + std::to_string(p) +
                            " does not share the anchor's identity");
  }
  if (oracle.identity_of(n) == label) {
    throw ContractViolation("teacher_gap: negative " + std::to_string(n) +
                            " shares the anchor's identity");
  }
  const Vector ea = oracle.embed(a);
  return teacher_gap_from_distances(sq_euclidean(ea, oracle.embed(n)),
                                    sq_euclidean(ea, oracle.embed(p)));
}

struct SampleTriplet {
  std::uint32_t anchor = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;
};

struct CalibrationReport {
  std::size_t sample_count = 0;
  std::vector<SampleTriplet> triplets;  // the sampled triplets, in draw order
  std::vector<double> d_values;         // teacher gap of each sampled triplet
  double d_min_observed = 0.0;
  double d_max_observed = 0.0;
  double suggested_m_min = 0.0;
  double suggested_m_max = 0.0;
};

// Draws n_triplets random valid triplets: anchor uniform over samples whose
// identity has a second sample, positive uniform over the rest of that
// identity, negative uniform over all other identities' samples. Suggested
// bounds are the observed extremes of the teacher gap.
inline CalibrationReport calibrate_margins(const TeacherOracle& oracle, const IdentityDataset& dataset,
                                           std::size_t n_triplets, Rng& rng) {
  detail::require(n_triplets >= 1, "calibrate_margins: n_triplets must be >= 1");
  if (dataset.identities().size() < 2) {
    throw CapacityError("calibrate_margins: dataset needs >= 2 identities to form a triplet");
  }
  std::vector<std::size_t> anchors;
  for (std::uint32_t id : dataset.identities()) {
    const auto members = dataset.members(id);
    if (members.size() >= 2) anchors.insert(anchors.end(), members.begin(), members.end());
  }
  if (anchors.empty()) {
    throw CapacityError("calibrate_margins: no identity has >= 2 samples to form a triplet");
  }

  CalibrationReport report;
  report.sample_count = n_triplets;
  report.d_min_observed = std::numeric_limits<double>::infinity();
  report.d_max_observed = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n_triplets; ++t) {
    const Sample& a = dataset.at(anchors[rng.uniform_index(anchors.size())]);
    const auto same = dataset.members(a.identity);
    std::size_t p_idx = same[rng.uniform_index(same.size() - 1)];
    if (dataset.at(p_idx).id == a.id) p_idx = same.back();
    const std::size_t n_other = dataset.size() - same.size();
    // Walk the dataset skipping the anchor's identity.
    std::size_t pick = rng.uniform_index(n_other);
    std::size_t n_idx = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.at(i).identity == a.identity) continue;
      if (pick-- == 0) {
        n_idx = i;
        break;
      }
    }
    const SampleTriplet tr{a.id, dataset.at(p_idx).id, dataset.at(n_idx).id};
    const double d = teacher_gap(oracle, tr.anchor, tr.positive, tr.negative);
    report.triplets.push_back(tr);
    report.d_values.push_back(d);
    report.d_min_observed = std::min(report.d_min_observed, d);
    report.d_max_observed = std::max(report.d_max_observed, d);
  }
  report.suggested_m_min = report.d_min_observed;
  report.suggested_m_max = report.d_max_observed;
  return report;
}

}  // namespace tripdist
