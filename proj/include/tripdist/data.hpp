#pragma once

// Synthetic identity datasets, PK mini-batches and in-batch triplet mining.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tripdist/errors.hpp"
#include "tripdist/loss.hpp"
#include "tripdist/numerics.hpp"

namespace tripdist {

// Three-level Gaussian hierarchy: superclusters -> identities -> samples.
// Identities that share a supercluster resemble each other more than
// identities from different superclusters.
struct HierarchySpec {
  std::size_t n_superclusters = 4;
  std::size_t identities_per_supercluster = 8;
  std::size_t samples_per_identity = 30;
  std::size_t input_dim = 16;
  double supercluster_spread = 1.5;
  double identity_spread = 0.5;
  double sample_noise = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(n_superclusters >= 1, "HierarchySpec: n_superclusters must be >= 1");
    detail::require(identities_per_supercluster >= 1,
                    "HierarchySpec: identities_per_supercluster must be >= 1");
    detail::require(samples_per_identity >= 1, "HierarchySpec: samples_per_identity must be >= 1");
    detail::require(input_dim >= 1, "HierarchySpec: input_dim must be >= 1");
    detail::require(sample_noise > 0.0, "HierarchySpec: sample_noise must be > 0");
    detail::require(sample_noise < identity_spread,
                    "HierarchySpec: sample_noise must be < identity_spread");
    detail::require(identity_spread < supercluster_spread,
                    "HierarchySpec: identity_spread must be < supercluster_spread");
  }
};

struct Sample {
  std::uint32_t id = 0;
  std::uint32_t identity = 0;
  Vector x;
};

// Immutable collection of labeled samples.
class IdentityDataset {
 public:
  IdentityDataset() = default;

  explicit IdentityDataset(std::vector<Sample> samples, std::optional<HierarchySpec> spec = {})
      : samples_(std::move(samples)), spec_(spec) {
    if (samples_.empty()) throw ContractViolation("IdentityDataset: no samples");
    input_dim_ = samples_.front().x.size();
    detail::require(input_dim_ >= 1, "IdentityDataset: empty feature vectors");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const Sample& s = samples_[i];
      if (s.x.size() != input_dim_) {
        throw ContractViolation("IdentityDataset: sample " + std::to_string(s.id) +
                                " has inconsistent feature dimension");
      }
      if (!all_finite(s.x)) {
        throw ContractViolation("IdentityDataset: sample " + std::to_string(s.id) +
                                " has non-finite features");
      }
      if (!index_of_.emplace(s.id, i).second) {
        throw ContractViolation("IdentityDataset: duplicate sample id " + std::to_string(s.id));
      }
      by_identity_[s.identity].push_back(i);
    }
    identities_.reserve(by_identity_.size());
    for (const auto& [id, _] : by_identity_) identities_.push_back(id);
  }

  std::size_t size() const { return samples_.size(); }
  std::size_t input_dim() const { return input_dim_; }
  const std::optional<HierarchySpec>& spec() const { return spec_; }
  std::span<const Sample> samples() const { return samples_; }
  const Sample& at(std::size_t index) const { return samples_.at(index); }

  // Sorted identity ids.
  std::span<const std::uint32_t> identities() const { return identities_; }

  // Dataset indices of one identity's samples, in dataset order.
  std::span<const std::size_t> members(std::uint32_t identity) const {
    auto it = by_identity_.find(identity);
    if (it == by_identity_.end()) {
      throw LookupError("unknown identity " + std::to_string(identity));
    }
    return it->second;
  }

  std::size_t index_of(std::uint32_t sample_id) const {
    auto it = index_of_.find(sample_id);
    if (it == index_of_.end()) throw LookupError("unknown sample id " + std::to_string(sample_id));
    return it->second;
  }
  bool contains(std::uint32_t sample_id) const { return index_of_.count(sample_id) != 0; }
  const Sample& sample(std::uint32_t sample_id) const { return samples_[index_of(sample_id)]; }
  std::uint32_t identity_of(std::uint32_t sample_id) const { return sample(sample_id).identity; }

 private:
  std::vector<Sample> samples_;
  std::optional<HierarchySpec> spec_;
  std::size_t input_dim_ = 0;
  std::unordered_map<std::uint32_t, std::size_t> index_of_;
  std::map<std::uint32_t, std::vector<std::size_t>> by_identity_;
  std::vector<std::uint32_t> identities_;
};

struct GeneratedHierarchy {
  IdentityDataset dataset;
  std::vector<Vector> supercluster_centers;
  std::vector<Vector> identity_centers;        // indexed by identity id
  std::vector<std::size_t> supercluster_of;    // indexed by identity id
};

// Identity ids run 0.. in supercluster-major order; sample ids run 0.. in
// identity-major order. All draws come from Rng(spec.seed).
inline GeneratedHierarchy generate_hierarchical_detailed(const HierarchySpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t dim = spec.input_dim;
  auto gaussian = [&](const Vector& center, double scale) {
    Vector v(dim);
    for (std::size_t i = 0; i < dim; ++i) v[i] = center[i] + scale * rng.normal();
    return v;
  };

  GeneratedHierarchy out;
  const Vector origin(dim, 0.0);
  for (std::size_t s = 0; s < spec.n_superclusters; ++s) {
    out.supercluster_centers.push_back(gaussian(origin, spec.supercluster_spread));
  }
  for (std::size_t s = 0; s < spec.n_superclusters; ++s) {
    for (std::size_t j = 0; j < spec.identities_per_supercluster; ++j) {
      out.identity_centers.push_back(gaussian(out.supercluster_centers[s], spec.identity_spread));
      out.supercluster_of.push_back(s);
    }
  }
  std::vector<Sample> samples;
  samples.reserve(out.identity_centers.size() * spec.samples_per_identity);
  std::uint32_t next_id = 0;
  for (std::size_t id = 0; id < out.identity_centers.size(); ++id) {
    for (std::size_t k = 0; k < spec.samples_per_identity; ++k) {
      samples.push_back(
          {next_id++, static_cast<std::uint32_t>(id), gaussian(out.identity_centers[id], spec.sample_noise)});
    }
  }
  out.dataset = IdentityDataset(std::move(samples), spec);
  return out;
}

inline IdentityDataset generate_hierarchical(const HierarchySpec& spec) {
  return generate_hierarchical_detailed(spec).dataset;
}

// P identities x K samples; entries are dataset indices, identity-major.
struct PkBatch {
  std::size_t P = 0;
  std::size_t K = 0;
  std::vector<std::size_t> entries;
  std::vector<std::uint32_t> labels;  // identity of each entry

  std::size_t size() const { return entries.size(); }
};

inline PkBatch sample_pk_batch(const IdentityDataset& ds, std::size_t P, std::size_t K, Rng& rng) {
  detail::require(P >= 1 && K >= 1, "sample_pk_batch: P and K must be >= 1");
  std::vector<std::uint32_t> eligible;
  for (std::uint32_t id : ds.identities()) {
    if (ds.members(id).size() >= K) eligible.push_back(id);
  }
  if (eligible.size() < P) {
    throw CapacityError("sample_pk_batch: need " + std::to_string(P) + " identities with >= " +
                        std::to_string(K) + " samples, dataset has " +
                        std::to_string(eligible.size()));
  }
  PkBatch batch{P, K, {}, {}};
  batch.entries.reserve(P * K);
  batch.labels.reserve(P * K);
  for (std::size_t pick : rng_sample_without_replacement(rng, eligible.size(), P)) {
    const std::uint32_t id = eligible[pick];
    const auto members = ds.members(id);
    for (std::size_t k : rng_sample_without_replacement(rng, members.size(), K)) {
      batch.entries.push_back(members[k]);
      batch.labels.push_back(id);
    }
  }
  return batch;
}

enum class MiningStrategy { all, random_per_anchor, semi_hard };

inline const char* to_string(MiningStrategy s) {
  switch (s) {
    case MiningStrategy::all: return "all";
    case MiningStrategy::random_per_anchor: return "random_per_anchor";
    case MiningStrategy::semi_hard: return "semi_hard";
  }
  return "?";
}

inline MiningStrategy parse_mining_strategy(const std::string& s) {
  if (s == "all") return MiningStrategy::all;
  if (s == "random_per_anchor") return MiningStrategy::random_per_anchor;
  if (s == "semi_hard") return MiningStrategy::semi_hard;
  throw ContractViolation("unknown mining strategy '" + s + "'");
}

// Triplets over batch positions. Distances for semi_hard are squared
// Euclidean between the given embeddings; ties go to the lowest position.
inline std::vector<Triplet> mine_triplets(const PkBatch& batch, std::span<const Vector> embeddings,
                                          MiningStrategy strategy, Rng& rng) {
  const std::size_t n = batch.size();
  detail::require(batch.labels.size() == n, "mine_triplets: malformed batch");
  detail::require(embeddings.size() == n, "mine_triplets: need one embedding per batch entry");
  if (batch.P < 2) throw CapacityError("mine_triplets: batch needs >= 2 identities for negatives");
  const auto& label = batch.labels;

  std::vector<Triplet> out;
  switch (strategy) {
    case MiningStrategy::all:
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t p = 0; p < n; ++p) {
          if (p == a || label[p] != label[a]) continue;
          for (std::size_t q = 0; q < n; ++q)
            if (label[q] != label[a]) out.push_back({a, p, q});
        }
      break;

    case MiningStrategy::random_per_anchor: {
      std::vector<std::size_t> pos, neg;
      for (std::size_t a = 0; a < n; ++a) {
        pos.clear();
        neg.clear();
        for (std::size_t j = 0; j < n; ++j) {
          if (j == a) continue;
          (label[j] == label[a] ? pos : neg).push_back(j);
        }
        if (pos.empty() || neg.empty()) continue;
        const std::size_t p = pos[rng.uniform_index(pos.size())];
        const std::size_t q = neg[rng.uniform_index(neg.size())];
        out.push_back({a, p, q});
      }
      break;
    }

    case MiningStrategy::semi_hard: {
      std::vector<double> dist(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          dist[i * n + j] = dist[j * n + i] = sq_euclidean(embeddings[i], embeddings[j]);
      // Negatives of each anchor sorted by (distance, index): the semi-hard pick
      // is the first entry farther than d_ap, the fallback is the first entry
      // of the farthest run.
      std::vector<std::pair<double, std::size_t>> neg;
      for (std::size_t a = 0; a < n; ++a) {
        neg.clear();
        for (std::size_t q = 0; q < n; ++q)
          if (label[q] != label[a]) neg.emplace_back(dist[a * n + q], q);
        if (neg.empty()) continue;
        std::sort(neg.begin(), neg.end());
        const double far = neg.back().first;
        const auto farthest = std::lower_bound(neg.begin(), neg.end(), std::pair{far, std::size_t{0}});
        for (std::size_t p = 0; p < n; ++p) {
          if (p == a || label[p] != label[a]) continue;
          const double d_ap = dist[a * n + p];
          const auto it = std::upper_bound(neg.begin(), neg.end(), d_ap,
                                           [](double d, const auto& e) { return d < e.first; });
          out.push_back({a, p, it != neg.end() ? it->second : farthest->second});
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace tripdist
