#pragma once

// Pair verification with a threshold sweep, and teacher/student geometry
// comparison through centroid distance matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tripdist/data.hpp"
#include "tripdist/errors.hpp"
#include "tripdist/model.hpp"
#include "tripdist/numerics.hpp"
#include "tripdist/teacher.hpp"

namespace tripdist {

// Anything that maps a sample id to an embedding.
template <typename F>
concept SampleEmbedder = requires(const F& f, std::uint32_t id) {
  { f(id) } -> std::convertible_to<Vector>;
};

inline auto model_embedder(const MlpModel& model, const IdentityDataset& dataset) {
  return [&model, &dataset](std::uint32_t id) { return embed(model, dataset.sample(id).x); };
}

inline auto oracle_embedder(const TeacherOracle& oracle) {
  return [&oracle](std::uint32_t id) { return oracle.embed(id); };
}

struct VerificationPair {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  bool same = false;

  friend bool operator==(const VerificationPair&, const VerificationPair&) = default;
};

struct PairSet {
  std::vector<VerificationPair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

namespace detail {

inline std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

}  // namespace detail

// n_pos same-identity and n_neg different-identity unordered pairs, no
// duplicates, positives first. Each pair is stored with a < b.
inline PairSet build_pairs(const IdentityDataset& ds, std::size_t n_pos, std::size_t n_neg,
                           Rng& rng) {
  PairSet out;
  if (n_pos == 0 && n_neg == 0) return out;

  std::size_t total_pos = 0;
  for (std::uint32_t id : ds.identities()) {
    const std::size_t k = ds.members(id).size();
    total_pos += k * (k - 1) / 2;
  }
  const std::size_t n = ds.size();
  const std::size_t total_neg = n * (n - 1) / 2 - total_pos;
  if (n_pos > total_pos) {
    throw CapacityError("build_pairs: requested " + std::to_string(n_pos) +
                        " positive pairs, only " + std::to_string(total_pos) + " exist");
  }
  if (n_neg > total_neg) {
    throw CapacityError("build_pairs: requested " + std::to_string(n_neg) +
                        " negative pairs, only " + std::to_string(total_neg) + " exist");
  }

  auto ordered = [&](std::size_t i, std::size_t j, bool same) {
    std::uint32_t a = ds.at(i).id, b = ds.at(j).id;
    if (a > b) std::swap(a, b);
    return VerificationPair{a, b, same};
  };

  // Positives: enumerate and take a random prefix.
  if (n_pos > 0) {
    std::vector<VerificationPair> all;
    all.reserve(total_pos);
    for (std::uint32_t id : ds.identities()) {
      const auto m = ds.members(id);
      for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j) all.push_back(ordered(m[i], m[j], true));
    }
    for (std::size_t idx : rng_sample_without_replacement(rng, all.size(), n_pos))
      out.pairs.push_back(all[idx]);
  }

  if (n_neg > 0) {
    if (2 * n_neg >= total_neg) {
      std::vector<VerificationPair> all;
      all.reserve(total_neg);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (ds.at(i).identity != ds.at(j).identity) all.push_back(ordered(i, j, false));
      for (std::size_t idx : rng_sample_without_replacement(rng, all.size(), n_neg))
        out.pairs.push_back(all[idx]);
    } else {
      // Rejection sampling: uniform over unordered cross-identity pairs.
      std::unordered_set<std::uint64_t> seen;
      while (seen.size() < n_neg) {
        const std::size_t i = rng.uniform_index(n);
        const std::size_t j = rng.uniform_index(n);
        if (ds.at(i).identity == ds.at(j).identity) continue;
        const VerificationPair p = ordered(i, j, false);
        if (seen.insert(detail::pair_key(p.a, p.b)).second) out.pairs.push_back(p);
      }
    }
  }
  return out;
}

struct RocPoint {
  double threshold = 0.0;
  double false_accept_rate = 0.0;
  double true_accept_rate = 0.0;
};

struct VerificationReport {
  double best_accuracy = 0.0;
  double best_threshold = 0.0;
  std::vector<RocPoint> roc_points;  // ascending threshold
  std::size_t n_pairs = 0;
};

// Candidate thresholds for "same iff distance < t": the smallest distance
// (accepts nothing), midpoints between consecutive distinct distances, and the
// next double above the largest distance (accepts everything). Ascending.
inline std::vector<double> sweep_thresholds(std::span<const double> distances) {
  if (distances.empty()) throw ContractViolation("sweep_thresholds: no distances");
  std::vector<double> u(distances.begin(), distances.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  std::vector<double> t;
  t.reserve(u.size() + 1);
  t.push_back(u.front());
  for (std::size_t k = 0; k + 1 < u.size(); ++k) {
    double mid = u[k] + (u[k + 1] - u[k]) / 2.0;
    if (!(mid > u[k])) mid = u[k + 1];
    t.push_back(mid);
  }
  t.push_back(std::nextafter(u.back(), std::numeric_limits<double>::infinity()));
  return t;
}

// Threshold sweep over precomputed pair distances. Ties in accuracy go to the
// smaller threshold.
inline VerificationReport verify_distances(std::span<const double> distances,
                                           std::span<const VerificationPair> pairs) {
  if (pairs.empty()) throw ContractViolation("verify: empty pair set");
  detail::require(distances.size() == pairs.size(), "verify: one distance per pair required");
  for (double d : distances) {
    if (!std::isfinite(d)) throw DegenerateInput("verify: non-finite pair distance");
  }

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return distances[x] < distances[y]; });
  std::size_t n_pos = 0;
  for (const auto& p : pairs) n_pos += p.same ? 1 : 0;
  const std::size_t n_neg = pairs.size() - n_pos;
  const double total = static_cast<double>(pairs.size());

  VerificationReport report;
  report.n_pairs = pairs.size();
  report.best_accuracy = -1.0;
  std::size_t cursor = 0, acc_pos = 0, acc_neg = 0;
  for (double t : sweep_thresholds(distances)) {
    while (cursor < order.size() && distances[order[cursor]] < t) {
      (pairs[order[cursor]].same ? acc_pos : acc_neg) += 1;
      ++cursor;
    }
    const double correct = static_cast<double>(acc_pos + (n_neg - acc_neg));
    const double accuracy = correct / total;
    report.roc_points.push_back(
        {t, n_neg ? static_cast<double>(acc_neg) / static_cast<double>(n_neg) : 0.0,
         n_pos ? static_cast<double>(acc_pos) / static_cast<double>(n_pos) : 0.0});
    if (accuracy > report.best_accuracy) {
      report.best_accuracy = accuracy;
      report.best_threshold = t;
    }
  }
  return report;
}

template <SampleEmbedder Embed>
std::vector<double> pair_distances(const Embed& embed_fn, const PairSet& pairs) {
  std::vector<double> d;
  d.reserve(pairs.size());
  for (const auto& p : pairs.pairs) d.push_back(cosine_distance(embed_fn(p.a), embed_fn(p.b)));
  return d;
}

template <SampleEmbedder Embed>
VerificationReport verify(const Embed& embed_fn, const PairSet& pairs) {
  if (pairs.empty()) throw ContractViolation("verify: empty pair set");
  const auto d = pair_distances(embed_fn, pairs);
  return verify_distances(d, pairs.pairs);
}

inline VerificationReport verify(const MlpModel& model, const IdentityDataset& ds,
                                 const PairSet& pairs) {
  return verify(model_embedder(model, ds), pairs);
}

inline VerificationReport verify(const TeacherOracle& oracle, const PairSet& pairs) {
  return verify(oracle_embedder(oracle), pairs);
}

// Square symmetric matrix over identities (sorted id order).
struct DistanceMatrix {
  std::vector<std::uint32_t> identities;
  std::vector<double> values;  // row-major n x n

  std::size_t n() const { return identities.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * n() + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n() + j]; }

  // Strict upper triangle, row-major.
  std::vector<double> upper_triangle() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j = i + 1; j < n(); ++j) out.push_back(at(i, j));
    return out;
  }
};

// Squared Euclidean distances between per-identity means of L2-normalized
// embeddings.
template <SampleEmbedder Embed>
DistanceMatrix centroid_distance_matrix(const Embed& embed_fn, const IdentityDataset& ds) {
  DistanceMatrix m;
  m.identities.assign(ds.identities().begin(), ds.identities().end());
  const std::size_t n = m.n();
  std::vector<Vector> centroids;
  centroids.reserve(n);
  for (std::uint32_t id : m.identities) {
    const auto members = ds.members(id);
    if (members.empty()) throw ContractViolation("centroid_distance_matrix: identity without samples");
    Vector c;
    for (std::size_t idx : members) {
      const Vector e = l2_normalize(embed_fn(ds.at(idx).id));
      if (c.empty()) c.assign(e.size(), 0.0);
      detail::require(e.size() == c.size(), "centroid_distance_matrix: inconsistent embedding dim");
      for (std::size_t k = 0; k < e.size(); ++k) c[k] += e[k];
    }
    for (double& v : c) v /= static_cast<double>(members.size());
    centroids.push_back(std::move(c));
  }
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      m.at(i, j) = m.at(j, i) = sq_euclidean(centroids[i], centroids[j]);
  return m;
}

inline DistanceMatrix centroid_distance_matrix(const MlpModel& model, const IdentityDataset& ds) {
  return centroid_distance_matrix(model_embedder(model, ds), ds);
}

inline DistanceMatrix centroid_distance_matrix(const TeacherOracle& oracle,
                                               const IdentityDataset& ds) {
  return centroid_distance_matrix(oracle_embedder(oracle), ds);
}

// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "spearman: length mismatch");
  if (x.size() < 3) throw InsufficientData("spearman: need at least 3 paired values");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mx, dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("spearman: constant input has no ranking");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Spearman correlation between the strict upper triangles of two centroid
// matrices over the same identities.
inline double structure_correlation(const DistanceMatrix& teacher, const DistanceMatrix& student) {
  if (teacher.identities != student.identities) {
    throw ContractViolation("structure_correlation: matrices cover different identities");
  }
  if (teacher.n() < 3) throw InsufficientData("structure_correlation: need at least 3 identities");
  const auto a = teacher.upper_triangle();
  const auto b = student.upper_triangle();
  return spearman(a, b);
}

}  // namespace tripdist
