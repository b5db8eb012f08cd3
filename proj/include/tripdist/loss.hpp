#pragma once

// Triplet hinge loss with fixed or teacher-driven margins.
//
// Distances handed to the hinge are squared Euclidean between the embeddings
// exactly as given; normalization is the model's job. The margin depends only
// on teacher distances, so it carries no gradient into the student.

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tripdist/errors.hpp"
#include "tripdist/numerics.hpp"

namespace tripdist {

enum class MarginMode { fixed, dynamic };

inline const char* to_string(MarginMode mode) {
  return mode == MarginMode::fixed ? "fixed" : "dynamic";
}

struct MarginConfig {
  MarginMode mode = MarginMode::dynamic;
  double m = 0.3;      // fixed mode only
  double m_min = 0.2;  // dynamic mode only
  double m_max = 0.5;  // dynamic mode only

  static MarginConfig fixed(double m) { return {MarginMode::fixed, m, m, m}; }
  static MarginConfig dynamic(double m_min, double m_max) {
    return {MarginMode::dynamic, m_min, m_min, m_max};
  }

  void validate() const {
    detail::require(m >= 0.0, "MarginConfig: m must be >= 0");
    detail::require(m_min >= 0.0 && m_min <= m_max, "MarginConfig: need 0 <= m_min <= m_max");
  }
};

// Indices into whatever embedding collection the triplet was mined from.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletLossResult {
  double loss = 0.0;
  bool active = false;
  Vector grad_a, grad_p, grad_n;
  double margin_used = 0.0;
};

namespace detail {

// max(d_ap - d_an + m, 0), evaluated as m - (d_an - d_ap) so that
// "loss == 0" and "d_an - d_ap >= m" agree bit for bit.
inline double hinge(double d_ap, double d_an, double m) {
  const double gap = d_an - d_ap;
  return gap >= m ? 0.0 : m - gap;
}

}  // namespace detail

inline double triplet_loss(double d_ap, double d_an, double m) {
  detail::require(d_ap >= 0.0 && d_an >= 0.0 && m >= 0.0,
                  "triplet_loss: distances and margin must be non-negative");
  return detail::hinge(d_ap, d_an, m);
}

// Linear map from a teacher gap d in [0, d_max] onto [m_min, m_max].
// A batch whose gaps are all zero (d_max == 0) gets m_min everywhere.
inline double margin_fn(double d, double m_min, double m_max, double d_max) {
  detail::require(d >= 0.0, "margin_fn: d must be >= 0");
  detail::require(m_min >= 0.0 && m_min <= m_max, "margin_fn: need 0 <= m_min <= m_max");
  detail::require(d_max >= 0.0, "margin_fn: d_max must be >= 0");
  if (d > d_max) {
    throw ContractViolation("margin_fn: d = " + std::to_string(d) + " exceeds batch d_max = " +
                            std::to_string(d_max));
  }
  if (d_max == 0.0) return m_min;
  const double m = (m_max - m_min) / d_max * d + m_min;
  return std::clamp(m, m_min, m_max);
}

inline std::tuple<Vector, Vector, Vector> triplet_grads(std::span<const double> a,
                                                        std::span<const double> p,
                                                        std::span<const double> n,
                                                        bool active) {
  detail::require_same_dim(a, p, "triplet_grads");
  detail::require_same_dim(a, n, "triplet_grads");
  const std::size_t dim = a.size();
  Vector ga(dim, 0.0), gp(dim, 0.0), gn(dim, 0.0);
  if (active) {
    for (std::size_t i = 0; i < dim; ++i) {
      ga[i] = 2.0 * (n[i] - p[i]);
      gp[i] = -2.0 * (a[i] - p[i]);
      gn[i] = 2.0 * (a[i] - n[i]);
    }
  }
  return {std::move(ga), std::move(gp), std::move(gn)};
}

namespace detail {

inline TripletLossResult triplet_with_margin(std::span<const double> a, std::span<const double> p,
                                             std::span<const double> n, double margin) {
  require_same_dim(a, p, "triplet loss");
  require_same_dim(a, n, "triplet loss");
  TripletLossResult r;
  r.margin_used = margin;
  r.loss = hinge(sq_euclidean(a, p), sq_euclidean(a, n), margin);
  r.active = r.loss > 0.0;
  std::tie(r.grad_a, r.grad_p, r.grad_n) = triplet_grads(a, p, n, r.active);
  return r;
}

}  // namespace detail

inline TripletLossResult triplet_loss_fixed(std::span<const double> a, std::span<const double> p,
                                            std::span<const double> n, double m) {
  detail::require(m >= 0.0, "triplet_loss_fixed: margin must be >= 0");
  return detail::triplet_with_margin(a, p, n, m);
}

inline TripletLossResult triplet_loss_dynamic(std::span<const double> a, std::span<const double> p,
                                              std::span<const double> n, double d_teacher,
                                              double d_max, const MarginConfig& cfg) {
  detail::require(cfg.mode == MarginMode::dynamic, "triplet_loss_dynamic: config is not dynamic");
  cfg.validate();
  const double margin = margin_fn(d_teacher, cfg.m_min, cfg.m_max, d_max);
  return detail::triplet_with_margin(a, p, n, margin);
}

struct BatchLossResult {
  double loss = 0.0;                 // mean over triplets
  std::vector<Vector> grads;         // d loss / d embedding, one per embedding
  std::vector<double> margins;       // margin used per triplet
  std::size_t active_count = 0;
  double d_max = 0.0;                // largest teacher gap in the batch (dynamic mode)

  double mean_margin() const {
    if (margins.empty()) return 0.0;
    double s = 0.0;
    for (double m : margins) s += m;
    return s / static_cast<double>(margins.size());
  }
  double active_fraction() const {
    return margins.empty() ? 0.0
                           : static_cast<double>(active_count) / static_cast<double>(margins.size());
  }
};

// Mean triplet loss over a mini-batch. In dynamic mode teacher_gaps[i] is the
// teacher gap of triplets[i] and d_max is taken over this batch; in fixed mode
// teacher_gaps is ignored. Reductions run in triplet order.
inline BatchLossResult batch_loss(std::span<const Vector> embeddings,
                                  std::span<const Triplet> triplets,
                                  std::span<const double> teacher_gaps, const MarginConfig& cfg) {
  if (triplets.empty()) throw ContractViolation("batch_loss: empty triplet list");
  cfg.validate();
  const bool dynamic = cfg.mode == MarginMode::dynamic;
  if (dynamic) {
    detail::require(teacher_gaps.size() == triplets.size(),
                    "batch_loss: need one teacher gap per triplet");
  }
  if (embeddings.empty()) throw ContractViolation("batch_loss: no embeddings");
  const std::size_t dim = embeddings.front().size();

  BatchLossResult out;
  if (dynamic) {
    for (double d : teacher_gaps) {
      detail::require(d >= 0.0, "batch_loss: teacher gaps must be >= 0");
      out.d_max = std::max(out.d_max, d);
    }
  }
  out.grads.assign(embeddings.size(), Vector(dim, 0.0));
  out.margins.reserve(triplets.size());

  for (const Vector& e : embeddings) {
    if (e.size() != dim) throw ContractViolation("batch_loss: inconsistent embedding dimension");
  }

  // Same arithmetic as triplet_with_margin, accumulated in place.
  const double inv_n = 1.0 / static_cast<double>(triplets.size());
  double total = 0.0;
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    const Triplet& tr = triplets[t];
    detail::require(tr.anchor < embeddings.size() && tr.positive < embeddings.size() &&
                        tr.negative < embeddings.size(),
                    "batch_loss: triplet index out of range");
    const double margin =
        dynamic ? margin_fn(teacher_gaps[t], cfg.m_min, cfg.m_max, out.d_max) : cfg.m;
    const Vector& a = embeddings[tr.anchor];
    const Vector& p = embeddings[tr.positive];
    const Vector& n = embeddings[tr.negative];
    const double loss = detail::hinge(sq_euclidean(a, p), sq_euclidean(a, n), margin);
    out.margins.push_back(margin);
    total += loss;
    if (!(loss > 0.0)) continue;
    ++out.active_count;
    Vector& ga = out.grads[tr.anchor];
    Vector& gp = out.grads[tr.positive];
    Vector& gn = out.grads[tr.negative];
    for (std::size_t i = 0; i < dim; ++i) {
      ga[i] += 2.0 * (n[i] - p[i]) * inv_n;
      gp[i] += -2.0 * (a[i] - p[i]) * inv_n;
      gn[i] += 2.0 * (a[i] - n[i]) * inv_n;
    }
  }
  out.loss = total * inv_n;
  return out;
}

}  // namespace tripdist
