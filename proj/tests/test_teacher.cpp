#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "oracles.hpp"
#include "tripdist/data.hpp"
#include "tripdist/teacher.hpp"

using namespace tripdist;

namespace {

// Unit vector at angle theta on the circle.
Vector on_circle(double theta) { return {std::cos(theta), std::sin(theta)}; }

// Angle whose squared chord from angle 0 equals t: t = 2 - 2 cos(theta).
double angle_for(double t) { return std::acos(1.0 - t / 2.0); }

}  // namespace

TEST(TeacherEmbed, TableLookup) {
  const auto o = TeacherOracle::from_table({{0, 5, {0.6, 0.8}}, {1, 6, {1.0, 0.0}}});
  EXPECT_EQ(teacher_embed(o, 5), (Vector{0.6, 0.8}));
  EXPECT_EQ(o.dim(), 2u);
  EXPECT_EQ(o.identity_of(6), 1u);
}

TEST(TeacherEmbed, RepeatedQueriesIdentical) {
  const auto ds = std::make_shared<const IdentityDataset>(generate_hierarchical(HierarchySpec{}));
  const auto o = TeacherOracle::from_model(MlpModel::glorot({16, 32, 8}, true, 0), ds);
  EXPECT_EQ(o.embed(3), o.embed(3));
}

TEST(TeacherEmbed, ModelOracleMatchesIndependentForward) {
  const auto ds = std::make_shared<const IdentityDataset>(generate_hierarchical(HierarchySpec{}));
  const auto model = MlpModel::glorot({16, 32, 32, 8}, true, 0);
  const auto o = TeacherOracle::from_model(model, ds);
  for (std::uint32_t id : {0u, 1u, 100u, 959u}) {
    const auto want = oracle::mlp_forward(model, ds->sample(id).x);
    const auto got = o.embed(id);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
    EXPECT_NEAR(l2_norm(got), 1.0, 1e-6);
  }
  const auto pre = TeacherOracle::precompute(model, *ds);
  EXPECT_EQ(pre.backing(), TeacherOracle::Backing::embedding_table);
  EXPECT_EQ(pre.output_hash(), TeacherOracle::precompute(model, *ds).output_hash());
}

TEST(TeacherEmbed, UnknownSampleIsLookupError) {
  const auto o = TeacherOracle::from_table({{0, 5, {0.6, 0.8}}});
  EXPECT_THROW(o.embed(7), LookupError);
  EXPECT_FALSE(o.contains(7));
}

TEST(TeacherEmbed, TableRowsAreNormalized) {
  const auto o = TeacherOracle::from_table({{0, 1, {3.0, 4.0}}});
  EXPECT_NEAR(o.embed(1)[0], 0.6, 1e-15);
  EXPECT_THROW(TeacherOracle::from_table({{0, 1, {1.0, 0.0}}, {0, 1, {0.0, 1.0}}}), ContractViolation);
  EXPECT_THROW(TeacherOracle::from_table({{0, 1, {1.0, 0.0}}, {0, 2, {1.0}}}), ContractViolation);
}

TEST(TeacherGap, Examples) {
  EXPECT_NEAR(teacher_gap_from_distances(0.9, 0.3), 0.6, 1e-15);
  EXPECT_EQ(teacher_gap_from_distances(0.2, 0.5), 0.0);

  // Same values through a table oracle: T(a,p) = 0.3, T(a,n) = 0.9.
  const auto o = TeacherOracle::from_table({{0, 0, on_circle(0.0)},
                                            {0, 1, on_circle(angle_for(0.3))},
                                            {1, 2, on_circle(-angle_for(0.9))},
                                            {0, 3, on_circle(angle_for(0.5))},
                                            {1, 4, on_circle(-angle_for(0.2))}});
  EXPECT_NEAR(teacher_gap(o, 0, 1, 2), 0.6, 1e-12);
  EXPECT_EQ(teacher_gap(o, 0, 3, 4), 0.0);
}

TEST(TeacherGap, LabelViolations) {
  const auto o = TeacherOracle::from_table({{0, 0, {1, 0}}, {0, 1, {0, 1}}, {1, 2, {-1, 0}}});
  EXPECT_THROW(teacher_gap(o, 0, 2, 1), ContractViolation);
  EXPECT_THROW(teacher_gap(o, 0, 1, 1), ContractViolation);
}

TEST(TeacherGap, RandomTableTripletsMatchRawRecomputation) {
  Rng rng(20);
  std::vector<EmbeddingRecord> recs;
  for (std::uint32_t s = 0; s < 30; ++s) recs.push_back({s / 5, s, oracle::random_unit(rng, 6)});
  const auto o = TeacherOracle::from_table(recs);
  for (int t = 0; t < 20; ++t) {
    const std::uint32_t a = static_cast<std::uint32_t>(rng.uniform_index(30));
    const std::uint32_t p = (a / 5) * 5 + static_cast<std::uint32_t>((a % 5 + 1 + rng.uniform_index(4)) % 5);
    std::uint32_t n = static_cast<std::uint32_t>(rng.uniform_index(30));
    while (n / 5 == a / 5) n = (n + 5) % 30;
    const double want = std::max(oracle::sqdist(recs[a].vector, recs[n].vector) -
                                     oracle::sqdist(recs[a].vector, recs[p].vector),
                                 0.0);
    EXPECT_NEAR(teacher_gap(o, a, p, n), want, 1e-12);
    EXPECT_GE(teacher_gap(o, a, p, n), 0.0);
  }
}

TEST(Calibration, SymmetricConfigurationGivesEqualGaps) {
  // Every identity's samples coincide; identities sit at orthonormal vectors.
  std::vector<EmbeddingRecord> recs;
  std::vector<Sample> samples;
  for (std::uint32_t id = 0; id < 3; ++id)
    for (std::uint32_t k = 0; k < 4; ++k) {
      Vector v(3, 0.0);
      v[id] = 1.0;
      recs.push_back({id, id * 4 + k, v});
      samples.push_back({id * 4 + k, id, v});
    }
  const auto o = TeacherOracle::from_table(recs);
  const IdentityDataset ds(samples);
  Rng rng(0);
  const auto r = calibrate_margins(o, ds, 50, rng);
  EXPECT_EQ(r.d_min_observed, r.d_max_observed);
  EXPECT_EQ(r.d_max_observed, 2.0);
}

TEST(Calibration, SingleTriplet) {
  const auto ds = generate_hierarchical(HierarchySpec{});
  const auto o = TeacherOracle::precompute(MlpModel::glorot({16, 8}, true, 1), ds);
  Rng rng(0);
  const auto r = calibrate_margins(o, ds, 1, rng);
  ASSERT_EQ(r.d_values.size(), 1u);
  EXPECT_EQ(r.d_min_observed, r.d_max_observed);
  EXPECT_EQ(r.suggested_m_min, r.d_min_observed);
}

TEST(Calibration, ThousandTripletsMatchRecomputation) {
  const auto ds = generate_hierarchical(HierarchySpec{});
  const auto model = MlpModel::glorot({16, 64, 16}, true, 0);
  const auto o = TeacherOracle::precompute(model, ds);
  Rng rng(0);
  const auto r = calibrate_margins(o, ds, 1000, rng);
  ASSERT_EQ(r.triplets.size(), 1000u);
  double lo = 1e300, hi = -1e300;
  for (const auto& t : r.triplets) {
    ASSERT_EQ(ds.identity_of(t.anchor), ds.identity_of(t.positive));
    ASSERT_NE(t.anchor, t.positive);
    ASSERT_NE(ds.identity_of(t.anchor), ds.identity_of(t.negative));
    const auto a = oracle::mlp_forward(model, ds.sample(t.anchor).x);
    const auto p = oracle::mlp_forward(model, ds.sample(t.positive).x);
    const auto n = oracle::mlp_forward(model, ds.sample(t.negative).x);
    const double d = std::max(oracle::sqdist(a, n) - oracle::sqdist(a, p), 0.0);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  EXPECT_NEAR(r.d_min_observed, lo, 1e-12);
  EXPECT_NEAR(r.d_max_observed, hi, 1e-12);
  EXPECT_LE(r.suggested_m_min, r.suggested_m_max);
}

TEST(Calibration, TooSmallDataset) {
  const IdentityDataset one({{0, 0, {1.0}}, {1, 0, {2.0}}});
  const auto o = TeacherOracle::from_table({{0, 0, {1.0}}, {0, 1, {2.0}}});
  Rng rng(0);
  EXPECT_THROW(calibrate_margins(o, one, 5, rng), CapacityError);
  const IdentityDataset singletons({{0, 0, {1.0}}, {1, 1, {2.0}}});
  EXPECT_THROW(calibrate_margins(o, singletons, 5, rng), CapacityError);
}

TEST(TeacherOracle, OutputHashStableUnderInterleavedQueries) {
  const auto ds = std::make_shared<const IdentityDataset>(generate_hierarchical(HierarchySpec{}));
  const auto o = TeacherOracle::from_model(MlpModel::glorot({16, 32, 8}, true, 2), ds);
  const auto h = o.output_hash();
  Rng rng(4);
  for (int i = 0; i < 5000; ++i) (void)o.embed(static_cast<std::uint32_t>(rng.uniform_index(ds->size())));
  EXPECT_EQ(o.output_hash(), h);
}
