#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "tripdist/data.hpp"
#include "tripdist/eval.hpp"

using namespace tripdist;

namespace {

// Embedder over an explicit id -> vector map.
struct MapEmbedder {
  std::map<std::uint32_t, Vector> table;
  Vector operator()(std::uint32_t id) const { return table.at(id); }
};

DistanceMatrix random_matrix(Rng& rng, std::size_t n) {
  DistanceMatrix m;
  for (std::size_t i = 0; i < n; ++i) m.identities.push_back(static_cast<std::uint32_t>(i));
  m.values.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.at(i, j) = m.at(j, i) = rng.uniform(0.0, 4.0);
  return m;
}

}  // namespace

TEST(BuildPairs, SinglePossiblePositive) {
  const IdentityDataset ds({{3, 0, {1.0}}, {8, 0, {2.0}}});
  Rng rng(0);
  const auto ps = build_pairs(ds, 1, 0, rng);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps.pairs[0], (VerificationPair{3, 8, true}));
}

TEST(BuildPairs, EmptyRequest) {
  const IdentityDataset ds({{3, 0, {1.0}}, {8, 0, {2.0}}});
  Rng rng(0);
  const auto ps = build_pairs(ds, 0, 0, rng);
  EXPECT_TRUE(ps.empty());
  EXPECT_THROW(verify_distances({}, ps.pairs), ContractViolation);
}

TEST(BuildPairs, ThreeThousandEachRecount) {
  const auto ds = generate_hierarchical(HierarchySpec{});
  Rng rng(1);
  const auto ps = build_pairs(ds, 3000, 3000, rng);
  ASSERT_EQ(ps.size(), 6000u);
  std::size_t pos = 0, neg = 0;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& p : ps.pairs) {
    EXPECT_LT(p.a, p.b);
    EXPECT_EQ(p.same, ds.identity_of(p.a) == ds.identity_of(p.b));
    (p.same ? pos : neg) += 1;
    EXPECT_TRUE(seen.insert({p.a, p.b}).second);
  }
  EXPECT_EQ(pos, 3000u);
  EXPECT_EQ(neg, 3000u);
}

TEST(BuildPairs, DeterministicAndCapacity) {
  const auto ds = generate_hierarchical(HierarchySpec{});
  Rng a(2), b(2);
  EXPECT_EQ(build_pairs(ds, 50, 50, a).pairs, build_pairs(ds, 50, 50, b).pairs);
  const IdentityDataset tiny({{0, 0, {1.0}}, {1, 0, {2.0}}, {2, 1, {3.0}}});
  Rng rng(0);
  EXPECT_THROW(build_pairs(tiny, 2, 0, rng), CapacityError);
  EXPECT_THROW(build_pairs(tiny, 0, 3, rng), CapacityError);
  EXPECT_EQ(build_pairs(tiny, 1, 2, rng).size(), 3u);
}

TEST(Verify, SeparablePairs) {
  const std::vector<VerificationPair> pairs{{0, 1, true}, {2, 3, false}};
  const auto r = verify_distances(std::vector<double>{0.1, 0.9}, pairs);
  EXPECT_EQ(r.best_accuracy, 1.0);
  EXPECT_GT(r.best_threshold, 0.1);
  EXPECT_LE(r.best_threshold, 0.9);
}

TEST(Verify, AllPositiveAcceptsEverything) {
  const std::vector<VerificationPair> pairs{{0, 1, true}, {2, 3, true}, {4, 5, true}};
  const auto r = verify_distances(std::vector<double>{0.3, 0.1, 0.2}, pairs);
  EXPECT_EQ(r.best_accuracy, 1.0);
  EXPECT_GT(r.best_threshold, 0.3);
}

TEST(Verify, ThroughEmbedder) {
  MapEmbedder e{{{0, {1, 0}}, {1, {0.99, 0.1}}, {2, {1, 0}}, {3, {-1, 0.2}}}};
  PairSet ps{{{0, 1, true}, {2, 3, false}}};
  EXPECT_EQ(verify(e, ps).best_accuracy, 1.0);
  MapEmbedder zero{{{0, {0, 0}}, {1, {1, 0}}}};
  EXPECT_THROW(verify(zero, PairSet{{{0, 1, true}}}), DegenerateInput);
  EXPECT_THROW(verify(e, PairSet{}), ContractViolation);
}

TEST(Verify, MatchesExhaustiveOracle) {
  Rng rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d;
    std::vector<bool> same;
    std::vector<VerificationPair> pairs;
    for (std::uint32_t i = 0; i < 40; ++i) {
      // Coarse grid so ties occur.
      d.push_back(std::round(rng.uniform(0.0, 2.0) * 10.0) / 10.0);
      same.push_back(rng.uniform01() < 0.5);
      pairs.push_back({2 * i, 2 * i + 1, same.back()});
    }
    const auto r = verify_distances(d, pairs);
    EXPECT_EQ(r.best_accuracy, oracle::best_accuracy_exhaustive(d, same));
    EXPECT_EQ(oracle::accuracy_at(d, same, r.best_threshold), r.best_accuracy);
  }
}

TEST(Verify, TieGoesToSmallerThreshold) {
  // Accuracy 0.5 at every cut; the first candidate wins.
  const std::vector<VerificationPair> pairs{{0, 1, false}, {2, 3, true}};
  const auto r = verify_distances(std::vector<double>{0.2, 0.6}, pairs);
  EXPECT_EQ(r.best_accuracy, 0.5);
  EXPECT_EQ(r.best_threshold, 0.2);
}

TEST(Verify, InvariantUnderMonotoneTransform) {
  Rng rng(6);
  std::vector<double> d, t;
  std::vector<VerificationPair> pairs;
  for (std::uint32_t i = 0; i < 100; ++i) {
    d.push_back(rng.uniform(0.0, 2.0));
    t.push_back(std::exp(3.0 * d.back()) + 7.0);
    pairs.push_back({2 * i, 2 * i + 1, rng.uniform01() < 0.4});
  }
  EXPECT_EQ(verify_distances(d, pairs).best_accuracy, verify_distances(t, pairs).best_accuracy);
}

TEST(Verify, InvariantUnderRotation) {
  Rng rng(7);
  MapEmbedder e, rotated;
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (std::uint32_t id = 0; id < 40; ++id) {
    Vector v = oracle::random_vec(rng, 3);
    e.table[id] = v;
    rotated.table[id] = {c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]};
  }
  PairSet ps;
  for (std::uint32_t i = 0; i < 20; ++i) ps.pairs.push_back({i, static_cast<std::uint32_t>(39 - i), i % 3 == 0});
  EXPECT_NEAR(verify(e, ps).best_accuracy, verify(rotated, ps).best_accuracy, 0.0);
}

TEST(Centroids, CollapsedEmbeddingsGiveZeroMatrix) {
  const IdentityDataset ds({{0, 0, {1.0}}, {1, 1, {2.0}}, {2, 2, {3.0}}});
  MapEmbedder e{{{0, {1, 1}}, {1, {1, 1}}, {2, {1, 1}}}};
  const auto m = centroid_distance_matrix(e, ds);
  for (double v : m.values) EXPECT_EQ(v, 0.0);
}

TEST(Centroids, OrthogonalCentroids) {
  const IdentityDataset ds({{0, 0, {1.0}}, {1, 1, {2.0}}});
  MapEmbedder e{{{0, {1, 0}}, {1, {0, 3}}}};
  const auto m = centroid_distance_matrix(e, ds);
  EXPECT_EQ(m.at(0, 1), 2.0);
  EXPECT_EQ(m.at(1, 0), 2.0);
  EXPECT_EQ(m.at(0, 0), 0.0);
}

TEST(Centroids, FiveIdentitiesMatchDoubleLoop) {
  const auto ds = generate_hierarchical([] {
    HierarchySpec s;
    s.n_superclusters = 1;
    s.identities_per_supercluster = 5;
    s.samples_per_identity = 4;
    return s;
  }());
  const auto model = MlpModel::glorot({16, 8}, true, 3);
  const auto m = centroid_distance_matrix(model, ds);
  std::vector<oracle::Vec> cent;
  for (std::uint32_t id = 0; id < 5; ++id) {
    oracle::Vec c(8, 0.0);
    for (const auto& smp : ds.samples())
      if (smp.identity == id) {
        const auto e = oracle::mlp_forward(model, smp.x);
        for (int k = 0; k < 8; ++k) c[k] += e[k] / 4.0;
      }
    cent.push_back(c);
  }
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(m.at(i, j), oracle::sqdist(cent[i], cent[j]), 1e-12);
      EXPECT_EQ(m.at(i, j), m.at(j, i));
    }
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(m.at(i, i), 0.0);
}

TEST(Ranks, AverageRanksMatchCounting) {
  const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6, 5, 3};
  EXPECT_EQ(average_ranks(v), oracle::count_ranks(v));
}

TEST(StructureCorrelation, IdenticalAndReversed) {
  Rng rng(1);
  const auto a = random_matrix(rng, 5);
  EXPECT_EQ(structure_correlation(a, a), 1.0);
  auto b = a;
  for (double& v : b.values) v = -v;
  EXPECT_NEAR(structure_correlation(a, b), -1.0, 1e-15);
}

TEST(StructureCorrelation, MatchesIndependentImplementation) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_matrix(rng, 6);
    auto b = random_matrix(rng, 6);
    // Introduce ties.
    b.at(0, 1) = b.at(1, 2) = b.at(2, 3) = b.at(0, 2);
    EXPECT_NEAR(structure_correlation(a, b), oracle::spearman(a.upper_triangle(), b.upper_triangle()), 1e-12);
  }
}

TEST(StructureCorrelation, SymmetricAndAffineInvariant) {
  Rng rng(9);
  const auto a = random_matrix(rng, 7), b = random_matrix(rng, 7);
  auto scaled = b;
  for (double& v : scaled.values) v = 3.5 * v + 2.0;
  EXPECT_EQ(structure_correlation(a, b), structure_correlation(b, a));
  EXPECT_EQ(structure_correlation(a, b), structure_correlation(a, scaled));
}

TEST(StructureCorrelation, Errors) {
  Rng rng(1);
  const auto two = random_matrix(rng, 2);
  EXPECT_THROW(structure_correlation(two, two), InsufficientData);
  auto a = random_matrix(rng, 4), b = random_matrix(rng, 4);
  b.identities[3] = 99;
  EXPECT_THROW(structure_correlation(a, b), ContractViolation);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), InsufficientData);
  EXPECT_THROW(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DegenerateInput);
}
