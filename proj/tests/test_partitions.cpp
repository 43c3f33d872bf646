#include <gtest/gtest.h>

#include <random>
#include <set>

#include "soap/error.hpp"
#include "soap/partitions.hpp"
#include "support/fixture.hpp"
#include "support/generators.hpp"

using namespace soap;
using soap::testing::example_forest;

TEST(Partitions, ExampleTable) {
  const RandomForest f = example_forest();
  const PartitionTable t = build_partitions(f);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0].kind, FeatureKind::categorical);
  EXPECT_EQ(t.count(0), 2);
  EXPECT_EQ(t[1].thresholds, (std::vector<double>{5}));
  EXPECT_EQ(t[2].thresholds, (std::vector<double>{1000, 1500}));
  EXPECT_EQ(t.count(1), 2);
  EXPECT_EQ(t.count(2), 3);
  EXPECT_EQ(t.state_count(), 12u);
}

TEST(Partitions, UnsplitFeatureAndSharedThresholds) {
  FeatureMeta a;
  a.name = "a";
  FeatureMeta b;
  b.name = "b";
  b.index = 1;
  const DecisionTree t({TreeNode::numerical_split(0, 5, 1, 2), TreeNode::leaf(0), TreeNode::leaf(1)});
  const RandomForest f({"0", "1"}, {a, b}, {t, t}, {1, 1});
  const PartitionTable table = build_partitions(f);
  EXPECT_EQ(table.count(0), 2);
  EXPECT_EQ(table.count(1), 1);
  EXPECT_EQ(representative(State{0, 0}, table)[1], 0.0);
}

TEST(Partitions, ToStateUsesHalfOpenCells) {
  const RandomForest f = example_forest();
  const PartitionTable t = build_partitions(f);
  EXPECT_EQ(to_state({0, 2, 500}, t, f.features()), (State{0, 0, 0}));
  EXPECT_EQ(to_state({0, 2, 1200}, t, f.features()), (State{0, 0, 1}));
  EXPECT_EQ(to_state({0, 2, 1500}, t, f.features())[2], 2);
  EXPECT_EQ(to_state({1, 5, 999.999}, t, f.features()), (State{1, 1, 0}));
  EXPECT_THROW(to_state({2, 2, 500}, t, f.features()), InvalidInput);
}

TEST(Partitions, RepresentativeRules) {
  const RandomForest f = example_forest();
  const PartitionTable t = build_partitions(f);
  EXPECT_EQ(representative(State{0, 1, 2}, t), (FeatureVector{0, 6, 1501}));
  EXPECT_EQ(representative(State{1, 0, 1}, t), (FeatureVector{1, 4, 1250}));
  EXPECT_EQ(representative(State{0, 0, 0}, t), (FeatureVector{0, 4, 999}));
  for (const State& s : enumerate_states(t, 100)) EXPECT_EQ(to_state(representative(s, t), t, f.features()), s);
  EXPECT_THROW(representative(State{0, 2, 0}, t), InvalidInput);
}

TEST(Partitions, StateProbaMatchesVectors) {
  const RandomForest f = example_forest();
  const PartitionTable t = build_partitions(f);
  EXPECT_EQ(state_proba(f, t, State{0, 1, 2}, 1), 1.0);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const FeatureVector x{static_cast<double>(rng() % 2), std::uniform_real_distribution<double>(0, 10)(rng),
                          std::uniform_real_distribution<double>(0, 3000)(rng)};
    const State s = to_state(x, t, f.features());
    ASSERT_EQ(state_proba(f, t, s, 1), class_proba(f, x, 1));
  }
}

TEST(Partitions, SoundOnRandomForests) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto setup = soap::testing::random_setup(seed);
    const auto& feats = setup.forest.features();
    std::mt19937_64 rng(seed);
    for (int i = 0; i < 50; ++i) {
      FeatureVector x;
      FeatureVector y;
      for (std::size_t j = 0; j < feats.size(); ++j) {
        if (feats[j].categorical()) {
          const double c = static_cast<double>(rng() % feats[j].categories.size());
          x.push_back(c);
          y.push_back(c);
          continue;
        }
        const double v = std::uniform_real_distribution<double>(-1, 5)(rng);
        x.push_back(v);
        y.push_back(v);
      }
      const State s = to_state(x, setup.table, feats);
      const FeatureVector r = representative(s, setup.table);
      EXPECT_EQ(to_state(r, setup.table, feats), s);
      EXPECT_EQ(setup.forest.distribution(r), setup.forest.distribution(x));
    }
    for (std::size_t j = 0; j < feats.size(); ++j) {
      if (feats[j].categorical()) continue;
      std::set<double> thresholds;
      for (const DecisionTree& t : setup.forest.trees())
        for (const TreeNode& n : t.nodes())
          if (!n.is_leaf() && n.feature == j) thresholds.insert(n.threshold);
      EXPECT_EQ(setup.table.count(j), static_cast<int>(thresholds.size()) + 1);
    }
  }
}

TEST(Partitions, EnumerationAndSampling) {
  const PartitionTable t = build_partitions(example_forest());
  const auto all = enumerate_states(t, 12);
  ASSERT_EQ(all.size(), 12u);
  EXPECT_EQ(all.front(), (State{0, 0, 0}));
  EXPECT_EQ(all.back(), (State{1, 1, 2}));
  EXPECT_THROW(enumerate_states(t, 11), InvalidInput);

  const auto half = sample_states(t, 0.5, 9);
  EXPECT_EQ(half.size(), 6u);
  EXPECT_TRUE(std::is_sorted(half.begin(), half.end()));
  EXPECT_EQ(std::set<State>(half.begin(), half.end()).size(), 6u);
  EXPECT_EQ(sample_states(t, 0.5, 9), half);
  EXPECT_EQ(sample_states(t, 1.0, 1), all);
  EXPECT_EQ(sample_state_count(t, 4, 2).size(), 4u);
  EXPECT_THROW(sample_states(t, 0.0, 1), InvalidInput);
  EXPECT_THROW(sample_state_count(t, 13, 1), InvalidInput);
}

TEST(Partitions, AuditJson) {
  const RandomForest f = example_forest();
  const auto doc = partitions_to_json(build_partitions(f), f.features());
  EXPECT_NE(doc.dump().find("1500"), std::string::npos);
}
