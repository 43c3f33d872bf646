#include <gtest/gtest.h>

#include "soap/baselines.hpp"
#include "soap/encoder.hpp"
#include "soap/error.hpp"
#include "support/fixture.hpp"
#include "support/generators.hpp"

using namespace soap;

namespace {

SearchParams strict_params() {
  SearchParams p;
  p.target = 1;
  p.z = 1.0;
  return p;
}

// Class 1 needs a >= 1 and b >= 1 at the same time.
RandomForest conjunction_forest() {
  FeatureMeta a;
  a.name = "a";
  FeatureMeta b;
  b.name = "b";
  b.index = 1;
  const DecisionTree t({TreeNode::numerical_split(0, 1, 1, 2), TreeNode::leaf(0),
                        TreeNode::numerical_split(1, 1, 3, 4), TreeNode::leaf(0), TreeNode::leaf(1)});
  return RandomForest({"0", "1"}, {a, b}, {t, t}, {1, 1});
}

double replay(const SequentialPlan& p, const State& initial, const ActionLibrary& lib, State& end) {
  double cost = 0.0;
  end = initial;
  for (std::size_t a : p.actions) {
    end = apply(end, lib[a]);
    cost += lib[a].cost();
  }
  return cost;
}

}  // namespace

TEST(Greedy, AlreadyGoal) {
  const soap::testing::ExampleSetup ex;
  const SequentialPlan p = greedy_plan(State{0, 1, 2}, ex.library, ex.forest, ex.table, strict_params());
  EXPECT_TRUE(p.success);
  EXPECT_TRUE(p.actions.empty());
  EXPECT_EQ(p.cost, 0.0);
}

TEST(Greedy, ExampleReachesGoalAtLeastOptimalCost) {
  const soap::testing::ExampleSetup ex;
  for (GreedyRule rule : {GreedyRule::ratio, GreedyRule::max_delta, GreedyRule::min_cost}) {
    const SequentialPlan p = greedy_plan(State{0, 0, 0}, ex.library, ex.forest, ex.table, strict_params(), rule);
    ASSERT_TRUE(p.success) << to_string(rule);
    State end;
    EXPECT_DOUBLE_EQ(replay(p, State{0, 0, 0}, ex.library, end), p.cost);
    EXPECT_EQ(end, p.final_state);
    EXPECT_GE(state_proba(ex.forest, ex.table, end, 1), 1.0);
    EXPECT_GE(p.cost, 3.0);
  }
  // ratio greed jumps x3 straight to its top cell: 1 + 4
  EXPECT_DOUBLE_EQ(greedy_plan(State{0, 0, 0}, ex.library, ex.forest, ex.table, strict_params()).cost, 5.0);
}

TEST(Greedy, RuleNames) {
  for (GreedyRule r : {GreedyRule::ratio, GreedyRule::max_delta, GreedyRule::min_cost})
    EXPECT_EQ(greedy_rule_from_string(to_string(r)), r);
  EXPECT_THROW(greedy_rule_from_string("best"), InvalidInput);
}

TEST(Greedy, PlateauFailsWherePlannerSucceeds) {
  const RandomForest f = conjunction_forest();
  const PartitionTable t = build_partitions(f);
  const ActionLibrary lib = default_action_library(t, f.features(), CostModel::uniform(2));
  SearchParams params;
  params.target = 1;
  params.z = 0.5;
  const SequentialPlan g = greedy_plan(State{0, 0}, lib, f, t, params);
  EXPECT_FALSE(g.success);

  const SoapContext ctx{f, t, lib, params};
  const GoalDatabase db(forest_fingerprint(f), params);
  const OnlineResult r = plan_online(ctx, State{0, 0}, db, 3, SimilarityWeights::uniform(2));
  ASSERT_EQ(r.result.status, PlanStatus::solved);
  EXPECT_DOUBLE_EQ(r.result.plan.cost, 2.0);
}

TEST(Oracle, ExampleOptimum) {
  const soap::testing::ExampleSetup ex;
  const OracleResult r = oracle_plan(State{0, 0, 0}, ex.library, ex.forest, ex.table, strict_params());
  ASSERT_TRUE(r.found);
  EXPECT_DOUBLE_EQ(r.plan.cost, 3.0);
  EXPECT_EQ(r.plan.final_state, (State{0, 1, 2}));
  EXPECT_EQ(r.plan.actions.size(), 3u);
  const OracleResult zero = oracle_plan(State{0, 1, 2}, ex.library, ex.forest, ex.table, strict_params());
  EXPECT_EQ(zero.plan.cost, 0.0);
  EXPECT_THROW(oracle_plan(State{0, 0, 0}, ex.library, ex.forest, ex.table, strict_params(), 2), InvalidInput);
}

TEST(Oracle, LowerBoundsGreedyOnRandomInstances) {
  soap::testing::SetupShape shape;
  shape.max_states = 1024;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto s = soap::testing::random_setup(seed, shape);
    SearchParams params;
    params.target = 1;
    const State initial = sample_state_count(s.table, 1, seed)[0];
    const OracleResult o = oracle_plan(initial, s.library, s.forest, s.table, params);
    const SequentialPlan g = greedy_plan(initial, s.library, s.forest, s.table, params);
    if (!g.success) continue;
    ASSERT_TRUE(o.found);
    EXPECT_LE(o.plan.cost, g.cost + 1e-9);
    State end;
    EXPECT_NEAR(replay(g, initial, s.library, end), g.cost, 1e-9);
    EXPECT_GE(state_proba(s.forest, s.table, end, 1), params.z);
  }
}
