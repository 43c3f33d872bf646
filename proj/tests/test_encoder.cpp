#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "soap/baselines.hpp"
#include "soap/encoder.hpp"
#include "soap/error.hpp"
#include "support/fixture.hpp"
#include "support/generators.hpp"

using namespace soap;
using soap::testing::brute_force_plan_cost;
using soap::testing::random_sas;

namespace {

SearchParams strict_params() {
  SearchParams p;
  p.target = 1;
  p.z = 1.0;
  return p;
}

SasProblem example_problem(const soap::testing::ExampleSetup& ex, const State& initial) {
  SasProblem p;
  for (std::size_t i = 0; i < ex.table.size(); ++i) p.domains.push_back(ex.table.count(i));
  p.actions = ex.library.actions();
  p.initial = initial;
  p.goals = {State{0, 1, 2}};
  return p;
}

SasProblem chain() {
  SasProblem p;
  p.domains = {3};
  p.actions = {Action("a", {Transition{0, 0, 1}}, 1), Action("b", {Transition{0, 1, 2}}, 1)};
  p.initial = State{0};
  p.goals = {State{2}};
  return p;
}

PlanResult plan_at(const SasProblem& p, int makespan, bool sweep = false) {
  PlannerOptions opt;
  opt.max_makespan = makespan;
  opt.sweep = sweep;
  return solve_sas(p, opt);
}

}  // namespace

TEST(Encoder, SoftClausePerActionAndStep) {
  const soap::testing::ExampleSetup ex;
  const SasProblem p = example_problem(ex, State{0, 0, 0});
  for (int l = 1; l <= 3; ++l) {
    const Encoding e = encode(p, l);
    EXPECT_EQ(e.wcnf.soft().size(), p.actions.size() * static_cast<std::size_t>(l));
    EXPECT_EQ(e.vars.var_count(), e.wcnf.var_count());
    for (const SoftClause& c : e.wcnf.soft()) EXPECT_EQ(c.lits.size(), 1u);
  }
  EXPECT_THROW(encode(p, 0), InvalidInput);
}

TEST(Encoder, VarMapIsBijective) {
  const soap::testing::ExampleSetup ex;
  const SasProblem p = example_problem(ex, State{0, 0, 0});
  const Encoding e = encode(p, 3);
  std::vector<int> seen(static_cast<std::size_t>(e.vars.var_count()) + 1, 0);
  for (std::size_t i = 0; i < e.vars.transitions().size(); ++i)
    for (int t = 1; t <= 3; ++t) ++seen[static_cast<std::size_t>(e.vars.transition(i, t))];
  for (std::size_t a = 0; a < p.actions.size(); ++a)
    for (int t = 1; t <= 3; ++t) ++seen[static_cast<std::size_t>(e.vars.action(a, t))];
  ++seen[static_cast<std::size_t>(e.vars.goal(0))];
  for (std::size_t v = 1; v < seen.size(); ++v) EXPECT_EQ(seen[v], 1) << v;
  std::ostringstream map;
  write_varmap(e, p, map);
  EXPECT_NE(map.str().find("x3:1->2"), std::string::npos);
}

TEST(Encoder, ExampleEndToEnd) {
  const soap::testing::ExampleSetup ex;
  const SasProblem p = example_problem(ex, State{0, 0, 0});
  const Encoding e = encode(p, 3);
  const SolveResult r = solve(e.wcnf);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  const Plan plan = decode(r.model, e.vars, p);
  EXPECT_TRUE(validate_plan(plan, p)) << plan_violation(plan, p);
  EXPECT_DOUBLE_EQ(plan.cost, 3.0);
  EXPECT_DOUBLE_EQ(static_cast<double>(r.cost) / e.weight_scale, plan.cost);
  EXPECT_EQ(*plan.goal, (State{0, 1, 2}));
}

TEST(Encoder, EmptyGoalSetIsUnsatisfiable) {
  SasProblem p = chain();
  p.goals.clear();
  EXPECT_EQ(solve(encode(p, 2).wcnf).status, SolveStatus::hard_unsat);
  EXPECT_EQ(plan_at(p, 3).status, PlanStatus::unsolvable);
}

TEST(Encoder, ChainNeedsTwoSteps) {
  const SasProblem p = chain();
  EXPECT_EQ(solve(encode(p, 1).wcnf).status, SolveStatus::hard_unsat);
  EXPECT_EQ(brute_force_plan_cost(p, 1), -1.0);
  EXPECT_EQ(solve(encode(p, 2).wcnf).status, SolveStatus::optimal);
  const PlanResult r = plan_at(p, 5);
  ASSERT_EQ(r.status, PlanStatus::solved);
  EXPECT_EQ(r.makespan, 2);
  EXPECT_EQ(r.plan.steps.size(), 2u);
  EXPECT_DOUBLE_EQ(r.plan.cost, 2.0);
  ASSERT_EQ(r.attempts.size(), 2u);
  EXPECT_EQ(r.attempts[0].status, SolveStatus::hard_unsat);
  EXPECT_EQ(plan_at(p, 1).status, PlanStatus::unsolvable);
}

TEST(Encoder, AlreadyGoalSkipsEncoding) {
  SasProblem p = chain();
  p.initial = State{2};
  const PlanResult r = plan_at(p, 3);
  EXPECT_EQ(r.status, PlanStatus::solved);
  EXPECT_TRUE(r.plan.empty());
  EXPECT_TRUE(r.attempts.empty());
  EXPECT_EQ(r.makespan, 0);
}

TEST(Plan, ValidationCatchesTampering) {
  const SasProblem p = chain();
  Plan plan;
  plan.steps = {{0}, {1}};
  plan.cost = 2.0;
  EXPECT_TRUE(validate_plan(plan, p)) << plan_violation(plan, p);
  Plan dropped = plan;
  dropped.steps[0].clear();
  EXPECT_FALSE(validate_plan(dropped, p));
  Plan together;
  together.steps = {{0, 1}};
  EXPECT_FALSE(validate_plan(together, p));
  Plan unknown;
  unknown.steps = {{7}};
  EXPECT_FALSE(validate_plan(unknown, p));
  Plan wrong_cost = plan;
  wrong_cost.cost = 5.0;
  EXPECT_FALSE(validate_plan(wrong_cost, p));
  EXPECT_FALSE(validate_plan(Plan{}, p));
  SasProblem at_goal = p;
  at_goal.initial = State{2};
  EXPECT_TRUE(validate_plan(Plan{}, at_goal));
}

TEST(Encoder, RandomPipelineDecodesValidPlans) {
  std::mt19937_64 rng(77);
  int solved = 0;
  for (int i = 0; i < 200; ++i) {
    const SasProblem p = random_sas(rng, 4, 3, 7, 3);
    const int l = 1 + i % 3;
    const Encoding e = encode(p, l);
    const SolveResult r = solve(e.wcnf);
    if (r.status != SolveStatus::optimal) continue;
    ++solved;
    const Plan plan = decode(r.model, e.vars, p);
    ASSERT_TRUE(validate_plan(plan, p)) << plan_violation(plan, p);
    // soft cost equals the summed (integer) action costs
    EXPECT_DOUBLE_EQ(static_cast<double>(r.cost) / e.weight_scale, plan.cost);
  }
  EXPECT_GT(solved, 50);
}

TEST(Encoder, MatchesBruteForceAndIsMonotone) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 300; ++i) {
    const SasProblem p = random_sas(rng, 3, 3, 6, 2);
    double last = -1.0;
    for (int l = 1; l <= 3; ++l) {
      const double expected = brute_force_plan_cost(p, l);
      const SolveResult r = solve(encode(p, l).wcnf);
      if (p.is_goal(p.initial)) break;
      ASSERT_EQ(expected >= 0.0, r.status == SolveStatus::optimal) << "instance " << i << " L=" << l;
      if (expected < 0.0) continue;
      EXPECT_NEAR(static_cast<double>(r.cost) / 1000.0, expected, 1e-9) << "instance " << i << " L=" << l;
      if (last >= 0.0) EXPECT_LE(expected, last);
      last = expected;
    }
  }
}

TEST(Encoder, ScaledWeights) {
  EXPECT_EQ(scaled_weight(1.0, 1000.0), 1000u);
  EXPECT_EQ(scaled_weight(0.0001, 1000.0), 1u);
  EXPECT_EQ(scaled_weight(2.3456, 1000.0), 2346u);
}

TEST(Online, ExampleInstance) {
  const soap::testing::ExampleSetup ex;
  const SoapContext ctx{ex.forest, ex.table, ex.library, strict_params()};
  const GoalDatabase db =
      preprocess({State{0, 0, 0}, State{0, 1, 0}, State{0, 1, 1}}, ex.library, ex.forest, ex.table, strict_params());
  const State initial = to_state({0, 2, 1200}, ex.table, ex.forest.features());
  const SasBuild build = build_sas(ctx, initial, db, 2, SimilarityWeights::uniform(3));
  EXPECT_EQ(build.source, GoalSource::neighbors);
  ASSERT_EQ(build.neighbors.size(), 2u);
  EXPECT_EQ(build.neighbors[0].key, (State{0, 0, 0}));
  EXPECT_EQ(build.neighbors[1].key, (State{0, 1, 1}));
  EXPECT_EQ(build.problem.goals, (std::vector<State>{{0, 1, 2}}));

  PlannerOptions opt;
  opt.max_makespan = 3;
  const OnlineResult res = plan_online(ctx, initial, db, 2, SimilarityWeights::uniform(3), opt);
  ASSERT_EQ(res.result.status, PlanStatus::solved);
  const OracleResult oracle = oracle_plan(initial, ex.library, ex.forest, ex.table, strict_params());
  EXPECT_DOUBLE_EQ(res.result.plan.cost, oracle.plan.cost);
  EXPECT_EQ(res.result.makespan, 1);
}

TEST(Online, GoalSources) {
  const soap::testing::ExampleSetup ex;
  const SoapContext ctx{ex.forest, ex.table, ex.library, strict_params()};
  GoalDatabase db(forest_fingerprint(ex.forest), strict_params());
  const auto w = SimilarityWeights::uniform(3);
  const SasBuild at_goal = build_sas(ctx, State{0, 1, 2}, db, 3, w);
  EXPECT_EQ(at_goal.source, GoalSource::already_goal);
  const OnlineResult empty = plan_online(ctx, State{0, 1, 2}, db, 3, w);
  EXPECT_EQ(empty.result.status, PlanStatus::solved);
  EXPECT_TRUE(empty.result.plan.empty());

  const SasBuild fallback = build_sas(ctx, State{0, 0, 0}, db, 3, w);
  EXPECT_EQ(fallback.source, GoalSource::fallback_search);
  EXPECT_EQ(fallback.problem.goals, (std::vector<State>{{0, 1, 2}}));
  EXPECT_EQ(build_sas(ctx, State{0, 0, 0}, db, 3, w, false).source, GoalSource::none);

  db.insert({State{0, 0, 0}, State{0, 1, 2}, 3.0, 1, SearchStatus::proved_exhausted});
  const SasBuild self = build_sas(ctx, State{0, 0, 0}, db, 1, w);
  EXPECT_EQ(self.source, GoalSource::neighbors);
  EXPECT_EQ(self.neighbors[0].key, (State{0, 0, 0}));
}

TEST(Online, CustomSolverModelIsRechecked) {
  const SasProblem p = chain();
  PlannerOptions opt;
  opt.max_makespan = 2;
  opt.solver = [](const WcnfInstance& w, const SolveOptions&) {
    SolveResult r;
    r.status = SolveStatus::optimal;
    r.has_model = true;
    r.model.assign(static_cast<std::size_t>(w.var_count()) + 1, false);
    return r;
  };
  EXPECT_THROW(solve_sas(p, opt), ValidationError);
}
