#include <gtest/gtest.h>

#include <filesystem>

#include "soap/baselines.hpp"
#include "soap/error.hpp"
#include "soap/offline.hpp"
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

double path_cost(const SearchResult& r, const ActionLibrary& lib, State& end) {
  double cost = 0.0;
  end = r.entry.initial;
  for (std::size_t a : r.path) {
    end = apply(end, lib[a]);
    cost += lib[a].cost();
  }
  return cost;
}

}  // namespace

TEST(Heuristic, Values) {
  EXPECT_EQ(heuristic(0.9, 0.9, 10.0), 0.0);
  EXPECT_EQ(heuristic(1.0, 0.5, 10.0), 0.0);
  EXPECT_DOUBLE_EQ(heuristic(0.4, 0.9, 10.0), 5.0);
  const soap::testing::ExampleSetup ex;
  SearchParams p = strict_params();
  EXPECT_DOUBLE_EQ(p.resolved_alpha(ex.library), ex.library.mean_cost());
  p.alpha = 2.0;
  EXPECT_DOUBLE_EQ(p.resolved_alpha(ex.library), 2.0);
  EXPECT_DOUBLE_EQ(heuristic(State{0, 0, 0}, p, 2.0, ex.forest, ex.table), 2.0);
}

TEST(SearchParams, Validation) {
  SearchParams p;
  p.z = 0.0;
  EXPECT_THROW(p.check(), InvalidInput);
  p.z = 1.5;
  EXPECT_THROW(p.check(), InvalidInput);
  p.z = 0.5;
  p.alpha = -1.0;
  EXPECT_THROW(p.check(), InvalidInput);
  p.alpha.reset();
  p.patience = 0;
  EXPECT_THROW(p.check(), InvalidInput);
}

TEST(PreferredGoal, ExampleFromOrigin) {
  const soap::testing::ExampleSetup ex;
  const SearchResult r = find_preferred_goal(State{0, 0, 0}, ex.library, ex.forest, ex.table, strict_params());
  ASSERT_TRUE(r.entry.has_goal());
  EXPECT_EQ(*r.entry.goal, (State{0, 1, 2}));
  EXPECT_DOUBLE_EQ(r.entry.cost, 3.0);
  EXPECT_EQ(r.path.size(), 3u);
  State end;
  EXPECT_DOUBLE_EQ(path_cost(r, ex.library, end), r.entry.cost);
  EXPECT_EQ(end, *r.entry.goal);
  EXPECT_EQ(r.entry.status, SearchStatus::proved_exhausted);
}

TEST(PreferredGoal, AlreadySatisfied) {
  const soap::testing::ExampleSetup ex;
  const SearchResult r = find_preferred_goal(State{0, 1, 2}, ex.library, ex.forest, ex.table, strict_params());
  EXPECT_EQ(*r.entry.goal, (State{0, 1, 2}));
  EXPECT_EQ(r.entry.cost, 0.0);
  EXPECT_TRUE(r.path.empty());
}

TEST(PreferredGoal, UnreachableGoal) {
  const soap::testing::ExampleSetup ex;
  // only x3 may move and the first tree insists on x2 >= 5
  const auto lib = parse_action_spec(R"([{"id": "up", "cost": 1, "transitions": [{"feature": 2, "from": 0, "to": 1}]}])",
                                     ex.table, ex.forest.features());
  const SearchResult r = find_preferred_goal(State{0, 0, 0}, lib, ex.forest, ex.table, strict_params());
  EXPECT_FALSE(r.entry.has_goal());
  EXPECT_EQ(r.entry.status, SearchStatus::no_goal);
}

TEST(Preprocess, ExampleThreeStates) {
  const soap::testing::ExampleSetup ex;
  const std::vector<State> states{{0, 0, 0}, {0, 1, 0}, {0, 1, 1}};
  const GoalDatabase db = preprocess(states, ex.library, ex.forest, ex.table, strict_params(), 2);
  ASSERT_EQ(db.size(), 3u);
  for (const State& s : states) {
    ASSERT_NE(db.find(s), nullptr);
    EXPECT_EQ(*db.find(s)->goal, (State{0, 1, 2}));
  }
  EXPECT_DOUBLE_EQ(db.find(State{0, 1, 0})->cost, 2.0);
  EXPECT_DOUBLE_EQ(db.find(State{0, 1, 1})->cost, 1.0);
  const GoalDatabase again = preprocess(states, ex.library, ex.forest, ex.table, strict_params(), 1);
  EXPECT_EQ(database_to_jsonl(db), database_to_jsonl(again));
}

TEST(GoalDb, JsonlRoundTripAndErrors) {
  const soap::testing::ExampleSetup ex;
  const auto states = enumerate_states(ex.table, 100);
  GoalDatabase db = preprocess(states, ex.library, ex.forest, ex.table, strict_params());
  const GoalDatabase back = database_from_jsonl(database_to_jsonl(db));
  EXPECT_EQ(back, db);

  EXPECT_THROW(database_from_jsonl(""), ParseError);
  const std::string text = database_to_jsonl(db);
  const std::string broken = text.substr(0, text.find('\n') + 1) + "{\"initial\": [0, 0]\n";
  try {
    database_from_jsonl(broken);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }

  const auto dir = std::filesystem::temp_directory_path() / "soap_db_test";
  std::filesystem::create_directories(dir);
  save_database(db, dir / "db.jsonl");
  EXPECT_EQ(load_database(dir / "db.jsonl", forest_fingerprint(ex.forest)), db);
  EXPECT_THROW(load_database(dir / "db.jsonl", "0000000000000000"), InvalidInput);
  std::filesystem::remove_all(dir);
}

TEST(GoalDb, MergeRules) {
  const std::string fp = "abc";
  GoalDatabase a(fp, strict_params());
  GoalDatabase b(fp, strict_params());
  a.insert({State{0, 0, 0}, State{0, 1, 2}, 5.0, 10, SearchStatus::patience_stop});
  a.insert({State{0, 1, 0}, State{0, 1, 2}, 2.0, 3, SearchStatus::proved_exhausted});
  b.insert({State{0, 0, 0}, State{0, 1, 2}, 3.0, 12, SearchStatus::proved_exhausted});
  b.insert({State{0, 1, 1}, State{0, 1, 2}, 1.0, 2, SearchStatus::proved_exhausted});
  const GoalDatabase m = merge(a, b);
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.find(State{0, 0, 0})->cost, 3.0);
  EXPECT_EQ(merge(b, a).find(State{0, 0, 0})->cost, 3.0);

  GoalDatabase c(fp, strict_params());
  c.insert({State{1, 1, 1}, std::nullopt, 0.0, 4, SearchStatus::no_goal});
  EXPECT_EQ(merge(a, c).size(), a.size() + c.size());

  EXPECT_THROW(merge(a, GoalDatabase("other", strict_params())), InvalidInput);
  SearchParams loose = strict_params();
  loose.z = 0.5;
  EXPECT_THROW(merge(a, GoalDatabase(fp, loose)), InvalidInput);
}

TEST(PreferredGoal, PatienceMonotoneAndExhaustiveOptimal) {
  soap::testing::SetupShape shape;
  shape.max_states = 1024;
  for (std::uint64_t seed = 100; seed < 115; ++seed) {
    const auto setup = soap::testing::random_setup(seed, shape);
    const auto states = sample_state_count(setup.table, std::min<std::uint64_t>(3, setup.table.state_count()), seed);
    for (const State& s : states) {
      SearchParams p;
      p.target = 1;
      p.z = 0.5;
      double last = -1.0;
      for (std::uint64_t patience : {1u, 2u, 5u, 20u, 100u, 10000u}) {
        p.patience = patience;
        const SearchResult r = find_preferred_goal(s, setup.library, setup.forest, setup.table, p);
        if (!r.entry.has_goal()) {
          EXPECT_LT(last, 0.0);
          continue;
        }
        State end;
        EXPECT_NEAR(path_cost(r, setup.library, end), r.entry.cost, 1e-9);
        EXPECT_EQ(end, *r.entry.goal);
        EXPECT_GE(state_proba(setup.forest, setup.table, end, 1), p.z);
        if (last >= 0.0) EXPECT_LE(r.entry.cost, last + 1e-9);
        last = r.entry.cost;
      }
      p.alpha = 0.0;
      p.patience = setup.table.state_count();
      const SearchResult exact = find_preferred_goal(s, setup.library, setup.forest, setup.table, p);
      const OracleResult oracle = oracle_plan(s, setup.library, setup.forest, setup.table, p);
      ASSERT_EQ(exact.entry.has_goal(), oracle.found);
      if (oracle.found) EXPECT_NEAR(exact.entry.cost, oracle.plan.cost, 1e-9);
    }
  }
}
