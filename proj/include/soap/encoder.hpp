#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "soap/knn.hpp"
#include "soap/maxsat.hpp"
#include "soap/offline.hpp"
#include "soap/sas.hpp"

namespace soap {

/// Multi-valued planning problem whose goal is a set of full states.
struct SasProblem {
  std::vector<int> domains;
  std::vector<Action> actions;
  State initial;
  std::vector<State> goals;

  /// Throws InvalidInput on out-of-range values or malformed actions.
  void check() const;
  bool is_goal(const State& s) const;
};

/// Numbering of the propositional variables of one encoding: transition
/// variables step by step, then action variables step by step, then one
/// variable per goal.
class VarMap {
 public:
  VarMap(std::vector<Transition> transitions, std::size_t action_count, std::size_t goal_count,
         int makespan);

  const std::vector<Transition>& transitions() const noexcept { return transitions_; }
  std::size_t action_count() const noexcept { return actions_; }
  std::size_t goal_count() const noexcept { return goals_; }
  int makespan() const noexcept { return makespan_; }
  int var_count() const noexcept;

  /// Steps t run from 1 to the makespan.
  Lit transition(std::size_t i, int t) const;
  Lit action(std::size_t a, int t) const;
  Lit goal(std::size_t g) const;

  /// Human-readable meaning of variable v, e.g. "action buy@2".
  std::string describe(int v, const SasProblem& problem) const;

 private:
  std::vector<Transition> transitions_;
  std::size_t actions_;
  std::size_t goals_;
  int makespan_;
};

struct Encoding {
  WcnfInstance wcnf;
  VarMap vars;
  double weight_scale;
};

/// Transitions that get variables: every prevailing transition plus every
/// transition used by some action, sorted.
std::vector<Transition> encoding_transitions(const SasProblem& problem);

/// Integer soft weight of an action: round(cost * scale), at least 1.
std::uint64_t scaled_weight(double cost, double scale);

/// Weighted partial Max-SAT encoding of plans with `makespan` steps.
Encoding encode(const SasProblem& problem, int makespan, double weight_scale = 1000.0);

/// Writes "<var> <meaning>" lines for every variable.
void write_varmap(const Encoding& enc, const SasProblem& problem, std::ostream& out);

/// Steps of action indices; a step may be empty.
struct Plan {
  std::vector<std::vector<std::size_t>> steps;
  double cost = 0.0;
  std::optional<State> goal;  // goal reached by executing the plan

  std::size_t action_count() const;
  bool empty() const { return action_count() == 0; }
};

/// Reads P_t = {a : U(a, t) true} from a model and replays it to fill in
/// cost and goal. Does not validate.
Plan decode(const Assignment& model, const VarMap& vars, const SasProblem& problem);

/// Replays the plan from the initial state. Returns a description of the
/// first violated condition, or an empty string for a valid plan.
std::string plan_violation(const Plan& plan, const SasProblem& problem);
bool validate_plan(const Plan& plan, const SasProblem& problem);

/// Total cost of the actions in a plan.
double plan_cost(const Plan& plan, const SasProblem& problem);

struct PlannerOptions {
  int max_makespan = 10;
  bool sweep = false;  // solve every makespan up to the limit and keep the cheapest plan
  double weight_scale = 1000.0;
  std::chrono::milliseconds timeout{0};  // per solver call; 0 disables
  /// Replaces the built-in solver when set.
  std::function<SolveResult(const WcnfInstance&, const SolveOptions&)> solver;
};

enum class PlanStatus : std::uint8_t { solved, unsolvable, timeout };
const char* to_string(PlanStatus s);

struct MakespanAttempt {
  int makespan;
  SolveStatus status;
  std::uint64_t wcnf_cost;
  std::uint64_t nodes;
  int vars;
  std::size_t hard_clauses;
  std::size_t soft_clauses;
};

struct PlanResult {
  PlanStatus status = PlanStatus::unsolvable;
  Plan plan;          // for a timeout, the best plan found so far if any
  int makespan = 0;   // makespan of the returned plan
  std::vector<MakespanAttempt> attempts;
  std::string diagnostics;
};

/// Bounded makespan loop: L = 1, 2, ... up to the limit. Returns the
/// cheapest plan at the first satisfiable makespan, or across all makespans
/// in sweep mode. Throws ValidationError if a decoded plan is invalid.
PlanResult solve_sas(const SasProblem& problem, const PlannerOptions& options = {});

/// Everything needed to map feature vectors to the planning problem.
struct SoapContext {
  const RandomForest& forest;
  const PartitionTable& table;
  const ActionLibrary& library;
  SearchParams params;
};

enum class GoalSource : std::uint8_t { already_goal, neighbors, fallback_search, none };
const char* to_string(GoalSource s);

struct SasBuild {
  SasProblem problem;
  GoalSource source = GoalSource::none;
  std::vector<Neighbor> neighbors;
};

/// Goals are the deduplicated preferred goals of the K most similar
/// database entries that meet the threshold; without any, a fresh preferred
/// goal search from the initial state supplies one (when allowed).
SasBuild build_sas(const SoapContext& ctx, const State& initial, const GoalDatabase& db,
                   std::size_t k, const SimilarityWeights& weights, bool allow_fallback = true);

struct OnlineResult {
  SasBuild sas;
  PlanResult result;
};

OnlineResult plan_online(const SoapContext& ctx, const State& initial, const GoalDatabase& db,
                         std::size_t k, const SimilarityWeights& weights,
                         const PlannerOptions& options = {});

}  // namespace soap
