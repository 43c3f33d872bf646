#include "soap/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "soap/error.hpp"

namespace soap {

void SasProblem::check() const {
  for (int d : domains)
    if (d < 1) throw InvalidInput("variable domains must be nonempty");
  auto check_state = [&](const State& s, const std::string& what) {
    if (s.size() != domains.size()) throw InvalidInput(what + " has the wrong arity");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] < 0 || s[i] >= domains[i]) throw InvalidInput(what + " is out of range");
  };
  check_state(initial, "initial state");
  for (const State& g : goals) check_state(g, "goal " + g.str());
  for (const Action& a : actions)
    for (const Transition& t : a.transitions()) {
      if (t.var >= domains.size()) throw InvalidInput("action " + a.id() + ": unknown variable");
      const int d = domains[t.var];
      if (t.to < 0 || t.to >= d || (!t.mechanical() && (t.from < 0 || t.from >= d)))
        throw InvalidInput("action " + a.id() + ": value out of range in " + t.str());
    }
}

bool SasProblem::is_goal(const State& s) const {
  return std::find(goals.begin(), goals.end(), s) != goals.end();
}

VarMap::VarMap(std::vector<Transition> transitions, std::size_t action_count,
               std::size_t goal_count, int makespan)
    : transitions_(std::move(transitions)),
      actions_(action_count),
      goals_(goal_count),
      makespan_(makespan) {
  if (makespan < 1) throw InvalidInput("makespan must be >= 1");
  const auto total = static_cast<unsigned long long>(makespan) * (transitions_.size() + actions_) + goals_;
  if (total > static_cast<unsigned long long>(std::numeric_limits<int>::max()))
    throw InvalidInput("encoding needs too many variables");
}

int VarMap::var_count() const noexcept {
  return static_cast<int>(static_cast<std::size_t>(makespan_) * (transitions_.size() + actions_) + goals_);
}

Lit VarMap::transition(std::size_t i, int t) const {
  return static_cast<Lit>(1 + static_cast<std::size_t>(t - 1) * transitions_.size() + i);
}

Lit VarMap::action(std::size_t a, int t) const {
  return static_cast<Lit>(1 + static_cast<std::size_t>(makespan_) * transitions_.size() +
                          static_cast<std::size_t>(t - 1) * actions_ + a);
}

Lit VarMap::goal(std::size_t g) const {
  return static_cast<Lit>(1 + static_cast<std::size_t>(makespan_) * (transitions_.size() + actions_) + g);
}

std::string VarMap::describe(int v, const SasProblem& problem) const {
  if (v < 1 || v > var_count()) throw InvalidInput("variable out of range");
  auto k = static_cast<std::size_t>(v - 1);
  const std::size_t nt = transitions_.size() * static_cast<std::size_t>(makespan_);
  if (k < nt)
    return "transition " + transitions_[k % transitions_.size()].str() + "@" +
           std::to_string(k / transitions_.size() + 1);
  k -= nt;
  const std::size_t na = actions_ * static_cast<std::size_t>(makespan_);
  if (k < na)
    return "action " + problem.actions[k % actions_].id() + "@" + std::to_string(k / actions_ + 1);
  k -= na;
  return "goal " + problem.goals[k].str();
}

std::vector<Transition> encoding_transitions(const SasProblem& problem) {
  std::vector<Transition> out;
  for (std::size_t x = 0; x < problem.domains.size(); ++x)
    for (int v = 0; v < problem.domains[x]; ++v) out.push_back(Transition{x, v, v});
  for (const Action& a : problem.actions)
    out.insert(out.end(), a.transitions().begin(), a.transitions().end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::uint64_t scaled_weight(double cost, double scale) {
  const double w = std::round(cost * scale);
  if (!(w < 9.0e18)) throw InvalidInput("scaled action cost overflows");
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(w));
}

Encoding encode(const SasProblem& problem, int makespan, double weight_scale) {
  if (makespan < 1) throw InvalidInput("makespan must be >= 1");
  if (!(weight_scale > 0.0)) throw InvalidInput("weight scale must be positive");
  problem.check();
  const int L = makespan;
  const std::vector<Transition> T = encoding_transitions(problem);
  VarMap vm(T, problem.actions.size(), problem.goals.size(), L);
  WcnfInstance w(vm.var_count());

  const std::size_t M = problem.domains.size();
  // outgoing[x][f]: transitions applicable at value f; incoming[x][g]: ending at g
  std::vector<std::vector<std::vector<std::size_t>>> outgoing(M), incoming(M);
  std::vector<std::vector<std::size_t>> by_var(M);
  std::vector<bool> has_mechanical(M, false);
  for (std::size_t x = 0; x < M; ++x) {
    outgoing[x].resize(static_cast<std::size_t>(problem.domains[x]));
    incoming[x].resize(static_cast<std::size_t>(problem.domains[x]));
  }
  for (std::size_t i = 0; i < T.size(); ++i) {
    const Transition& d = T[i];
    by_var[d.var].push_back(i);
    incoming[d.var][d.to].push_back(i);
    if (d.mechanical()) {
      has_mechanical[d.var] = true;
      for (auto& out : outgoing[d.var]) out.push_back(i);
    } else {
      outgoing[d.var][d.from].push_back(i);
    }
  }

  auto any_of = [&](const std::vector<std::size_t>& ids, int t, std::vector<Lit> head) {
    for (std::size_t j : ids) head.push_back(vm.transition(j, t));
    return head;
  };

  // initial state
  for (std::size_t x = 0; x < M; ++x) {
    const int f = problem.initial[x];
    w.add_hard(any_of(outgoing[x][f], 1, {}));
    if (has_mechanical[x])
      for (std::size_t i : by_var[x])
        if (!T[i].mechanical() && T[i].from != f) w.add_hard({-vm.transition(i, 1)});
  }

  // goal disjunction and goal conditions
  std::vector<Lit> some_goal;
  for (std::size_t g = 0; g < problem.goals.size(); ++g) some_goal.push_back(vm.goal(g));
  w.add_hard(some_goal);
  for (std::size_t g = 0; g < problem.goals.size(); ++g)
    for (std::size_t x = 0; x < M; ++x)
      w.add_hard(any_of(incoming[x][problem.goals[g][x]], L, {-vm.goal(g)}));

  for (std::size_t i = 0; i < T.size(); ++i) {
    const Transition& d = T[i];
    for (int t = 1; t < L; ++t)
      w.add_hard(any_of(outgoing[d.var][d.to], t + 1, {-vm.transition(i, t)}));
    if (!d.mechanical())
      for (int t = 2; t <= L; ++t)
        w.add_hard(any_of(incoming[d.var][d.from], t - 1, {-vm.transition(i, t)}));
  }

  for (std::size_t x = 0; x < M; ++x)
    for (std::size_t a = 0; a < by_var[x].size(); ++a)
      for (std::size_t b = a + 1; b < by_var[x].size(); ++b) {
        const std::size_t i = by_var[x][a], j = by_var[x][b];
        if (!transition_mutex(T[i], T[j])) continue;
        for (int t = 1; t <= L; ++t) w.add_hard({-vm.transition(i, t), -vm.transition(j, t)});
      }

  const auto& O = problem.actions;
  for (std::size_t a = 0; a < O.size(); ++a)
    for (std::size_t b = a + 1; b < O.size(); ++b) {
      if (!action_mutex(O[a], O[b])) continue;
      for (int t = 1; t <= L; ++t) w.add_hard({-vm.action(a, t), -vm.action(b, t)});
    }

  auto index_of = [&](const Transition& d) {
    return static_cast<std::size_t>(std::lower_bound(T.begin(), T.end(), d) - T.begin());
  };
  std::vector<std::vector<std::size_t>> users(T.size());
  for (std::size_t a = 0; a < O.size(); ++a)
    for (const Transition& d : O[a].transitions()) {
      const std::size_t i = index_of(d);
      users[i].push_back(a);
      for (int t = 1; t <= L; ++t) w.add_hard({-vm.action(a, t), vm.transition(i, t)});
    }

  for (std::size_t i = 0; i < T.size(); ++i) {
    if (T[i].prevailing()) continue;
    for (int t = 1; t <= L; ++t) {
      std::vector<Lit> c{-vm.transition(i, t)};
      for (std::size_t a : users[i]) c.push_back(vm.action(a, t));
      w.add_hard(std::move(c));
    }
  }

  for (int t = 1; t <= L; ++t)
    for (std::size_t a = 0; a < O.size(); ++a)
      w.add_soft({-vm.action(a, t)}, scaled_weight(O[a].cost(), weight_scale));

  return Encoding{std::move(w), std::move(vm), weight_scale};
}

void write_varmap(const Encoding& enc, const SasProblem& problem, std::ostream& out) {
  for (int v = 1; v <= enc.vars.var_count(); ++v) out << v << ' ' << enc.vars.describe(v, problem) << '\n';
}

std::size_t Plan::action_count() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.size();
  return n;
}

double plan_cost(const Plan& plan, const SasProblem& problem) {
  double c = 0.0;
  for (const auto& step : plan.steps)
    for (std::size_t a : step) c += problem.actions.at(a).cost();
  return c;
}

namespace {

// Applies one step; returns an error message or empty.
std::string apply_step(State& s, const std::vector<std::size_t>& step, const SasProblem& problem,
                       std::size_t t) {
  const std::string where = "step " + std::to_string(t) + ": ";
  for (std::size_t a : step)
    if (a >= problem.actions.size()) return where + "unknown action index " + std::to_string(a);
  for (std::size_t i = 0; i < step.size(); ++i)
    for (std::size_t j = i + 1; j < step.size(); ++j) {
      const Action& a = problem.actions[step[i]];
      const Action& b = problem.actions[step[j]];
      if (step[i] == step[j]) return where + "action " + a.id() + " appears twice";
      if (action_mutex(a, b)) return where + "actions " + a.id() + " and " + b.id() + " are mutex";
    }
  for (std::size_t a : step)
    if (!applicable(problem.actions[a], s))
      return where + "action " + problem.actions[a].id() + " is not applicable in " + s.str();
  State next = s;
  for (std::size_t a : step)
    for (const Transition& d : problem.actions[a].transitions()) next[d.var] = d.to;
  s = std::move(next);
  return {};
}

}  // namespace

Plan decode(const Assignment& model, const VarMap& vars, const SasProblem& problem) {
  Plan plan;
  auto truth = [&](Lit v) { return static_cast<std::size_t>(v) < model.size() && model[v]; };
  for (int t = 1; t <= vars.makespan(); ++t) {
    std::vector<std::size_t> step;
    for (std::size_t a = 0; a < vars.action_count(); ++a)
      if (truth(vars.action(a, t))) step.push_back(a);
    plan.steps.push_back(std::move(step));
  }
  plan.cost = plan_cost(plan, problem);
  State s = problem.initial;
  for (std::size_t t = 0; t < plan.steps.size(); ++t)
    if (!apply_step(s, plan.steps[t], problem, t + 1).empty()) return plan;
  if (problem.is_goal(s)) plan.goal = s;
  return plan;
}

std::string plan_violation(const Plan& plan, const SasProblem& problem) {
  State s = problem.initial;
  for (std::size_t t = 0; t < plan.steps.size(); ++t) {
    std::string err = apply_step(s, plan.steps[t], problem, t + 1);
    if (!err.empty()) return err;
  }
  if (!problem.is_goal(s)) return "final state " + s.str() + " is not a goal";
  if (plan.goal && *plan.goal != s)
    return "recorded goal " + plan.goal->str() + " differs from reached state " + s.str();
  const double c = plan_cost(plan, problem);
  if (std::abs(c - plan.cost) > 1e-9 * std::max(1.0, std::abs(c)))
    return "recorded cost " + std::to_string(plan.cost) + " differs from " + std::to_string(c);
  return {};
}

bool validate_plan(const Plan& plan, const SasProblem& problem) {
  return plan_violation(plan, problem).empty();
}

const char* to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::solved: return "solved";
    case PlanStatus::unsolvable: return "unsolvable";
    case PlanStatus::timeout: return "timeout";
  }
  return "unsolvable";
}

const char* to_string(GoalSource s) {
  switch (s) {
    case GoalSource::already_goal: return "already_goal";
    case GoalSource::neighbors: return "neighbors";
    case GoalSource::fallback_search: return "fallback_search";
    case GoalSource::none: return "none";
  }
  return "none";
}

PlanResult solve_sas(const SasProblem& problem, const PlannerOptions& options) {
  if (options.max_makespan < 1) throw InvalidInput("maximum makespan must be >= 1");
  problem.check();
  PlanResult res;
  if (problem.is_goal(problem.initial)) {
    res.status = PlanStatus::solved;
    res.plan.goal = problem.initial;
    return res;
  }
  if (problem.goals.empty()) {
    res.diagnostics = "no goal state to plan for";
    return res;
  }
  bool found = false;
  for (int L = 1; L <= options.max_makespan; ++L) {
    const Encoding enc = encode(problem, L, options.weight_scale);
    const SolveOptions so{options.timeout};
    const SolveResult sr = options.solver ? options.solver(enc.wcnf, so) : solve(enc.wcnf, so);
    if (sr.has_model && !enc.wcnf.satisfies_hard(sr.model))
      throw ValidationError("solver model at makespan " + std::to_string(L) + " violates a hard clause");
    res.attempts.push_back(MakespanAttempt{L, sr.status, sr.cost, sr.nodes, enc.wcnf.var_count(),
                                           enc.wcnf.hard().size(), enc.wcnf.soft().size()});
    if (sr.status == SolveStatus::hard_unsat) continue;
    if (!sr.has_model) {
      res.status = PlanStatus::timeout;
      res.diagnostics = "solver timed out at makespan " + std::to_string(L);
      return res;
    }
    Plan plan = decode(sr.model, enc.vars, problem);
    if (const std::string err = plan_violation(plan, problem); !err.empty())
      throw ValidationError("decoded plan at makespan " + std::to_string(L) + " is invalid: " + err);
    if (!found || plan.cost < res.plan.cost) {
      res.plan = std::move(plan);
      res.makespan = L;
      found = true;
    }
    if (sr.status == SolveStatus::timeout) {
      res.status = PlanStatus::timeout;
      res.diagnostics = "solver timed out at makespan " + std::to_string(L) + "; plan may be suboptimal";
      return res;
    }
    if (!options.sweep) break;
  }
  if (found) {
    res.status = PlanStatus::solved;
  } else {
    res.diagnostics = "no plan with makespan <= " + std::to_string(options.max_makespan);
  }
  return res;
}

SasBuild build_sas(const SoapContext& ctx, const State& initial, const GoalDatabase& db,
                   std::size_t k, const SimilarityWeights& weights, bool allow_fallback) {
  ctx.params.check();
  ctx.table.check_state(initial);
  SasBuild out;
  SasProblem& p = out.problem;
  for (std::size_t i = 0; i < ctx.table.size(); ++i) p.domains.push_back(ctx.table.count(i));
  p.actions = ctx.library.actions();
  p.initial = initial;

  auto meets = [&](const State& s) {
    return state_proba(ctx.forest, ctx.table, s, ctx.params.target) >= ctx.params.z;
  };
  if (meets(initial)) {
    out.source = GoalSource::already_goal;
    p.goals.push_back(initial);
    return out;
  }
  out.neighbors = k_nearest(initial, db, k, weights, ctx.forest.features(), ctx.table);
  std::set<State> seen;
  for (const Neighbor& n : out.neighbors) {
    const State& g = *n.entry.goal;
    if (!ctx.table.valid(g) || !meets(g) || !seen.insert(g).second) continue;
    p.goals.push_back(g);
  }
  if (!p.goals.empty()) {
    out.source = GoalSource::neighbors;
    return out;
  }
  if (allow_fallback) {
    const SearchResult r = find_preferred_goal(initial, ctx.library, ctx.forest, ctx.table, ctx.params);
    if (r.entry.goal) {
      p.goals.push_back(*r.entry.goal);
      out.source = GoalSource::fallback_search;
    }
  }
  return out;
}

OnlineResult plan_online(const SoapContext& ctx, const State& initial, const GoalDatabase& db,
                         std::size_t k, const SimilarityWeights& weights,
                         const PlannerOptions& options) {
  OnlineResult out;
  out.sas = build_sas(ctx, initial, db, k, weights);
  if (out.sas.source == GoalSource::none) {
    out.result.status = PlanStatus::unsolvable;
    out.result.diagnostics = "no reachable goal state from " + initial.str();
    return out;
  }
  out.result = solve_sas(out.sas.problem, options);
  return out;
}

}  // namespace soap
