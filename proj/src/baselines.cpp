#include "soap/baselines.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <unordered_map>

#include "soap/error.hpp"

namespace soap {

const char* to_string(GreedyRule r) {
  switch (r) {
    case GreedyRule::ratio: return "ratio";
    case GreedyRule::max_delta: return "max_delta";
    case GreedyRule::min_cost: return "min_cost";
  }
  return "ratio";
}

GreedyRule greedy_rule_from_string(const std::string& s) {
  for (auto r : {GreedyRule::ratio, GreedyRule::max_delta, GreedyRule::min_cost})
    if (s == to_string(r)) return r;
  throw InvalidInput("unknown greedy rule '" + s + "' (expected ratio, max_delta or min_cost)");
}

SequentialPlan greedy_plan(const State& initial, const ActionLibrary& library,
                           const RandomForest& forest, const PartitionTable& table,
                           const SearchParams& params, GreedyRule rule) {
  params.check();
  table.check_state(initial);
  SequentialPlan plan;
  State s = initial;
  double p = state_proba(forest, table, s, params.target);
  while (p < params.z) {
    std::optional<std::size_t> best;
    double best_gain = 0.0;
    double best_cost = 0.0;
    State best_next;
    for (std::size_t a = 0; a < library.size(); ++a) {
      if (!applicable(library[a], s)) continue;
      State next = apply(s, library[a]);
      const double gain = state_proba(forest, table, next, params.target) - p;
      if (!(gain > 0.0)) continue;
      const double cost = library[a].cost();
      bool better = !best;
      if (best) {
        switch (rule) {
          case GreedyRule::ratio:
            better = gain * best_cost > best_gain * cost;
            break;
          case GreedyRule::max_delta:
            better = gain > best_gain || (gain == best_gain && cost < best_cost);
            break;
          case GreedyRule::min_cost:
            better = cost < best_cost || (cost == best_cost && gain > best_gain);
            break;
        }
      }
      if (better) {
        best = a;
        best_gain = gain;
        best_cost = cost;
        best_next = std::move(next);
      }
    }
    if (!best) {
      plan.final_state = s;
      return plan;
    }
    plan.actions.push_back(*best);
    plan.cost += best_cost;
    s = std::move(best_next);
    p = state_proba(forest, table, s, params.target);
  }
  plan.success = true;
  plan.final_state = s;
  return plan;
}

OracleResult oracle_plan(const State& initial, const ActionLibrary& library,
                         const RandomForest& forest, const PartitionTable& table,
                         const SearchParams& params, std::uint64_t state_cap) {
  params.check();
  table.check_state(initial);
  struct Item {
    double g;
    State s;
    bool operator>(const Item& o) const { return g != o.g ? g > o.g : s > o.s; }
  };
  struct Parent {
    State from;
    std::size_t action;
  };
  std::unordered_map<State, double, StateHash> dist;
  std::unordered_map<State, Parent, StateHash> parent;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  OracleResult res;
  dist[initial] = 0.0;
  open.push(Item{0.0, initial});
  while (!open.empty()) {
    Item it = open.top();
    open.pop();
    if (it.g > dist[it.s]) continue;
    if (state_proba(forest, table, it.s, params.target) >= params.z) {
      res.found = true;
      res.plan.success = true;
      res.plan.cost = it.g;
      res.plan.final_state = it.s;
      for (State at = it.s; at != initial;) {
        const Parent& p = parent.at(at);
        res.plan.actions.push_back(p.action);
        at = p.from;
      }
      std::reverse(res.plan.actions.begin(), res.plan.actions.end());
      res.states_seen = dist.size();
      return res;
    }
    for (Edge& e : neighbors(it.s, library)) {
      const double g = it.g + e.cost;
      auto d = dist.find(e.target);
      if (d != dist.end() && !(g < d->second)) continue;
      if (d == dist.end() && dist.size() >= state_cap)
        throw InvalidInput("oracle refused: more than " + std::to_string(state_cap) +
                           " reachable states");
      dist[e.target] = g;
      parent.insert_or_assign(e.target, Parent{it.s, e.action});
      open.push(Item{g, std::move(e.target)});
    }
  }
  res.states_seen = dist.size();
  res.plan.final_state = initial;
  return res;
}

}  // namespace soap
