#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "soap/offline.hpp"
#include "soap/sas.hpp"

namespace soap {

/// How greedy picks among actions that raise the target probability.
enum class GreedyRule : std::uint8_t {
  ratio,      // largest probability gain per unit cost
  max_delta,  // largest gain, cheaper first on ties
  min_cost,   // cheapest, larger gain first on ties
};

const char* to_string(GreedyRule r);
GreedyRule greedy_rule_from_string(const std::string& s);

/// A sequential plan: one action per step.
struct SequentialPlan {
  bool success = false;
  std::vector<std::size_t> actions;
  double cost = 0.0;
  State final_state;
};

/// Repeatedly applies the best applicable action that strictly raises
/// p(target | s) until p reaches z. Fails when no action raises it.
SequentialPlan greedy_plan(const State& initial, const ActionLibrary& library,
                           const RandomForest& forest, const PartitionTable& table,
                           const SearchParams& params, GreedyRule rule = GreedyRule::ratio);

struct OracleResult {
  bool found = false;
  SequentialPlan plan;
  std::uint64_t states_seen = 0;
};

/// Dijkstra over the action graph to the cheapest state meeting the goal
/// threshold. Throws InvalidInput once more than `state_cap` states are seen.
OracleResult oracle_plan(const State& initial, const ActionLibrary& library,
                         const RandomForest& forest, const PartitionTable& table,
                         const SearchParams& params, std::uint64_t state_cap = 1'000'000);

}  // namespace soap
