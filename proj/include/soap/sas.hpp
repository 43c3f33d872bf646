#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "soap/forest.hpp"
#include "soap/partitions.hpp"

namespace soap {

/// A single-variable value change. `from == kAny` marks a mechanical
/// transition, `from == to` a prevailing one.
struct Transition {
  static constexpr int kAny = -1;

  std::size_t var = 0;
  int from = 0;
  int to = 0;

  bool mechanical() const noexcept { return from == kAny; }
  bool prevailing() const noexcept { return from == to; }
  bool applicable(const State& s) const { return mechanical() || s[var] == from; }

  friend auto operator<=>(const Transition&, const Transition&) = default;
  friend bool operator==(const Transition&, const Transition&) = default;

  std::string str() const;
};

bool transition_mutex(const Transition& a, const Transition& b);

/// A set of pairwise compatible transitions with a positive cost.
class Action {
 public:
  Action(std::string id, std::vector<Transition> transitions, double cost);

  const std::string& id() const noexcept { return id_; }
  const std::vector<Transition>& transitions() const noexcept { return transitions_; }
  double cost() const noexcept { return cost_; }

  friend bool operator==(const Action&, const Action&) = default;

 private:
  std::string id_;
  std::vector<Transition> transitions_;  // sorted, unique
  double cost_;
};

bool action_mutex(const Action& a, const Action& b);
bool applicable(const Action& a, const State& s);

/// s (+) a. Throws InvalidInput when a is not applicable to s.
State apply(const State& s, const Action& a);

/// Per-feature cost weights for squared-distance action costs.
struct CostModel {
  std::vector<double> beta;

  explicit CostModel(std::vector<double> weights);
  static CostModel uniform(std::size_t features, double weight = 1.0);
  /// Weights drawn uniformly from [lo, hi].
  static CostModel random(std::size_t features, double lo, double hi, std::uint64_t seed);

  /// Weighted squared distance between partition indices.
  double cost(const State& from, const State& to) const;
};

/// An immutable set of actions validated against a partition table.
class ActionLibrary {
 public:
  ActionLibrary() = default;
  ActionLibrary(std::vector<Action> actions, const PartitionTable& table,
                const std::vector<FeatureMeta>& features);

  const std::vector<Action>& actions() const noexcept { return actions_; }
  std::size_t size() const noexcept { return actions_.size(); }
  bool empty() const noexcept { return actions_.empty(); }
  const Action& operator[](std::size_t i) const { return actions_[i]; }

  /// Mean action cost; 0 for an empty library.
  double mean_cost() const;

 private:
  std::vector<Action> actions_;
};

/// One single-transition action per soft feature and ordered pair of distinct
/// partitions, costing beta_j * (f - g)^2. Hard features get none.
ActionLibrary default_action_library(const PartitionTable& table,
                                     const std::vector<FeatureMeta>& features,
                                     const CostModel& costs);

/// Parses a JSON action spec:
///   [{"id": "...", "cost": 7, "transitions": [{"feature": 1, "from": 0, "to": 1}]}]
/// `feature` is an index or a name; `from` may be "*" (mechanical). Partition
/// values are given as integer indices, category names, or raw numerical
/// values (a floating literal such as 1500.0, or {"value": 1500}).
ActionLibrary parse_action_spec(std::string_view text, const PartitionTable& table,
                                const std::vector<FeatureMeta>& features);
ActionLibrary load_action_spec(const std::filesystem::path& path, const PartitionTable& table,
                               const std::vector<FeatureMeta>& features);

struct Edge {
  std::size_t action;
  State target;
  double cost;
};

/// Outgoing edges of s in the action graph: one per applicable action.
std::vector<Edge> neighbors(const State& s, const ActionLibrary& library);

}  // namespace soap
