#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "soap/forest.hpp"
#include "soap/partitions.hpp"
#include "soap/sas.hpp"

namespace soap {

struct SearchParams {
  Label target = 1;
  double z = 0.5;                      // goal threshold on p(y = target | s)
  std::optional<double> alpha;         // heuristic scale; empty means mean action cost
  std::uint64_t patience = 10'000'000;  // expansions since the last improvement
  std::uint64_t node_budget = 5'000'000;

  void check() const;
  double resolved_alpha(const ActionLibrary& library) const {
    return alpha ? *alpha : library.mean_cost();
  }

  friend bool operator==(const SearchParams&, const SearchParams&) = default;
};

enum class SearchStatus : std::uint8_t { proved_exhausted, patience_stop, budget_stop, no_goal };

const char* to_string(SearchStatus s);
SearchStatus search_status_from_string(const std::string& s);

struct PreferredGoalEntry {
  State initial;
  std::optional<State> goal;  // set iff status != no_goal
  double cost = 0.0;          // g*
  std::uint64_t expansions = 0;
  SearchStatus status = SearchStatus::no_goal;

  bool has_goal() const noexcept { return goal.has_value(); }
  friend bool operator==(const PreferredGoalEntry&, const PreferredGoalEntry&) = default;
};

struct SearchResult {
  PreferredGoalEntry entry;
  std::vector<std::size_t> path;  // action indices from initial to goal
};

/// alpha * (z - p) below the threshold, 0 at or above it.
double heuristic(double proba, double z, double alpha);
double heuristic(const State& s, const SearchParams& params, double alpha,
                 const RandomForest& forest, const PartitionTable& table);

/// Anytime best-first search for the cheapest goal state reachable from
/// `initial` in the action graph, ordered by f = g + h. Goal states are
/// recorded but never expanded; the search stops once `patience`
/// expansions pass without improving the incumbent.
SearchResult find_preferred_goal(const State& initial, const ActionLibrary& library,
                                 const RandomForest& forest, const PartitionTable& table,
                                 const SearchParams& params);

/// Preferred goals for a batch of initial states, keyed by state.
class GoalDatabase {
 public:
  GoalDatabase() = default;
  GoalDatabase(std::string fingerprint, SearchParams params);

  const std::string& fingerprint() const noexcept { return fingerprint_; }
  const SearchParams& params() const noexcept { return params_; }
  const std::map<State, PreferredGoalEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const PreferredGoalEntry* find(const State& s) const;

  /// Adds an entry; on a key clash the entry with a goal and lower cost wins.
  void insert(PreferredGoalEntry entry);

  friend bool operator==(const GoalDatabase&, const GoalDatabase&) = default;

 private:
  std::string fingerprint_;
  SearchParams params_;
  std::map<State, PreferredGoalEntry> entries_;
};

/// Runs one independent search per state on `workers` threads. Failed
/// searches are recorded as no_goal entries.
GoalDatabase preprocess(const std::vector<State>& states, const ActionLibrary& library,
                        const RandomForest& forest, const PartitionTable& table,
                        const SearchParams& params, std::size_t workers = 1);

/// JSON-lines: one header line {fingerprint, params}, then one entry per line.
std::string database_to_jsonl(const GoalDatabase& db);
GoalDatabase database_from_jsonl(const std::string& text);
void save_database(const GoalDatabase& db, const std::filesystem::path& path);
/// Throws InvalidInput when `expected_fingerprint` is non-empty and differs.
GoalDatabase load_database(const std::filesystem::path& path,
                           const std::string& expected_fingerprint = {});

/// Union of two shards built for the same forest and goal definition.
GoalDatabase merge(const GoalDatabase& a, const GoalDatabase& b);

}  // namespace soap
