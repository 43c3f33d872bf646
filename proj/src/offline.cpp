#include "soap/offline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "soap/error.hpp"

namespace soap {

void SearchParams::check() const {
  if (!(z > 0.0 && z <= 1.0)) throw InvalidInput("goal threshold z must lie in (0, 1]");
  if (alpha && !(*alpha >= 0.0)) throw InvalidInput("heuristic scale alpha must be >= 0");
  if (patience < 1) throw InvalidInput("patience must be >= 1");
  if (node_budget < 1) throw InvalidInput("node budget must be >= 1");
}

const char* to_string(SearchStatus s) {
  switch (s) {
    case SearchStatus::proved_exhausted: return "proved_exhausted";
    case SearchStatus::patience_stop: return "patience_stop";
    case SearchStatus::budget_stop: return "budget_stop";
    case SearchStatus::no_goal: return "no_goal";
  }
  return "no_goal";
}

SearchStatus search_status_from_string(const std::string& s) {
  for (auto st : {SearchStatus::proved_exhausted, SearchStatus::patience_stop,
                  SearchStatus::budget_stop, SearchStatus::no_goal})
    if (s == to_string(st)) return st;
  throw InvalidInput("unknown search status '" + s + "'");
}

double heuristic(double proba, double z, double alpha) {
  return proba < z ? alpha * (z - proba) : 0.0;
}

double heuristic(const State& s, const SearchParams& params, double alpha,
                 const RandomForest& forest, const PartitionTable& table) {
  return heuristic(state_proba(forest, table, s, params.target), params.z, alpha);
}

namespace {

struct OpenNode {
  double f;
  double g;
  State state;
};

// Orders the heap so that the smallest f pops first, then smaller g, then
// the lexicographically smaller state.
struct OpenOrder {
  bool operator()(const OpenNode& a, const OpenNode& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g > b.g;
    return a.state > b.state;
  }
};

}  // namespace

SearchResult find_preferred_goal(const State& initial, const ActionLibrary& library,
                                 const RandomForest& forest, const PartitionTable& table,
                                 const SearchParams& params) {
  params.check();
  table.check_state(initial);
  const double alpha = params.resolved_alpha(library);

  std::unordered_map<State, double, StateHash> proba_cache;
  auto proba = [&](const State& s) {
    auto it = proba_cache.find(s);
    if (it != proba_cache.end()) return it->second;
    const double p = state_proba(forest, table, s, params.target);
    proba_cache.emplace(s, p);
    return p;
  };

  struct Parent {
    State from;
    std::size_t action;
  };
  std::unordered_map<State, double, StateHash> best_g;
  std::unordered_map<State, Parent, StateHash> parent;
  std::unordered_set<State, StateHash> closed;
  std::priority_queue<OpenNode, std::vector<OpenNode>, OpenOrder> open;

  SearchResult result;
  result.entry.initial = initial;
  double g_star = std::numeric_limits<double>::infinity();
  std::uint64_t n_es = 0;

  auto record = [&](const State& s, double g) {
    g_star = g;
    n_es = closed.size();
    result.entry.goal = s;
    result.entry.cost = g;
    result.entry.expansions = n_es;
    result.path.clear();
    for (State at = s; at != initial;) {
      const Parent& p = parent.at(at);
      result.path.push_back(p.action);
      at = p.from;
    }
    std::reverse(result.path.begin(), result.path.end());
  };
  auto finish = [&](SearchStatus status) {
    result.entry.status = result.entry.goal ? status : SearchStatus::no_goal;
    if (!result.entry.goal) {
      result.entry.cost = 0.0;
      result.entry.expansions = closed.size();
    }
    return result;
  };

  best_g[initial] = 0.0;
  open.push(OpenNode{heuristic(proba(initial), params.z, alpha), 0.0, initial});
  while (!open.empty()) {
    OpenNode node = open.top();
    open.pop();
    if (node.g > best_g[node.state]) continue;  // stale entry

    const double p = proba(node.state);
    const bool goal = p >= params.z;
    if (goal && node.g < g_star) record(node.state, node.g);
    if (closed.size() - n_es > params.patience) return finish(SearchStatus::patience_stop);
    if (goal || closed.contains(node.state)) continue;

    closed.insert(node.state);
    if (closed.size() >= params.node_budget) return finish(SearchStatus::budget_stop);
    for (Edge& e : neighbors(node.state, library)) {
      if (closed.contains(e.target)) continue;
      const double g = node.g + e.cost;
      auto it = best_g.find(e.target);
      if (it != best_g.end() && !(g < it->second)) continue;
      best_g[e.target] = g;
      parent.insert_or_assign(e.target, Parent{node.state, e.action});
      const double h = heuristic(proba(e.target), params.z, alpha);
      open.push(OpenNode{g + h, g, std::move(e.target)});
    }
  }
  return finish(SearchStatus::proved_exhausted);
}

GoalDatabase::GoalDatabase(std::string fingerprint, SearchParams params)
    : fingerprint_(std::move(fingerprint)), params_(params) {}

const PreferredGoalEntry* GoalDatabase::find(const State& s) const {
  auto it = entries_.find(s);
  return it == entries_.end() ? nullptr : &it->second;
}

void GoalDatabase::insert(PreferredGoalEntry entry) {
  auto it = entries_.find(entry.initial);
  if (it == entries_.end()) {
    State key = entry.initial;
    entries_.emplace(std::move(key), std::move(entry));
    return;
  }
  PreferredGoalEntry& cur = it->second;
  const bool better = entry.has_goal() && (!cur.has_goal() || entry.cost < cur.cost);
  if (better) cur = std::move(entry);
}

GoalDatabase preprocess(const std::vector<State>& states, const ActionLibrary& library,
                        const RandomForest& forest, const PartitionTable& table,
                        const SearchParams& params, std::size_t workers) {
  params.check();
  SearchParams stored = params;
  stored.alpha = params.resolved_alpha(library);
  GoalDatabase db(forest_fingerprint(forest), stored);

  std::vector<PreferredGoalEntry> results(states.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < states.size(); i = next++) {
      try {
        results[i] = find_preferred_goal(states[i], library, forest, table, params).entry;
      } catch (const Error&) {
        results[i] = PreferredGoalEntry{states[i], std::nullopt, 0.0, 0, SearchStatus::no_goal};
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, states.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : results) db.insert(std::move(e));
  return db;
}

namespace {

using nlohmann::json;

json params_to_json(const SearchParams& p) {
  json j{{"target", p.target}, {"z", p.z}, {"patience", p.patience}, {"node_budget", p.node_budget}};
  j["alpha"] = p.alpha ? json(*p.alpha) : json("auto");
  return j;
}

SearchParams params_from_json(const json& j) {
  SearchParams p;
  p.target = j.at("target").get<Label>();
  p.z = j.at("z").get<double>();
  p.patience = j.at("patience").get<std::uint64_t>();
  p.node_budget = j.at("node_budget").get<std::uint64_t>();
  if (j.at("alpha").is_number()) p.alpha = j.at("alpha").get<double>();
  return p;
}

}  // namespace

std::string database_to_jsonl(const GoalDatabase& db) {
  std::string out = json{{"fingerprint", db.fingerprint()}, {"params", params_to_json(db.params())}}.dump();
  out += '\n';
  for (const auto& [key, e] : db.entries()) {
    json j{{"initial", e.initial.values()},
           {"goal", e.goal ? json(e.goal->values()) : json(nullptr)},
           {"cost", e.cost},
           {"expansions", e.expansions},
           {"status", to_string(e.status)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

GoalDatabase database_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  GoalDatabase db;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!header) {
        db = GoalDatabase(j.at("fingerprint").get<std::string>(), params_from_json(j.at("params")));
        header = true;
        continue;
      }
      PreferredGoalEntry e;
      e.initial = State(j.at("initial").get<std::vector<int>>());
      if (!j.at("goal").is_null()) e.goal = State(j.at("goal").get<std::vector<int>>());
      e.cost = j.at("cost").get<double>();
      e.expansions = j.at("expansions").get<std::uint64_t>();
      e.status = search_status_from_string(j.at("status").get<std::string>());
      if (e.has_goal() == (e.status == SearchStatus::no_goal))
        throw InvalidInput("goal presence contradicts status");
      if (db.find(e.initial)) throw InvalidInput("duplicate key " + e.initial.str());
      db.insert(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(std::string("goal database: ") + ex.what(), lineno);
    } catch (const InvalidInput& ex) {
      throw ParseError(std::string("goal database: ") + ex.what(), lineno);
    }
  }
  if (!header) throw ParseError("goal database: missing header line");
  return db;
}

void save_database(const GoalDatabase& db, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << database_to_jsonl(db);
}

GoalDatabase load_database(const std::filesystem::path& path, const std::string& expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  GoalDatabase db = database_from_jsonl(buf.str());
  if (!expected_fingerprint.empty() && db.fingerprint() != expected_fingerprint)
    throw InvalidInput("goal database '" + path.string() + "' was built for forest " +
                       db.fingerprint() + ", not " + expected_fingerprint);
  return db;
}

GoalDatabase merge(const GoalDatabase& a, const GoalDatabase& b) {
  if (a.fingerprint() != b.fingerprint())
    throw InvalidInput("cannot merge goal databases built for different forests (" +
                       a.fingerprint() + " vs " + b.fingerprint() + ")");
  if (a.params().target != b.params().target || a.params().z != b.params().z)
    throw InvalidInput("cannot merge goal databases with different goal definitions");
  GoalDatabase out = a;
  for (const auto& [key, e] : b.entries()) out.insert(e);
  return out;
}

}  // namespace soap
