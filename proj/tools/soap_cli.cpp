#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "soap/baselines.hpp"
#include "soap/dataset.hpp"
#include "soap/encoder.hpp"
#include "soap/error.hpp"
#include "soap/external.hpp"
#include "soap/knn.hpp"
#include "soap/maxsat.hpp"
#include "soap/offline.hpp"
#include "soap/partitions.hpp"
#include "soap/sas.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace soap;

namespace {

enum Exit : int { kOk = 0, kInternal = 1, kUnsolvable = 2, kInvalid = 3, kTimeout = 4 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double peak_memory_gb() {
  rusage ru{};
  getrusage(RUSAGE_SELF, &ru);
  return static_cast<double>(ru.ru_maxrss) / (1024.0 * 1024.0);  // ru_maxrss is in KiB
}

// Options shared by the commands that work on a trained model.
struct ModelArgs {
  std::string model;
  std::string config;
  std::string actions;
  std::string target;

  void add(CLI::App* cmd) {
    cmd->add_option("--model", model, "Forest model (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--config", config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--actions", actions, "Action spec (JSON); default: one action per partition pair")
        ->check(CLI::ExistingFile);
    cmd->add_option("--target", target, "Desired class name (default: second class)");
  }
};

struct Setup {
  explicit Setup(RandomForest f) : forest(std::move(f)) {}

  RandomForest forest;
  PartitionTable table;
  ActionLibrary library;
  Config config;
  Label target = 1;

  SearchParams search() const {
    SearchParams p;
    p.target = target;
    p.z = config.z;
    p.alpha = config.alpha;
    p.patience = config.delta;
    return p;
  }
};

Setup load_setup(const ModelArgs& args) {
  Setup s(load_forest(args.model));
  s.table = build_partitions(s.forest);
  if (!args.config.empty()) s.config = load_config(args.config);
  if (!args.target.empty()) {
    s.target = s.forest.label_of(args.target);
  } else if (s.forest.classes().size() < 2) {
    throw InvalidInput("model has a single class; nothing to plan for");
  }
  if (!args.actions.empty()) {
    s.library = load_action_spec(args.actions, s.table, s.forest.features());
  } else {
    const CostModel costs = CostModel::random(s.forest.feature_count(), s.config.beta_lo,
                                              s.config.beta_hi, s.config.cost_seed);
    s.library = default_action_library(s.table, s.forest.features(), costs);
  }
  return s;
}

// Either a raw feature vector or a partition-index state.
struct InputArgs {
  std::string x;
  std::string state;

  void add(CLI::App* cmd) {
    auto* ox = cmd->add_option("--x", x, "Feature values, comma separated (category names allowed)");
    auto* os = cmd->add_option("--state", state, "Partition indices, comma separated");
    ox->excludes(os);
  }

  State resolve(const Setup& s) const {
    if (!x.empty()) return to_state(parse_feature_vector(x, s.forest.features()), s.table, s.forest.features());
    if (state.empty()) throw InvalidInput("give an input with --x or --state");
    std::vector<int> z;
    std::stringstream ss(state);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        z.push_back(std::stoi(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidInput("--state: '" + cell + "' is not an integer");
      }
    }
    State st(z);
    s.table.check_state(st);
    return st;
  }
};

json state_json(const State& s) { return s.values(); }

json sequential_json(const SequentialPlan& p, const ActionLibrary& lib) {
  json actions = json::array();
  for (std::size_t a : p.actions) actions.push_back(lib[a].id());
  return json{{"success", p.success}, {"actions", actions}, {"cost", p.cost},
              {"final_state", state_json(p.final_state)}};
}

json plan_json(const PlanResult& r, const SasProblem& problem) {
  json steps = json::array();
  for (const auto& step : r.plan.steps) {
    json ids = json::array();
    for (std::size_t a : step) ids.push_back(problem.actions[a].id());
    steps.push_back(ids);
  }
  json attempts = json::array();
  for (const MakespanAttempt& a : r.attempts)
    attempts.push_back(json{{"L", a.makespan},
                            {"status", a.status == SolveStatus::optimal      ? "optimal"
                                       : a.status == SolveStatus::hard_unsat ? "unsat"
                                                                             : "timeout"},
                            {"vars", a.vars},
                            {"hard", a.hard_clauses},
                            {"soft", a.soft_clauses},
                            {"nodes", a.nodes}});
  json out{{"status", to_string(r.status)}, {"cost", r.plan.cost}, {"makespan", r.makespan},
           {"steps", steps}, {"attempts", attempts}};
  if (r.plan.goal) out["goal"] = state_json(*r.plan.goal);
  if (!r.diagnostics.empty()) out["diagnostics"] = r.diagnostics;
  return out;
}

int plan_exit(PlanStatus s) {
  switch (s) {
    case PlanStatus::solved: return kOk;
    case PlanStatus::unsolvable: return kUnsolvable;
    case PlanStatus::timeout: return kTimeout;
  }
  return kInternal;
}

GoalDatabase load_db_for(const std::string& path, const RandomForest& forest) {
  if (!fs::exists(path))
    throw InvalidInput("goal database '" + path +
                       "' not found; build it first with `soap preprocess --model ... --out " + path + "`");
  return load_database(path, forest_fingerprint(forest));
}

PlannerOptions planner_options(const Config& c, bool sweep, long timeout_ms, const std::string& solver) {
  PlannerOptions o;
  o.max_makespan = c.max_makespan;
  o.sweep = sweep;
  o.timeout = std::chrono::milliseconds(timeout_ms);
  if (!solver.empty())
    o.solver = [solver](const WcnfInstance& w, const SolveOptions& so) { return solve_external(w, solver, so); };
  return o;
}

DataFormat guess_format(const std::string& path, const std::string& given) {
  if (!given.empty()) return data_format_from_string(given);
  return fs::path(path).extension() == ".csv" ? DataFormat::csv : DataFormat::libsvm;
}

Schema schema_or_empty(const std::string& path) {
  if (!path.empty()) return load_schema(path);
  Schema s;
  s.label = "label";
  return s;
}

std::vector<State> preprocess_states(const PartitionTable& table, double fraction,
                                     std::uint64_t count, std::uint64_t seed) {
  constexpr std::uint64_t kMaxSearches = 5'000'000;
  const std::uint64_t total = table.state_count();
  if (count > 0) {
    if (count > kMaxSearches) throw InvalidInput("--count above " + std::to_string(kMaxSearches));
    return sample_state_count(table, std::min(count, total), seed);
  }
  const double want = fraction * static_cast<double>(total);
  if (want > static_cast<double>(kMaxSearches))
    throw InvalidInput("fraction " + std::to_string(fraction) + " of " + std::to_string(total) +
                       " states needs too many searches; lower it or use --count");
  return sample_states(table, fraction, seed);
}

json db_summary(const GoalDatabase& db) {
  std::map<std::string, std::size_t> status;
  for (const auto& [key, e] : db.entries()) ++status[to_string(e.status)];
  return json{{"entries", db.size()}, {"status", status}, {"fingerprint", db.fingerprint()}};
}

// ---------------------------------------------------------------------------

int cmd_train(const std::string& data_path, const std::string& schema_path, const std::string& format,
              const std::string& out, TrainParams tp, double test_fraction, std::uint64_t split_seed) {
  const Schema schema = schema_or_empty(schema_path);
  const Dataset all = load_dataset(data_path, guess_format(data_path, format), schema);
  auto [train, test] = train_test_split(all, test_fraction, split_seed);
  if (train.size() < 2) throw InvalidInput("training split has fewer than two rows");
  if (tp.sample_size == 0)
    tp.sample_size = std::min(train.size() - 1, std::max<std::size_t>(1, (train.size() * 4) / 5));
  if (tp.mtry == 0)
    tp.mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(train.features.size()))));
  std::vector<std::string> warnings;
  const RandomForest forest = train_forest(train, tp, &warnings);
  save_forest(forest, out);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) correct += predict(forest, test.rows[i]) == test.labels[i];
  json summary{{"model", out},
               {"fingerprint", forest_fingerprint(forest)},
               {"train_rows", train.size()},
               {"test_rows", test.size()},
               {"trees", tp.tree_count},
               {"warnings", warnings}};
  if (test.size() > 0) summary["test_accuracy"] = static_cast<double>(correct) / static_cast<double>(test.size());
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

int cmd_partitions(const ModelArgs& margs) {
  const RandomForest forest = load_forest(margs.model);
  const PartitionTable table = build_partitions(forest);
  json out{{"features", partitions_to_json(table, forest.features())}, {"state_count", table.state_count()}};
  std::cout << out.dump(2) << '\n';
  return kOk;
}

int cmd_preprocess(const ModelArgs& margs, double fraction, std::uint64_t count, std::uint64_t seed,
                   const std::string& out, std::size_t workers, const std::vector<std::string>& merge_with) {
  Setup s = load_setup(margs);
  if (workers == 0) workers = s.config.workers;
  const auto t0 = Clock::now();
  const std::vector<State> states = preprocess_states(s.table, fraction, count, seed);
  GoalDatabase db = preprocess(states, s.library, s.forest, s.table, s.search(), workers);
  for (const std::string& shard : merge_with) db = merge(db, load_db_for(shard, s.forest));
  save_database(db, out);
  json summary = db_summary(db);
  summary["out"] = out;
  summary["searched"] = states.size();
  summary["seconds"] = seconds_since(t0);
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

int cmd_plan(const ModelArgs& margs, const InputArgs& in, const std::string& db_path, bool sweep,
             long timeout_ms, const std::string& solver, std::optional<std::size_t> k) {
  Setup s = load_setup(margs);
  const GoalDatabase db = load_db_for(db_path, s.forest);
  const State initial = in.resolve(s);
  const auto t0 = Clock::now();
  const SoapContext ctx{s.forest, s.table, s.library, s.search()};
  const OnlineResult r = plan_online(ctx, initial, db, k.value_or(s.config.k),
                                     SimilarityWeights::split_frequency(s.forest),
                                     planner_options(s.config, sweep, timeout_ms, solver));
  json out = plan_json(r.result, r.sas.problem);
  out["initial"] = state_json(initial);
  out["goal_source"] = to_string(r.sas.source);
  json goals = json::array();
  for (const State& g : r.sas.problem.goals) goals.push_back(state_json(g));
  out["goals"] = goals;
  out["seconds"] = seconds_since(t0);
  std::cout << out.dump(2) << '\n';
  return plan_exit(r.result.status);
}

int cmd_greedy(const ModelArgs& margs, const InputArgs& in, const std::string& rule) {
  Setup s = load_setup(margs);
  const State initial = in.resolve(s);
  const SequentialPlan p = greedy_plan(initial, s.library, s.forest, s.table, s.search(),
                                       greedy_rule_from_string(rule));
  json out = sequential_json(p, s.library);
  out["initial"] = state_json(initial);
  std::cout << out.dump(2) << '\n';
  return p.success ? kOk : kUnsolvable;
}

int cmd_oracle(const ModelArgs& margs, const InputArgs& in, std::uint64_t cap) {
  Setup s = load_setup(margs);
  const State initial = in.resolve(s);
  const OracleResult r = oracle_plan(initial, s.library, s.forest, s.table, s.search(), cap);
  json out = sequential_json(r.plan, s.library);
  out["initial"] = state_json(initial);
  out["states_seen"] = r.states_seen;
  std::cout << out.dump(2) << '\n';
  return r.found ? kOk : kUnsolvable;
}

int cmd_export(const ModelArgs& margs, const InputArgs& in, const std::string& db_path, int makespan,
               const std::string& out_path, const std::string& map_path) {
  Setup s = load_setup(margs);
  const GoalDatabase db = load_db_for(db_path, s.forest);
  const State initial = in.resolve(s);
  const SoapContext ctx{s.forest, s.table, s.library, s.search()};
  const SasBuild sas = build_sas(ctx, initial, db, s.config.k, SimilarityWeights::split_frequency(s.forest));
  if (sas.source == GoalSource::already_goal) {
    std::cout << json{{"initial", state_json(initial)}, {"note", "input already meets the goal; nothing to encode"}}.dump(2)
              << '\n';
    return kOk;
  }
  if (sas.source == GoalSource::none) {
    std::cerr << "no reachable goal state from " << initial.str() << '\n';
    return kUnsolvable;
  }
  const Encoding enc = encode(sas.problem, makespan);
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write '" + out_path + "'");
  write_wcnf(enc.wcnf, out);
  if (!map_path.empty()) {
    std::ofstream map(map_path);
    if (!map) throw Error("cannot write '" + map_path + "'");
    write_varmap(enc, sas.problem, map);
  }
  std::cout << json{{"wcnf", out_path},
                    {"vars", enc.wcnf.var_count()},
                    {"hard", enc.wcnf.hard().size()},
                    {"soft", enc.wcnf.soft().size()},
                    {"top", enc.wcnf.top()},
                    {"weight_scale", enc.weight_scale}}
                   .dump(2)
            << '\n';
  return kOk;
}

int cmd_solve(const std::string& path, long timeout_ms) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  const WcnfInstance w = read_wcnf(in);
  const SolveResult r = solve(w, SolveOptions{std::chrono::milliseconds(timeout_ms)});
  std::cout << "c nodes " << r.nodes << '\n';
  if (r.status == SolveStatus::hard_unsat) {
    std::cout << "s UNSATISFIABLE\n";
    return kUnsolvable;
  }
  if (!r.has_model) {
    std::cout << "s UNKNOWN\n";
    return kTimeout;
  }
  std::cout << "o " << r.cost << '\n'
            << (r.status == SolveStatus::optimal ? "s OPTIMUM FOUND\n" : "s SATISFIABLE\n") << 'v';
  for (int v = 1; v <= w.var_count(); ++v) std::cout << ' ' << (r.model[static_cast<std::size_t>(v)] ? v : -v);
  std::cout << '\n';
  return r.status == SolveStatus::optimal ? kOk : kTimeout;
}

// ---------------------------------------------------------------------------
// bench

struct Arm {
  std::string name;
  std::size_t attempted = 0;
  std::size_t solved = 0;
  double cost = 0.0;
  double seconds = 0.0;
  double length = 0.0;
  double common_cost = 0.0;

  json row(double r, std::size_t common) const {
    auto mean = [](double total, std::size_t n) { return n ? json(total / static_cast<double>(n)) : json(nullptr); };
    return json{{"r", r},
                {"arm", name},
                {"instances", attempted},
                {"solved", solved},
                {"mean_cost", mean(cost, solved)},
                {"mean_cost_common", mean(common_cost, common)},
                {"common", common},
                {"mean_time_s", mean(seconds, attempted)},
                {"mean_L", mean(length, solved)},
                {"peak_memory_gb", peak_memory_gb()}};
  }
};

std::vector<double> parse_sweep(const std::string& text) {
  std::string body = text;
  if (body.rfind("r=", 0) == 0) body = body.substr(2);
  std::vector<double> out;
  std::stringstream ss(body);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double v = 0.0;
    try {
      v = std::stod(cell);
    } catch (const std::exception&) {
      throw InvalidInput("--sweep: '" + cell + "' is not a number");
    }
    if (!(v > 0.0 && v <= 100.0)) throw InvalidInput("--sweep values are percentages in (0, 100]");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidInput("--sweep needs at least one percentage");
  return out;
}

struct BenchArgs {
  std::string data;
  std::string schema;
  std::string format;
  double test_fraction = 0.3;
  std::uint64_t split_seed = 1;
  std::size_t instances = 100;
  std::uint64_t seed = 1;
  std::string sweep;
  double fraction = 1.0;
  std::uint64_t count = 0;
  std::string jsonl;
  std::uint64_t oracle_cap = 1'000'000;
  bool planner_sweep = false;
  long timeout_ms = 0;
  std::size_t workers = 0;
};

int cmd_bench(const ModelArgs& margs, const BenchArgs& b) {
  Setup s = load_setup(margs);
  const SearchParams params = s.search();
  const std::size_t workers = b.workers ? b.workers : s.config.workers;

  // test instances: non-goal inputs from the held-out split, or random states
  std::vector<State> instances;
  std::mt19937_64 rng(b.seed);
  auto below = [&](const State& st) { return state_proba(s.forest, s.table, st, params.target) < params.z; };
  if (!b.data.empty()) {
    const Schema schema = schema_or_empty(b.schema);
    const Dataset all = load_dataset(b.data, guess_format(b.data, b.format), schema);
    const Dataset test = train_test_split(all, b.test_fraction, b.split_seed).second;
    std::vector<State> pool;
    for (const FeatureVector& x : test.rows) {
      State st = to_state(x, s.table, s.forest.features());
      if (below(st)) pool.push_back(std::move(st));
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), b.instances));
    instances = std::move(pool);
  } else {
    for (std::size_t tries = 0; instances.size() < b.instances && tries < 100 * b.instances; ++tries) {
      std::vector<int> z;
      for (std::size_t i = 0; i < s.table.size(); ++i)
        z.push_back(std::uniform_int_distribution<int>(0, s.table.count(i) - 1)(rng));
      State st(z);
      if (below(st)) instances.push_back(std::move(st));
    }
  }
  if (instances.empty()) throw InvalidInput("no benchmark instance below the goal threshold");

  std::vector<double> sweep = b.sweep.empty() ? std::vector<double>{b.fraction * 100.0} : parse_sweep(b.sweep);
  std::unique_ptr<std::ofstream> jsonl;
  if (!b.jsonl.empty()) {
    jsonl = std::make_unique<std::ofstream>(b.jsonl);
    if (!*jsonl) throw Error("cannot write '" + b.jsonl + "'");
  }
  const SimilarityWeights weights = SimilarityWeights::split_frequency(s.forest);
  const PlannerOptions popts = planner_options(s.config, b.planner_sweep, b.timeout_ms, "");
  const bool oracle_ok = s.table.state_count() <= b.oracle_cap;

  std::cout << std::left << std::setw(8) << "r(%)" << std::setw(9) << "arm" << std::setw(10) << "solved"
            << std::setw(14) << "T (s)" << std::setw(14) << "Cost" << std::setw(14) << "Cost(common)"
            << std::setw(8) << "L" << "M (GB)\n";
  for (double r : sweep) {
    const auto t_pre = Clock::now();
    const std::vector<State> states = preprocess_states(s.table, r / 100.0, b.count, b.seed);
    const GoalDatabase db = preprocess(states, s.library, s.forest, s.table, params, workers);
    const double pre_seconds = seconds_since(t_pre);
    const SoapContext ctx{s.forest, s.table, s.library, params};

    Arm planner{"planner"}, greedy{"greedy"}, oracle{"oracle"};
    std::size_t common = 0;
    for (const State& st : instances) {
      auto t0 = Clock::now();
      const OnlineResult pr = plan_online(ctx, st, db, s.config.k, weights, popts);
      planner.seconds += seconds_since(t0);
      ++planner.attempted;
      const bool p_ok = pr.result.status == PlanStatus::solved;
      if (p_ok) {
        ++planner.solved;
        planner.cost += pr.result.plan.cost;
        planner.length += pr.result.makespan;
      }

      t0 = Clock::now();
      const SequentialPlan gp = greedy_plan(st, s.library, s.forest, s.table, params);
      greedy.seconds += seconds_since(t0);
      ++greedy.attempted;
      if (gp.success) {
        ++greedy.solved;
        greedy.cost += gp.cost;
        greedy.length += static_cast<double>(gp.actions.size());
      }

      bool o_ok = false;
      double o_cost = 0.0;
      if (oracle_ok) {
        t0 = Clock::now();
        const OracleResult orc = oracle_plan(st, s.library, s.forest, s.table, params, b.oracle_cap);
        oracle.seconds += seconds_since(t0);
        ++oracle.attempted;
        if (orc.found) {
          o_ok = true;
          o_cost = orc.plan.cost;
          ++oracle.solved;
          oracle.cost += o_cost;
          oracle.length += static_cast<double>(orc.plan.actions.size());
        }
      }
      if (p_ok && gp.success && (o_ok || !oracle_ok)) {
        ++common;
        planner.common_cost += pr.result.plan.cost;
        greedy.common_cost += gp.cost;
        oracle.common_cost += o_cost;
      }
    }

    std::vector<const Arm*> arms{&planner, &greedy};
    if (oracle_ok) arms.push_back(&oracle);
    for (const Arm* arm : arms) {
      json row = arm->row(r, common);
      row["preprocess_s"] = pre_seconds;
      row["db_entries"] = db.size();
      if (jsonl) *jsonl << row.dump() << '\n';
      auto num = [](const json& v) {
        std::ostringstream o;
        if (v.is_null()) o << "-";
        else o << std::setprecision(4) << v.get<double>();
        return o.str();
      };
      std::cout << std::left << std::setw(8) << r << std::setw(9) << arm->name << std::setw(10)
                << (std::to_string(arm->solved) + "/" + std::to_string(arm->attempted)) << std::setw(14)
                << num(row["mean_time_s"]) << std::setw(14) << num(row["mean_cost"]) << std::setw(14)
                << num(row["mean_cost_common"]) << std::setw(8) << num(row["mean_L"])
                << num(row["peak_memory_gb"]) << '\n';
    }
  }
  if (!oracle_ok)
    std::cout << "oracle skipped: " << s.table.state_count() << " states exceed the cap of " << b.oracle_cap << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-cost action plans that flip a random forest's prediction"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train a random forest on CSV or libsvm data");
  std::string data, schema, format, out;
  TrainParams tp;
  tp.mtry = 0;
  double test_fraction = 0.3;
  std::uint64_t split_seed = 1;
  train->add_option("--data", data, "Training data")->required()->check(CLI::ExistingFile);
  train->add_option("--schema", schema, "Column schema (JSON)")->check(CLI::ExistingFile);
  train->add_option("--format", format, "csv or libsvm (default: by extension)");
  train->add_option("--out", out, "Model output path")->required();
  train->add_option("--trees", tp.tree_count, "Number of trees")->capture_default_str();
  train->add_option("--sample-size", tp.sample_size, "Bootstrap size per tree (default: 80% of rows)");
  train->add_option("--mtry", tp.mtry, "Features tried per split (default: sqrt of feature count)");
  train->add_option("--max-depth", tp.max_depth, "Maximum tree depth")->capture_default_str();
  train->add_option("--min-leaf", tp.min_leaf, "Minimum rows per leaf")->capture_default_str();
  train->add_option("--seed", tp.seed, "Training seed")->capture_default_str();
  train->add_option("--test-fraction", test_fraction, "Held-out share")->capture_default_str();
  train->add_option("--split-seed", split_seed, "Train/test split seed")->capture_default_str();

  // partitions
  auto* parts = app.add_subcommand("partitions", "Print the feature partitions induced by a model");
  ModelArgs parts_args;
  parts->add_option("--model", parts_args.model, "Forest model (JSON)")->required()->check(CLI::ExistingFile);

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Build a preferred-goal database offline");
  ModelArgs pre_args;
  pre_args.add(pre);
  double fraction = 1.0;
  std::uint64_t count = 0, pre_seed = 1;
  std::size_t workers = 0;
  std::vector<std::string> merge_with;
  std::string db_out;
  pre->add_option("--fraction", fraction, "Share of all states to search, in (0, 1]")->capture_default_str();
  pre->add_option("--count", count, "Number of states to search (overrides --fraction)");
  pre->add_option("--seed", pre_seed, "State sampling seed")->capture_default_str();
  pre->add_option("--workers", workers, "Worker threads (default: config)");
  pre->add_option("--merge", merge_with, "Existing database shards to merge in");
  pre->add_option("--out", db_out, "Database output path (JSON lines)")->required();

  // plan
  auto* plan = app.add_subcommand("plan", "Plan online for one input");
  ModelArgs plan_args;
  plan_args.add(plan);
  InputArgs plan_in;
  plan_in.add(plan);
  std::string db_path, solver;
  bool sweep = false;
  long timeout_ms = 0;
  std::optional<std::size_t> k;
  plan->add_option("--db", db_path, "Preferred-goal database")->required();
  plan->add_flag("--sweep", sweep, "Solve every makespan up to L_max and keep the cheapest plan");
  plan->add_option("--timeout-ms", timeout_ms, "Per-makespan solver time limit (0: none)");
  plan->add_option("--solver", solver, "External WCNF solver command, called as `<cmd> file.wcnf`");
  plan->add_option("--k", k, "Neighbourhood size (default: config K)");

  // greedy
  auto* greedy = app.add_subcommand("greedy", "Greedy baseline for one input");
  ModelArgs greedy_args;
  greedy_args.add(greedy);
  InputArgs greedy_in;
  greedy_in.add(greedy);
  std::string rule = "ratio";
  greedy->add_option("--rule", rule, "ratio, max_delta or min_cost")->capture_default_str();

  // oracle
  auto* oracle = app.add_subcommand("oracle", "Exact cheapest plan by Dijkstra (small models only)");
  ModelArgs oracle_args;
  oracle_args.add(oracle);
  InputArgs oracle_in;
  oracle_in.add(oracle);
  std::uint64_t cap = 1'000'000;
  oracle->add_option("--cap", cap, "Maximum number of states to visit")->capture_default_str();

  // export-wcnf
  auto* exp = app.add_subcommand("export-wcnf", "Write the Max-SAT encoding for one input");
  ModelArgs exp_args;
  exp_args.add(exp);
  InputArgs exp_in;
  exp_in.add(exp);
  std::string exp_db, exp_out, exp_map;
  int makespan = 1;
  exp->add_option("--db", exp_db, "Preferred-goal database")->required();
  exp->add_option("--makespan", makespan, "Number of steps L")->capture_default_str();
  exp->add_option("--out", exp_out, "WCNF output path")->required();
  exp->add_option("--map", exp_map, "Variable meaning sidecar output path");

  // bench
  auto* bench = app.add_subcommand("bench", "Compare planner, greedy and oracle on many inputs");
  ModelArgs bench_args;
  bench_args.add(bench);
  BenchArgs bargs;
  bench->add_option("--data", bargs.data, "Data to draw test inputs from (default: random states)")
      ->check(CLI::ExistingFile);
  bench->add_option("--schema", bargs.schema, "Column schema (JSON)")->check(CLI::ExistingFile);
  bench->add_option("--format", bargs.format, "csv or libsvm (default: by extension)");
  bench->add_option("--test-fraction", bargs.test_fraction, "Held-out share used at training")
      ->capture_default_str();
  bench->add_option("--split-seed", bargs.split_seed, "Train/test split seed used at training")
      ->capture_default_str();
  bench->add_option("--instances", bargs.instances, "Number of test inputs")->capture_default_str();
  bench->add_option("--seed", bargs.seed, "Sampling seed")->capture_default_str();
  bench->add_option("--sweep", bargs.sweep, "Preprocessing percentages, e.g. r=10,20,50,100");
  bench->add_option("--fraction", bargs.fraction, "Preprocessed share of states without --sweep")
      ->capture_default_str();
  bench->add_option("--count", bargs.count, "Preprocess this many states instead of a share");
  bench->add_option("--jsonl", bargs.jsonl, "Write report rows as JSON lines");
  bench->add_option("--oracle-cap", bargs.oracle_cap, "Skip the oracle above this many states")
      ->capture_default_str();
  bench->add_flag("--plan-sweep", bargs.planner_sweep, "Planner keeps the cheapest plan up to L_max");
  bench->add_option("--timeout-ms", bargs.timeout_ms, "Per-makespan solver time limit (0: none)");
  bench->add_option("--workers", bargs.workers, "Preprocessing threads (default: config)");

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Solve a WCNF file with the built-in Max-SAT solver");
  std::string wcnf_path;
  long solve_timeout = 0;
  solve_cmd->add_option("file", wcnf_path, "WCNF input")->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--timeout-ms", solve_timeout, "Time limit (0: none)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*train) return cmd_train(data, schema, format, out, tp, test_fraction, split_seed);
    if (*parts) return cmd_partitions(parts_args);
    if (*pre) return cmd_preprocess(pre_args, fraction, count, pre_seed, db_out, workers, merge_with);
    if (*plan) return cmd_plan(plan_args, plan_in, db_path, sweep, timeout_ms, solver, k);
    if (*greedy) return cmd_greedy(greedy_args, greedy_in, rule);
    if (*oracle) return cmd_oracle(oracle_args, oracle_in, cap);
    if (*exp) return cmd_export(exp_args, exp_in, exp_db, makespan, exp_out, exp_map);
    if (*bench) return cmd_bench(bench_args, bargs);
    if (*solve_cmd) return cmd_solve(wcnf_path, solve_timeout);
  } catch (const ValidationError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInternal;
}
