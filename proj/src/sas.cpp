#include "soap/sas.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "soap/error.hpp"

namespace soap {

std::string Transition::str() const {
  return "x" + std::to_string(var) + ":" + (mechanical() ? std::string("*") : std::to_string(from)) +
         "->" + std::to_string(to);
}

bool transition_mutex(const Transition& a, const Transition& b) {
  if (a == b || a.var != b.var) return false;
  return !((a.mechanical() || b.mechanical()) && a.to == b.to);
}

Action::Action(std::string id, std::vector<Transition> transitions, double cost)
    : id_(std::move(id)), transitions_(std::move(transitions)), cost_(cost) {
  if (transitions_.empty()) throw InvalidInput("action '" + id_ + "' has no transitions");
  if (!(cost_ > 0.0) || !std::isfinite(cost_))
    throw InvalidInput("action '" + id_ + "': cost must be finite and positive");
  std::sort(transitions_.begin(), transitions_.end());
  transitions_.erase(std::unique(transitions_.begin(), transitions_.end()), transitions_.end());
  for (std::size_t i = 0; i < transitions_.size(); ++i)
    for (std::size_t j = i + 1; j < transitions_.size(); ++j)
      if (transition_mutex(transitions_[i], transitions_[j]))
        throw InvalidInput("action '" + id_ + "': transitions " + transitions_[i].str() + " and " +
                           transitions_[j].str() + " are mutually exclusive");
}

bool action_mutex(const Action& a, const Action& b) {
  for (const Transition& t : a.transitions()) {
    for (const Transition& u : b.transitions()) {
      if (t == u && !t.prevailing()) return true;
      if (transition_mutex(t, u)) return true;
    }
  }
  return false;
}

bool applicable(const Action& a, const State& s) {
  return std::all_of(a.transitions().begin(), a.transitions().end(),
                     [&](const Transition& t) { return t.applicable(s); });
}

State apply(const State& s, const Action& a) {
  if (!applicable(a, s))
    throw InvalidInput("action '" + a.id() + "' is not applicable to state " + s.str());
  State out = s;
  for (const Transition& t : a.transitions()) out[t.var] = t.to;
  return out;
}

CostModel::CostModel(std::vector<double> weights) : beta(std::move(weights)) {
  for (std::size_t j = 0; j < beta.size(); ++j)
    if (!(beta[j] > 0.0) || !std::isfinite(beta[j]))
      throw InvalidInput("cost weight " + std::to_string(j) + " must be finite and positive");
}

CostModel CostModel::uniform(std::size_t features, double weight) {
  return CostModel(std::vector<double>(features, weight));
}

CostModel CostModel::random(std::size_t features, double lo, double hi, std::uint64_t seed) {
  if (!(lo > 0.0 && lo <= hi)) throw InvalidInput("cost weight range must satisfy 0 < lo <= hi");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(lo, hi);
  std::vector<double> beta(features);
  for (double& b : beta) b = draw(rng);
  return CostModel(std::move(beta));
}

double CostModel::cost(const State& from, const State& to) const {
  double total = 0.0;
  for (std::size_t j = 0; j < from.size(); ++j) {
    const double d = from[j] - to[j];
    total += beta[j] * d * d;
  }
  return total;
}

ActionLibrary::ActionLibrary(std::vector<Action> actions, const PartitionTable& table,
                             const std::vector<FeatureMeta>& features)
    : actions_(std::move(actions)) {
  std::set<std::string> ids;
  for (const Action& a : actions_) {
    if (!ids.insert(a.id()).second) throw InvalidInput("duplicate action id '" + a.id() + "'");
    for (const Transition& t : a.transitions()) {
      if (t.var >= table.size())
        throw InvalidInput("action '" + a.id() + "': feature index " + std::to_string(t.var) +
                           " out of range");
      const int n = table.count(t.var);
      if ((!t.mechanical() && (t.from < 0 || t.from >= n)) || t.to < 0 || t.to >= n)
        throw InvalidInput("action '" + a.id() + "': transition " + t.str() +
                           " leaves the partition range of feature '" + features[t.var].name + "'");
      if (!features[t.var].soft() && !t.prevailing())
        throw InvalidInput("action '" + a.id() + "' changes hard feature '" +
                           features[t.var].name + "'");
    }
  }
}

double ActionLibrary::mean_cost() const {
  if (actions_.empty()) return 0.0;
  double sum = 0.0;
  for (const Action& a : actions_) sum += a.cost();
  return sum / static_cast<double>(actions_.size());
}

ActionLibrary default_action_library(const PartitionTable& table,
                                     const std::vector<FeatureMeta>& features,
                                     const CostModel& costs) {
  if (costs.beta.size() != table.size())
    throw InvalidInput("cost model has " + std::to_string(costs.beta.size()) +
                       " weights, expected " + std::to_string(table.size()));
  if (std::none_of(features.begin(), features.end(), [](const FeatureMeta& f) { return f.soft(); }))
    throw InvalidInput("no soft feature to act on");
  std::vector<Action> actions;
  for (std::size_t j = 0; j < table.size(); ++j) {
    if (!features[j].soft()) continue;
    const int n = table.count(j);
    for (int f = 0; f < n; ++f) {
      for (int g = 0; g < n; ++g) {
        if (f == g) continue;
        const double d = f - g;
        actions.emplace_back(features[j].name + ":" + std::to_string(f) + "->" + std::to_string(g),
                             std::vector<Transition>{{j, f, g}}, costs.beta[j] * d * d);
      }
    }
  }
  return ActionLibrary(std::move(actions), table, features);
}

namespace {

using nlohmann::json;

// Line number of every element of the top-level JSON array, so semantic
// errors can point back into the file.
std::vector<std::size_t> element_lines(std::string_view text) {
  std::vector<std::size_t> lines;
  std::size_t line = 1;
  int depth = 0;
  bool in_string = false;
  bool escape = false;
  bool expect_element = false;
  for (char c : text) {
    if (c == '\n') ++line;
    if (in_string) {
      if (escape) escape = false;
      else if (c == '\\') escape = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (depth == 1 && expect_element && !std::isspace(static_cast<unsigned char>(c)) && c != ']') {
      lines.push_back(line);
      expect_element = false;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[':
      case '{':
        if (++depth == 1) expect_element = true;
        break;
      case ']':
      case '}': --depth; break;
      case ',':
        if (depth == 1) expect_element = true;
        break;
      default: break;
    }
  }
  return lines;
}

std::size_t resolve_feature(const json& j, const std::vector<FeatureMeta>& features) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    const auto i = j.get<long long>();
    if (i < 0 || static_cast<std::size_t>(i) >= features.size())
      throw InvalidInput("feature index " + std::to_string(i) + " out of range");
    return static_cast<std::size_t>(i);
  }
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    for (const FeatureMeta& f : features)
      if (f.name == name) return f.index;
    throw InvalidInput("unknown feature '" + name + "'");
  }
  throw InvalidInput("'feature' must be an index or a name");
}

int resolve_value(const json& j, std::size_t var, const PartitionTable& table,
                  const FeatureMeta& meta, bool allow_any) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (allow_any && s == "*") return Transition::kAny;
    if (meta.categorical()) {
      auto it = std::find(meta.categories.begin(), meta.categories.end(), s);
      if (it != meta.categories.end()) return static_cast<int>(it - meta.categories.begin());
    }
    throw InvalidInput("value '" + s + "' not understood for feature '" + meta.name + "'");
  }
  if (j.is_number_integer() || j.is_number_unsigned()) {
    const auto k = j.get<long long>();
    if (k < 0 || k >= table.count(var))
      throw InvalidInput("partition index " + std::to_string(k) + " out of range for feature '" +
                         meta.name + "'");
    return static_cast<int>(k);
  }
  const json* raw = nullptr;
  if (j.is_number_float()) raw = &j;
  else if (j.is_object() && j.contains("value") && j["value"].is_number()) raw = &j["value"];
  if (raw) {
    if (meta.categorical())
      throw InvalidInput("raw values are only accepted for numerical feature, not '" + meta.name + "'");
    return table.cell_of(var, raw->get<double>());
  }
  throw InvalidInput("unsupported value for feature '" + meta.name + "'");
}

}  // namespace

ActionLibrary parse_action_spec(std::string_view text, const PartitionTable& table,
                                const std::vector<FeatureMeta>& features) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("action spec: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("action spec: top level must be an array", 1);
  const auto lines = element_lines(text);

  std::vector<Action> actions;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const std::size_t line = k < lines.size() ? lines[k] : 0;
    const json& ja = doc[k];
    try {
      if (!ja.is_object()) throw InvalidInput("action must be an object");
      if (!ja.contains("id") || !ja["id"].is_string()) throw InvalidInput("missing string 'id'");
      if (!ja.contains("cost") || !ja["cost"].is_number()) throw InvalidInput("missing numeric 'cost'");
      if (!ja.contains("transitions") || !ja["transitions"].is_array())
        throw InvalidInput("missing 'transitions' array");
      const auto id = ja["id"].get<std::string>();
      std::vector<Transition> ts;
      for (const json& jt : ja["transitions"]) {
        if (!jt.is_object() || !jt.contains("feature") || !jt.contains("from") || !jt.contains("to"))
          throw InvalidInput("action '" + id + "': transition needs feature, from and to");
        const std::size_t var = resolve_feature(jt["feature"], features);
        ts.push_back(Transition{var, resolve_value(jt["from"], var, table, features[var], true),
                                resolve_value(jt["to"], var, table, features[var], false)});
      }
      actions.emplace_back(id, std::move(ts), ja["cost"].get<double>());
    } catch (const InvalidInput& e) {
      throw ParseError(std::string("action spec: ") + e.what(), line);
    }
  }
  try {
    return ActionLibrary(std::move(actions), table, features);
  } catch (const InvalidInput& e) {
    // locate the offending action by id for the line number
    std::string msg = e.what();
    for (std::size_t k = 0; k < doc.size(); ++k) {
      const auto& ja = doc[k];
      if (ja.contains("id") && msg.find("'" + ja["id"].get<std::string>() + "'") != std::string::npos)
        throw ParseError("action spec: " + msg, k < lines.size() ? lines[k] : 0);
    }
    throw ParseError("action spec: " + msg);
  }
}

ActionLibrary load_action_spec(const std::filesystem::path& path, const PartitionTable& table,
                               const std::vector<FeatureMeta>& features) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_action_spec(buf.str(), table, features);
}

std::vector<Edge> neighbors(const State& s, const ActionLibrary& library) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < library.size(); ++i) {
    const Action& a = library[i];
    if (applicable(a, s)) out.push_back(Edge{i, apply(s, a), a.cost()});
  }
  return out;
}

}  // namespace soap
