#include "soap/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "soap/error.hpp"

namespace soap {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (*b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

// Splits one CSV record; fields may be double-quoted with "" as escape.
std::vector<std::string> split_csv(const std::string& line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field", lineno);
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

double category_value(const FeatureMeta& f, const std::string& cell) {
  auto it = std::find(f.categories.begin(), f.categories.end(), cell);
  if (it != f.categories.end()) return static_cast<double>(it - f.categories.begin());
  throw InvalidInput("unknown category '" + cell + "' for feature '" + f.name + "'");
}

void assign_classes(Dataset& data, const Schema& schema, const std::vector<std::string>& raw,
                    const std::vector<std::size_t>& lines) {
  data.classes = schema.classes;
  if (data.classes.empty()) {
    std::set<std::string> names(raw.begin(), raw.end());
    data.classes.assign(names.begin(), names.end());
  }
  for (std::size_t r = 0; r < raw.size(); ++r) {
    auto it = std::find(data.classes.begin(), data.classes.end(), raw[r]);
    if (it == data.classes.end()) throw ParseError("unknown class '" + raw[r] + "'", lines[r]);
    data.labels.push_back(static_cast<Label>(it - data.classes.begin()));
  }
}

}  // namespace

Schema schema_from_json(const json& doc) {
  try {
    Schema s;
    s.label = doc.at("label").get<std::string>();
    if (doc.contains("classes")) s.classes = doc.at("classes").get<std::vector<std::string>>();
    std::set<std::string> names{s.label};
    for (const json& jf : doc.at("features")) {
      FeatureMeta f;
      f.name = jf.at("name").get<std::string>();
      f.index = s.features.size();
      if (!names.insert(f.name).second) throw InvalidInput("duplicate column '" + f.name + "'");
      const std::string kind = jf.value("kind", std::string("numerical"));
      if (kind == "categorical") {
        f.kind = FeatureKind::categorical;
        f.categories = jf.at("categories").get<std::vector<std::string>>();
        if (f.categories.empty()) throw InvalidInput("feature '" + f.name + "' has no categories");
      } else if (kind != "numerical") {
        throw InvalidInput("feature '" + f.name + "': unknown kind '" + kind + "'");
      }
      const std::string mut = jf.value("mutability", std::string("soft"));
      if (mut != "soft" && mut != "hard")
        throw InvalidInput("feature '" + f.name + "': unknown mutability '" + mut + "'");
      f.mutability = mut == "hard" ? Mutability::hard : Mutability::soft;
      s.features.push_back(std::move(f));
    }
    return s;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("schema: ") + e.what());
  }
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return schema_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Dataset read_csv(std::istream& in, const Schema& schema) {
  Dataset data;
  data.features = schema.features;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::size_t> column;  // schema feature -> CSV column
  std::size_t label_col = 0;
  std::size_t width = 0;
  std::vector<std::string> raw_labels;
  std::vector<std::size_t> label_lines;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv(line, lineno);
    if (!header) {
      width = cells.size();
      auto find = [&](const std::string& name) {
        auto it = std::find(cells.begin(), cells.end(), name);
        if (it == cells.end()) throw ParseError("header has no column '" + name + "'", lineno);
        return static_cast<std::size_t>(it - cells.begin());
      };
      for (const FeatureMeta& f : schema.features) column.push_back(find(f.name));
      label_col = find(schema.label);
      header = true;
      continue;
    }
    if (cells.size() != width)
      throw ParseError("expected " + std::to_string(width) + " fields, found " +
                           std::to_string(cells.size()),
                       lineno);
    FeatureVector x(schema.features.size());
    for (std::size_t i = 0; i < schema.features.size(); ++i) {
      const FeatureMeta& f = schema.features[i];
      const std::string& cell = cells[column[i]];
      if (f.categorical()) {
        try {
          x[i] = category_value(f, cell);
        } catch (const InvalidInput& e) {
          throw ParseError(e.what(), lineno);
        }
      } else if (!parse_double(cell, x[i])) {
        throw ParseError("feature '" + f.name + "': '" + cell + "' is not a finite number", lineno);
      }
    }
    data.rows.push_back(std::move(x));
    raw_labels.push_back(cells[label_col]);
    label_lines.push_back(lineno);
  }
  if (!header) throw ParseError("missing header row");
  assign_classes(data, schema, raw_labels, label_lines);
  return data;
}

Dataset read_libsvm(std::istream& in, const Schema& schema) {
  for (const FeatureMeta& f : schema.features)
    if (f.categorical()) throw InvalidInput("libsvm input supports numerical features only");
  std::vector<std::map<std::size_t, double>> sparse;
  std::vector<std::string> raw_labels;
  std::vector<std::size_t> label_lines;
  std::size_t max_index = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    raw_labels.push_back(tok);
    label_lines.push_back(lineno);
    std::map<std::size_t, double> row;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      std::size_t index = 0;
      double value = 0.0;
      const auto idx = tok.substr(0, colon);
      auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), index);
      if (colon == std::string::npos || ec != std::errc() || p != idx.data() + idx.size() ||
          index == 0 || !parse_double(tok.substr(colon + 1), value))
        throw ParseError("malformed entry '" + tok + "', expected index:value", lineno);
      if (!row.emplace(index, value).second)
        throw ParseError("index " + std::to_string(index) + " repeated", lineno);
      if (!schema.features.empty() && index > schema.features.size())
        throw ParseError("index " + std::to_string(index) + " exceeds the " +
                             std::to_string(schema.features.size()) + " schema features",
                         lineno);
      max_index = std::max(max_index, index);
    }
    sparse.push_back(std::move(row));
  }
  Dataset data;
  data.features = schema.features;
  if (data.features.empty())
    for (std::size_t i = 0; i < max_index; ++i) {
      FeatureMeta f;
      f.name = "f" + std::to_string(i + 1);
      f.index = i;
      data.features.push_back(std::move(f));
    }
  for (const auto& row : sparse) {
    FeatureVector x(data.features.size(), 0.0);
    for (auto [index, value] : row) x[index - 1] = value;
    data.rows.push_back(std::move(x));
  }
  assign_classes(data, schema, raw_labels, label_lines);
  return data;
}

DataFormat data_format_from_string(const std::string& s) {
  if (s == "csv") return DataFormat::csv;
  if (s == "libsvm") return DataFormat::libsvm;
  throw InvalidInput("unknown data format '" + s + "' (expected csv or libsvm)");
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return format == DataFormat::csv ? read_csv(in, schema) : read_libsvm(in, schema);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw InvalidInput("test fraction must lie in [0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)]);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(data.size())));
  Dataset train{data.features, data.classes, {}, {}};
  Dataset test{data.features, data.classes, {}, {}};
  for (std::size_t k = 0; k < order.size(); ++k) {
    Dataset& part = k < n_test ? test : train;
    part.rows.push_back(data.rows[order[k]]);
    part.labels.push_back(data.labels[order[k]]);
  }
  return {std::move(train), std::move(test)};
}

FeatureVector parse_feature_vector(const std::string& text, const std::vector<FeatureMeta>& features) {
  const std::vector<std::string> cells = split_csv(text, 0);
  if (cells.size() != features.size())
    throw InvalidInput("expected " + std::to_string(features.size()) + " feature values, got " +
                       std::to_string(cells.size()));
  FeatureVector x(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureMeta& f = features[i];
    if (f.categorical()) {
      double idx = 0.0;
      auto it = std::find(f.categories.begin(), f.categories.end(), cells[i]);
      if (it != f.categories.end()) {
        x[i] = static_cast<double>(it - f.categories.begin());
      } else if (parse_double(cells[i], idx) && idx >= 0 && idx == std::floor(idx) &&
                 idx < static_cast<double>(f.categories.size())) {
        x[i] = idx;
      } else {
        throw InvalidInput("unknown category '" + cells[i] + "' for feature '" + f.name + "'");
      }
    } else if (!parse_double(cells[i], x[i])) {
      throw InvalidInput("feature '" + f.name + "': '" + cells[i] + "' is not a finite number");
    }
  }
  return x;
}

void Config::check() const {
  if (!(z > 0.0 && z <= 1.0)) throw InvalidInput("config: z must lie in (0, 1]");
  if (alpha && !(*alpha >= 0.0)) throw InvalidInput("config: alpha must be >= 0 or \"auto\"");
  if (delta < 1) throw InvalidInput("config: delta must be >= 1");
  if (k < 1) throw InvalidInput("config: K must be >= 1");
  if (max_makespan < 1) throw InvalidInput("config: L_max must be >= 1");
  if (!(beta_lo > 0.0 && beta_lo <= beta_hi)) throw InvalidInput("config: beta_range must satisfy 0 < lo <= hi");
  if (workers < 1) throw InvalidInput("config: workers must be >= 1");
}

Config config_from_json(const json& doc) {
  static const std::set<std::string> known{"z", "alpha", "delta", "K", "L_max",
                                           "cost_seed", "beta_range", "workers"};
  if (!doc.is_object()) throw InvalidInput("config must be a JSON object");
  Config c;
  try {
    for (const auto& [key, value] : doc.items())
      if (!known.contains(key)) throw InvalidInput("config: unknown key '" + key + "'");
    if (doc.contains("z")) c.z = doc.at("z").get<double>();
    if (doc.contains("alpha")) {
      const json& a = doc.at("alpha");
      if (a.is_string()) {
        if (a.get<std::string>() != "auto") throw InvalidInput("config: alpha must be a number or \"auto\"");
      } else {
        c.alpha = a.get<double>();
      }
    }
    if (doc.contains("delta")) c.delta = doc.at("delta").get<std::uint64_t>();
    if (doc.contains("K")) c.k = doc.at("K").get<std::size_t>();
    if (doc.contains("L_max")) c.max_makespan = doc.at("L_max").get<int>();
    if (doc.contains("cost_seed")) c.cost_seed = doc.at("cost_seed").get<std::uint64_t>();
    if (doc.contains("beta_range")) {
      const auto r = doc.at("beta_range").get<std::vector<double>>();
      if (r.size() != 2) throw InvalidInput("config: beta_range needs two numbers");
      c.beta_lo = r[0];
      c.beta_hi = r[1];
    }
    if (doc.contains("workers")) c.workers = doc.at("workers").get<std::size_t>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  c.check();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

json config_to_json(const Config& c) {
  return json{{"z", c.z},
              {"alpha", c.alpha ? json(*c.alpha) : json("auto")},
              {"delta", c.delta},
              {"K", c.k},
              {"L_max", c.max_makespan},
              {"cost_seed", c.cost_seed},
              {"beta_range", {c.beta_lo, c.beta_hi}},
              {"workers", c.workers}};
}

}  // namespace soap
