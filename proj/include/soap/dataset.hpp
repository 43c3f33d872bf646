#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "soap/forest.hpp"

namespace soap {

/// Column roles for tabular input:
///   {"label": "y", "classes": ["no", "yes"],
///    "features": [{"name": "age", "kind": "numerical", "mutability": "hard"},
///                 {"name": "sex", "kind": "categorical", "categories": ["m", "f"]}]}
/// "classes" is optional; without it labels are sorted by name.
struct Schema {
  std::string label;
  std::vector<std::string> classes;
  std::vector<FeatureMeta> features;
};

Schema schema_from_json(const nlohmann::json& doc);
Schema load_schema(const std::filesystem::path& path);

/// CSV with a header row naming every schema column. Extra columns are
/// ignored. Errors carry the 1-based line number.
Dataset read_csv(std::istream& in, const Schema& schema);

/// Sparse "label index:value ..." lines with 1-based indices; missing
/// entries are zero. Without schema features, every index up to the largest
/// one seen becomes a soft numerical feature named f<index>.
Dataset read_libsvm(std::istream& in, const Schema& schema);

enum class DataFormat : std::uint8_t { csv, libsvm };
DataFormat data_format_from_string(const std::string& s);
Dataset load_dataset(const std::filesystem::path& path, DataFormat format, const Schema& schema);

/// Seeded shuffle, then the first round(N * test_fraction) rows become the test part.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             std::uint64_t seed);

/// Parses one raw feature vector: numbers for numerical features, category
/// names (or indices) for categorical ones, comma separated.
FeatureVector parse_feature_vector(const std::string& text, const std::vector<FeatureMeta>& features);

/// Run settings shared by the command-line tools.
struct Config {
  double z = 0.5;
  std::optional<double> alpha;  // empty: mean action cost
  std::uint64_t delta = 10'000'000;
  std::size_t k = 3;
  int max_makespan = 10;
  std::uint64_t cost_seed = 1;
  double beta_lo = 1.0;
  double beta_hi = 100.0;
  std::size_t workers = 1;

  void check() const;
};

/// Unknown keys are rejected so that typos do not go unnoticed.
Config config_from_json(const nlohmann::json& doc);
Config load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const Config& c);

}  // namespace soap
