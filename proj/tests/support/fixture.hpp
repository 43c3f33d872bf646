#pragma once

#include <string>

#include "soap/forest.hpp"
#include "soap/partitions.hpp"
#include "soap/sas.hpp"

namespace soap::testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(SOAP_FIXTURE_DIR) + "/" + name;
}

inline std::string data_path(const std::string& name) { return std::string(SOAP_DATA_DIR) + "/" + name; }

/// Two trees over (x1 sex, x2, x3) with thresholds x2:{5} and x3:{1000, 1500}.
inline RandomForest example_forest() { return load_forest(fixture_path("example2_forest.v1.json")); }

struct ExampleSetup {
  RandomForest forest = example_forest();
  PartitionTable table = build_partitions(forest);
  ActionLibrary library =
      default_action_library(table, forest.features(), CostModel::uniform(forest.feature_count()));
};

}  // namespace soap::testing
