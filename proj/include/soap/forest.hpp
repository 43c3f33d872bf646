#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace soap {

enum class FeatureKind : std::uint8_t { numerical, categorical };
enum class Mutability : std::uint8_t { hard, soft };

struct FeatureMeta {
  std::string name;
  FeatureKind kind = FeatureKind::numerical;
  std::vector<std::string> categories;  // categorical only
  Mutability mutability = Mutability::soft;
  std::size_t index = 0;

  bool categorical() const noexcept { return kind == FeatureKind::categorical; }
  bool soft() const noexcept { return mutability == Mutability::soft; }
  friend bool operator==(const FeatureMeta&, const FeatureMeta&) = default;
};

/// Raw feature values. Categorical entries hold the 0-based category index.
using FeatureVector = std::vector<double>;

/// Index of a class label in the forest's class domain.
using Label = std::size_t;

struct TreeNode {
  enum class Kind : std::uint8_t { split, leaf };

  Kind kind = Kind::leaf;
  std::size_t feature = 0;
  double threshold = 0.0;                     // numerical split: left iff value < threshold
  std::vector<std::size_t> left_categories;  // categorical split: left iff value in set (sorted)
  std::size_t left = 0;
  std::size_t right = 0;
  Label label = 0;

  static TreeNode leaf(Label label);
  static TreeNode numerical_split(std::size_t feature, double threshold, std::size_t left,
                                  std::size_t right);
  static TreeNode categorical_split(std::size_t feature, std::vector<std::size_t> left_categories,
                                    std::size_t left, std::size_t right);

  bool is_leaf() const noexcept { return kind == Kind::leaf; }
  bool goes_left(double value, bool categorical) const;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// A decision tree stored as a pre-order node array; node 0 is the root and
/// every split's left child immediately follows it.
class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Descends without validating x. Callers check the vector first.
  Label descend(const FeatureVector& x, const std::vector<FeatureMeta>& features) const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Weighted ensemble of axis-aligned decision trees. Immutable once built;
/// the constructor enforces every structural invariant and throws
/// InvalidInput with the offending location otherwise.
class RandomForest {
 public:
  RandomForest(std::vector<std::string> classes, std::vector<FeatureMeta> features,
               std::vector<DecisionTree> trees, std::vector<double> weights);

  const std::vector<std::string>& classes() const noexcept { return classes_; }
  const std::vector<FeatureMeta>& features() const noexcept { return features_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t feature_count() const noexcept { return features_.size(); }

  Label label_of(std::string_view name) const;

  /// Throws InvalidInput on wrong arity, non-finite values or unknown categories.
  void check_vector(const FeatureVector& x) const;

  /// Class distribution of the weighted vote, one entry per class.
  std::vector<double> distribution(const FeatureVector& x) const;

  friend bool operator==(const RandomForest&, const RandomForest&) = default;

 private:
  std::vector<std::string> classes_;
  std::vector<FeatureMeta> features_;
  std::vector<DecisionTree> trees_;
  std::vector<double> weights_;
};

Label predict_tree(const DecisionTree& tree, const std::vector<FeatureMeta>& features,
                   const FeatureVector& x);

/// Weighted vote share of class c.
double class_proba(const RandomForest& forest, const FeatureVector& x, Label c);

/// Argmax of class_proba; ties go to the class declared first.
Label predict(const RandomForest& forest, const FeatureVector& x);

struct Dataset {
  std::vector<FeatureMeta> features;
  std::vector<std::string> classes;
  std::vector<FeatureVector> rows;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return rows.size(); }
};

struct TrainParams {
  std::size_t tree_count = 100;
  std::size_t sample_size = 0;  // bootstrap size per tree, 0 < n < N
  std::size_t mtry = 1;
  std::size_t max_depth = 16;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 1;
};

/// Breiman-style bagging with Gini splits over `mtry` random features.
/// A single-class dataset yields single-leaf trees and a warning.
RandomForest train_forest(const Dataset& data, const TrainParams& params,
                          std::vector<std::string>* warnings = nullptr);

// Model files.
inline constexpr int kModelFormatVersion = 1;

nlohmann::json forest_to_json(const RandomForest& forest);
RandomForest forest_from_json(const nlohmann::json& doc);
void save_forest(const RandomForest& forest, const std::filesystem::path& path);
RandomForest load_forest(const std::filesystem::path& path);

/// Stable 64-bit hash of the canonical model serialization, as hex.
std::string forest_fingerprint(const RandomForest& forest);

}  // namespace soap
