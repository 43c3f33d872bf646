#pragma once

#include <cstddef>
#include <cstdlib>
#include <span>
#include <vector>

#include "soap/error.hpp"
#include "soap/forest.hpp"
#include "soap/offline.hpp"
#include "soap/partitions.hpp"

namespace soap {

/// Nonnegative per-feature weights phi_i with a positive sum.
struct SimilarityWeights {
  std::vector<double> phi;

  explicit SimilarityWeights(std::vector<double> weights);
  static SimilarityWeights uniform(std::size_t features);
  /// Share of forest splits that test each feature; uniform if the forest never splits.
  static SimilarityWeights split_frequency(const RandomForest& forest);
};

/// Similarity of feature i in [0, 1]. Categorical features match or not;
/// numerical ones decay linearly with partition distance. A numerical
/// feature with a single partition always scores 1.
template <class Scalar = double>
Scalar feature_similarity(const State& a, const State& b, std::size_t i, const PartitionTable& table) {
  if (table[i].kind == FeatureKind::categorical) return a[i] == b[i] ? Scalar(1) : Scalar(0);
  const int n = table.count(i);
  if (n <= 1) return Scalar(1);
  return Scalar(1) - Scalar(std::abs(a[i] - b[i])) / Scalar(n - 1);
}

/// Weighted mean of feature similarities, forced to 0 when any hard
/// feature sits in a different partition.
template <class Scalar = double>
Scalar state_similarity(const State& a, const State& b, std::span<const Scalar> weights,
                        const std::vector<FeatureMeta>& features, const PartitionTable& table) {
  if (weights.size() != a.size() || a.size() != b.size() || features.size() != a.size())
    throw InvalidInput("state similarity: arity mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!features[i].soft() && a[i] != b[i]) return Scalar(0);
  Scalar num(0);
  Scalar den(0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += weights[i] * feature_similarity<Scalar>(a, b, i, table);
    den += weights[i];
  }
  return num / den;
}

inline double state_similarity(const State& a, const State& b, const SimilarityWeights& w,
                               const std::vector<FeatureMeta>& features, const PartitionTable& table) {
  return state_similarity<double>(a, b, std::span<const double>(w.phi), features, table);
}

struct Neighbor {
  State key;
  PreferredGoalEntry entry;
  double similarity;
};

/// Up to K database entries most similar to `query`, best first. Entries
/// without a goal and entries with similarity 0 never qualify; ties go to
/// the lower path cost, then the smaller state. An empty result tells the
/// caller to fall back to a direct search.
std::vector<Neighbor> k_nearest(const State& query, const GoalDatabase& db, std::size_t k,
                                const SimilarityWeights& weights,
                                const std::vector<FeatureMeta>& features,
                                const PartitionTable& table);

}  // namespace soap
