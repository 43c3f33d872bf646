#include "soap/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace soap {

SimilarityWeights::SimilarityWeights(std::vector<double> weights) : phi(std::move(weights)) {
  double sum = 0.0;
  for (double w : phi) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw InvalidInput("similarity weights must be finite and nonnegative");
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidInput("similarity weights must not all be zero");
}

SimilarityWeights SimilarityWeights::uniform(std::size_t features) {
  return SimilarityWeights(std::vector<double>(features, 1.0 / static_cast<double>(features)));
}

SimilarityWeights SimilarityWeights::split_frequency(const RandomForest& forest) {
  std::vector<double> counts(forest.feature_count(), 0.0);
  double total = 0.0;
  for (const DecisionTree& tree : forest.trees())
    for (const TreeNode& n : tree.nodes())
      if (!n.is_leaf()) {
        counts[n.feature] += 1.0;
        total += 1.0;
      }
  if (total == 0.0) return uniform(forest.feature_count());
  for (double& c : counts) c /= total;
  return SimilarityWeights(std::move(counts));
}

std::vector<Neighbor> k_nearest(const State& query, const GoalDatabase& db, std::size_t k,
                                const SimilarityWeights& weights,
                                const std::vector<FeatureMeta>& features,
                                const PartitionTable& table) {
  if (k == 0) throw InvalidInput("neighbourhood size K must be >= 1");
  std::vector<Neighbor> all;
  for (const auto& [key, entry] : db.entries()) {
    if (!entry.has_goal()) continue;
    const double sim = state_similarity(query, key, weights, features, table);
    if (sim > 0.0) all.push_back(Neighbor{key, entry, sim});
  }
  auto better = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.entry.cost != b.entry.cost) return a.entry.cost < b.entry.cost;
    return a.key < b.key;
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), better);
  all.resize(keep);
  return all;
}

}  // namespace soap
