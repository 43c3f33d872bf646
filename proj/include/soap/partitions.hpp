#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "soap/forest.hpp"

namespace soap {

/// A SAS+ state: one partition index per feature.
class State {
 public:
  State() = default;
  explicit State(std::vector<int> z) : z_(std::move(z)) {}
  State(std::initializer_list<int> z) : z_(z) {}

  std::size_t size() const noexcept { return z_.size(); }
  int operator[](std::size_t i) const { return z_[i]; }
  int& operator[](std::size_t i) { return z_[i]; }
  const std::vector<int>& values() const noexcept { return z_; }

  auto begin() const noexcept { return z_.begin(); }
  auto end() const noexcept { return z_.end(); }

  friend auto operator<=>(const State&, const State&) = default;
  friend bool operator==(const State&, const State&) = default;

  std::string str() const;

 private:
  std::vector<int> z_;
};

struct StateHash {
  std::size_t operator()(const State& s) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int v : s) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(v));
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

/// Per-feature partitions induced by every branching threshold in a forest.
/// Numerical feature i with sorted thresholds b_1 < ... < b_n has n + 1
/// half-open cells (-inf, b_1), [b_1, b_2), ..., [b_n, +inf).
class PartitionTable {
 public:
  struct Feature {
    FeatureKind kind = FeatureKind::numerical;
    std::vector<double> thresholds;  // numerical only, strictly increasing
    std::size_t count = 1;           // n_i
  };

  PartitionTable() = default;
  explicit PartitionTable(std::vector<Feature> features);

  std::size_t size() const noexcept { return features_.size(); }
  const Feature& operator[](std::size_t i) const { return features_[i]; }
  const std::vector<Feature>& features() const noexcept { return features_; }
  int count(std::size_t i) const { return static_cast<int>(features_[i].count); }

  /// Product of the partition counts; saturates at UINT64_MAX.
  std::uint64_t state_count() const;

  bool valid(const State& s) const;
  void check_state(const State& s) const;

  /// Index of the cell containing `value` for feature i.
  int cell_of(std::size_t i, double value) const;

 private:
  std::vector<Feature> features_;
};

PartitionTable build_partitions(const RandomForest& forest);

State to_state(const FeatureVector& x, const PartitionTable& table,
               const std::vector<FeatureMeta>& features);

/// Canonical point inside every indicated cell: the category itself, the
/// midpoint of a bounded interval, b_1 - 1 below the first threshold and
/// b_n + 1 above the last one (0 when the feature is never split).
FeatureVector representative(const State& s, const PartitionTable& table);

double state_proba(const RandomForest& forest, const PartitionTable& table, const State& s,
                   Label c);

/// Every state of the table in lexicographic order. Throws when more than
/// `limit` states exist.
std::vector<State> enumerate_states(const PartitionTable& table, std::uint64_t limit);

/// A uniformly random subset of round(fraction * state_count) distinct states,
/// sorted lexicographically. fraction in (0, 1].
std::vector<State> sample_states(const PartitionTable& table, double fraction, std::uint64_t seed);
/// `count` distinct states drawn uniformly, sorted lexicographically.
std::vector<State> sample_state_count(const PartitionTable& table, std::uint64_t count,
                                      std::uint64_t seed);

/// Audit section embeddable in a model file under "partitions".
nlohmann::json partitions_to_json(const PartitionTable& table, const std::vector<FeatureMeta>& features);

}  // namespace soap
