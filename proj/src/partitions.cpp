#include "soap/partitions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <unordered_set>

#include "soap/error.hpp"

namespace soap {

std::string State::str() const {
  std::string out = "(";
  for (std::size_t i = 0; i < z_.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(z_[i]);
  }
  return out + ")";
}

PartitionTable::PartitionTable(std::vector<Feature> features) : features_(std::move(features)) {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const Feature& f = features_[i];
    if (f.count < 1) throw InvalidInput("feature " + std::to_string(i) + ": zero partitions");
    if (f.kind == FeatureKind::numerical) {
      if (f.count != f.thresholds.size() + 1)
        throw InvalidInput("feature " + std::to_string(i) + ": partition count mismatch");
      for (std::size_t k = 1; k < f.thresholds.size(); ++k)
        if (!(f.thresholds[k - 1] < f.thresholds[k]))
          throw InvalidInput("feature " + std::to_string(i) + ": thresholds not increasing");
    }
  }
}

std::uint64_t PartitionTable::state_count() const {
  std::uint64_t total = 1;
  for (const Feature& f : features_) {
    if (total > std::numeric_limits<std::uint64_t>::max() / f.count)
      return std::numeric_limits<std::uint64_t>::max();
    total *= f.count;
  }
  return total;
}

bool PartitionTable::valid(const State& s) const {
  if (s.size() != features_.size()) return false;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] < 0 || s[i] >= count(i)) return false;
  return true;
}

void PartitionTable::check_state(const State& s) const {
  if (s.size() != features_.size())
    throw InvalidInput("state " + s.str() + " has arity " + std::to_string(s.size()) +
                       ", expected " + std::to_string(features_.size()));
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] < 0 || s[i] >= count(i))
      throw InvalidInput("state " + s.str() + ": index " + std::to_string(s[i]) +
                         " out of range for feature " + std::to_string(i));
}

int PartitionTable::cell_of(std::size_t i, double value) const {
  const Feature& f = features_[i];
  if (f.kind == FeatureKind::categorical) {
    if (value < 0 || value != std::floor(value) || value >= static_cast<double>(f.count))
      throw InvalidInput("feature " + std::to_string(i) + ": category outside the domain");
    return static_cast<int>(value);
  }
  // upper_bound puts a value equal to b_k into [b_k, b_{k+1})
  return static_cast<int>(std::upper_bound(f.thresholds.begin(), f.thresholds.end(), value) -
                          f.thresholds.begin());
}

PartitionTable build_partitions(const RandomForest& forest) {
  const auto& meta = forest.features();
  std::vector<std::set<double>> cuts(meta.size());
  for (const DecisionTree& tree : forest.trees())
    for (const TreeNode& n : tree.nodes())
      if (!n.is_leaf() && !meta[n.feature].categorical()) cuts[n.feature].insert(n.threshold);

  std::vector<PartitionTable::Feature> features;
  for (std::size_t i = 0; i < meta.size(); ++i) {
    PartitionTable::Feature f;
    f.kind = meta[i].kind;
    if (meta[i].categorical()) {
      f.count = meta[i].categories.size();
    } else {
      f.thresholds.assign(cuts[i].begin(), cuts[i].end());
      f.count = f.thresholds.size() + 1;
    }
    features.push_back(std::move(f));
  }
  return PartitionTable(std::move(features));
}

State to_state(const FeatureVector& x, const PartitionTable& table,
               const std::vector<FeatureMeta>& features) {
  if (x.size() != table.size())
    throw InvalidInput("feature vector has " + std::to_string(x.size()) + " entries, expected " +
                       std::to_string(table.size()));
  std::vector<int> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]))
      throw InvalidInput("feature '" + features[i].name + "': NaN value");
    try {
      z[i] = table.cell_of(i, x[i]);
    } catch (const InvalidInput&) {
      throw InvalidInput("feature '" + features[i].name + "': value " + std::to_string(x[i]) +
                         " outside the category domain");
    }
  }
  return State(std::move(z));
}

FeatureVector representative(const State& s, const PartitionTable& table) {
  table.check_state(s);
  FeatureVector x(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& f = table[i];
    const int k = s[i];
    if (f.kind == FeatureKind::categorical) {
      x[i] = k;
      continue;
    }
    const auto& b = f.thresholds;
    if (b.empty()) {
      x[i] = 0.0;
    } else if (k == 0) {
      x[i] = b.front() - 1.0;
      if (!(x[i] < b.front())) x[i] = std::nextafter(b.front(), -HUGE_VAL);
    } else if (static_cast<std::size_t>(k) == b.size()) {
      x[i] = b.back() + 1.0;
      if (!(x[i] > b.back())) x[i] = std::nextafter(b.back(), HUGE_VAL);
    } else {
      const double lo = b[k - 1];
      const double hi = b[k];
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid >= lo && mid < hi)) mid = lo;
      x[i] = mid;
    }
  }
  return x;
}

double state_proba(const RandomForest& forest, const PartitionTable& table, const State& s,
                   Label c) {
  return class_proba(forest, representative(s, table), c);
}

std::vector<State> enumerate_states(const PartitionTable& table, std::uint64_t limit) {
  const std::uint64_t total = table.state_count();
  if (total > limit)
    throw InvalidInput("state space has " + std::to_string(total) + " states, above the limit " +
                       std::to_string(limit));
  std::vector<State> out;
  out.reserve(total);
  std::vector<int> z(table.size(), 0);
  for (std::uint64_t n = 0; n < total; ++n) {
    out.emplace_back(z);
    for (std::size_t i = table.size(); i-- > 0;) {
      if (++z[i] < table.count(i)) break;
      z[i] = 0;
    }
  }
  return out;
}

namespace {

State decode_index(std::uint64_t idx, const PartitionTable& table) {
  std::vector<int> z(table.size());
  for (std::size_t i = table.size(); i-- > 0;) {
    const auto n = static_cast<std::uint64_t>(table.count(i));
    z[i] = static_cast<int>(idx % n);
    idx /= n;
  }
  return State(std::move(z));
}

}  // namespace

std::vector<State> sample_states(const PartitionTable& table, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw InvalidInput("preprocessing fraction must lie in (0, 1]");
  const std::uint64_t total = table.state_count();
  if (total == std::numeric_limits<std::uint64_t>::max())
    throw InvalidInput("state space too large to sample");
  auto want = static_cast<std::uint64_t>(std::llround(fraction * static_cast<double>(total)));
  return sample_state_count(table, std::clamp<std::uint64_t>(want, 1, total), seed);
}

std::vector<State> sample_state_count(const PartitionTable& table, std::uint64_t count,
                                      std::uint64_t seed) {
  const std::uint64_t total = table.state_count();
  if (count < 1 || count > total)
    throw InvalidInput("cannot sample " + std::to_string(count) + " of " + std::to_string(total) +
                       " states");
  if (count == total) return enumerate_states(table, total);

  // Floyd's algorithm: `count` distinct indices without materialising the space.
  std::mt19937_64 rng(seed);
  std::unordered_set<std::uint64_t> chosen;
  for (std::uint64_t j = total - count; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const std::uint64_t t = pick(rng);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  std::vector<std::uint64_t> idx(chosen.begin(), chosen.end());
  std::sort(idx.begin(), idx.end());
  std::vector<State> out;
  out.reserve(idx.size());
  for (std::uint64_t i : idx) out.push_back(decode_index(i, table));
  return out;
}

nlohmann::json partitions_to_json(const PartitionTable& table,
                                  const std::vector<FeatureMeta>& features) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < table.size(); ++i) {
    nlohmann::json f{{"name", features[i].name}, {"count", table[i].count}};
    if (table[i].kind == FeatureKind::numerical) f["thresholds"] = table[i].thresholds;
    else f["categories"] = features[i].categories;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace soap
