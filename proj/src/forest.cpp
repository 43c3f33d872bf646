#include "soap/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "soap/error.hpp"

namespace soap {

TreeNode TreeNode::leaf(Label label) {
  TreeNode n;
  n.kind = Kind::leaf;
  n.label = label;
  return n;
}

TreeNode TreeNode::numerical_split(std::size_t feature, double threshold, std::size_t left,
                                   std::size_t right) {
  TreeNode n;
  n.kind = Kind::split;
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return n;
}

TreeNode TreeNode::categorical_split(std::size_t feature, std::vector<std::size_t> left_categories,
                                     std::size_t left, std::size_t right) {
  TreeNode n;
  n.kind = Kind::split;
  n.feature = feature;
  std::sort(left_categories.begin(), left_categories.end());
  n.left_categories = std::move(left_categories);
  n.left = left;
  n.right = right;
  return n;
}

bool TreeNode::goes_left(double value, bool categorical) const {
  if (!categorical) return value < threshold;
  const auto cat = static_cast<std::size_t>(value);
  return std::binary_search(left_categories.begin(), left_categories.end(), cat);
}

Label DecisionTree::descend(const FeatureVector& x, const std::vector<FeatureMeta>& features) const {
  std::size_t at = 0;
  while (!nodes_[at].is_leaf()) {
    const TreeNode& n = nodes_[at];
    at = n.goes_left(x[n.feature], features[n.feature].categorical()) ? n.left : n.right;
  }
  return nodes_[at].label;
}

namespace {

std::string node_path(std::size_t tree, std::size_t node) {
  return "trees[" + std::to_string(tree) + "].nodes[" + std::to_string(node) + "]";
}

void check_features(const std::vector<FeatureMeta>& features) {
  if (features.empty()) throw InvalidInput("forest has no features");
  std::set<std::string> names;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureMeta& f = features[i];
    if (f.index != i)
      throw InvalidInput("features[" + std::to_string(i) + "]: index " + std::to_string(f.index) +
                         " breaks the contiguous 0..M-1 range");
    if (!names.insert(f.name).second)
      throw InvalidInput("features[" + std::to_string(i) + "]: duplicate name '" + f.name + "'");
    if (f.categorical()) {
      if (f.categories.empty())
        throw InvalidInput("feature '" + f.name + "': categorical feature without categories");
      std::set<std::string> seen(f.categories.begin(), f.categories.end());
      if (seen.size() != f.categories.size())
        throw InvalidInput("feature '" + f.name + "': duplicate category label");
    } else if (!f.categories.empty()) {
      throw InvalidInput("feature '" + f.name + "': numerical feature lists categories");
    }
  }
}

struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

void check_tree(const DecisionTree& tree, std::size_t t, const std::vector<FeatureMeta>& features,
                std::size_t class_count) {
  const auto& nodes = tree.nodes();
  if (nodes.empty()) throw InvalidInput("trees[" + std::to_string(t) + "]: empty tree");

  std::vector<int> seen(nodes.size(), 0);
  // (node, interval per feature) explored depth first
  std::vector<std::pair<std::size_t, std::vector<Interval>>> stack;
  stack.emplace_back(0, std::vector<Interval>(features.size()));
  seen[0] = 1;
  while (!stack.empty()) {
    auto [at, bounds] = std::move(stack.back());
    stack.pop_back();
    const TreeNode& n = nodes[at];
    if (n.is_leaf()) {
      if (n.label >= class_count)
        throw InvalidInput(node_path(t, at) + ": leaf label " + std::to_string(n.label) +
                           " is not in the class domain");
      continue;
    }
    if (n.feature >= features.size())
      throw InvalidInput(node_path(t, at) + ": split feature " + std::to_string(n.feature) +
                         " out of range");
    if (n.left != at + 1 || n.right <= n.left || n.right >= nodes.size())
      throw InvalidInput(node_path(t, at) + ": child indices break pre-order layout");
    for (std::size_t child : {n.left, n.right}) {
      if (seen[child]++)
        throw InvalidInput(node_path(t, child) + ": node reachable more than once");
    }
    const FeatureMeta& f = features[n.feature];
    if (f.categorical()) {
      if (!n.left_categories.empty() && n.left_categories.back() >= f.categories.size())
        throw InvalidInput(node_path(t, at) + ": category outside the domain of '" + f.name + "'");
      std::set<std::size_t> subset(n.left_categories.begin(), n.left_categories.end());
      if (subset.empty() || subset.size() >= f.categories.size() ||
          subset.size() != n.left_categories.size())
        throw InvalidInput(node_path(t, at) + ": category subset must be nonempty and proper");
      stack.emplace_back(n.right, bounds);
      stack.emplace_back(n.left, std::move(bounds));
    } else {
      if (!n.left_categories.empty())
        throw InvalidInput(node_path(t, at) + ": category subset on numerical feature '" + f.name +
                           "'");
      if (!std::isfinite(n.threshold))
        throw InvalidInput(node_path(t, at) + ": non-finite threshold");
      Interval iv = bounds[n.feature];
      if (!(iv.lo < n.threshold && n.threshold < iv.hi))
        throw InvalidInput(node_path(t, at) + ": threshold on '" + f.name +
                           "' does not narrow the interval inherited from its ancestors");
      auto right_bounds = bounds;
      right_bounds[n.feature].lo = n.threshold;
      bounds[n.feature].hi = n.threshold;
      stack.emplace_back(n.right, std::move(right_bounds));
      stack.emplace_back(n.left, std::move(bounds));
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!seen[i]) throw InvalidInput(node_path(t, i) + ": unreachable node");
}

}  // namespace

RandomForest::RandomForest(std::vector<std::string> classes, std::vector<FeatureMeta> features,
                           std::vector<DecisionTree> trees, std::vector<double> weights)
    : classes_(std::move(classes)),
      features_(std::move(features)),
      trees_(std::move(trees)),
      weights_(std::move(weights)) {
  if (classes_.empty()) throw InvalidInput("empty class domain");
  std::set<std::string> uniq(classes_.begin(), classes_.end());
  if (uniq.size() != classes_.size()) throw InvalidInput("duplicate class label");
  check_features(features_);
  if (trees_.empty()) throw InvalidInput("forest has no trees");
  if (weights_.size() != trees_.size())
    throw InvalidInput("weights count " + std::to_string(weights_.size()) +
                       " does not match tree count " + std::to_string(trees_.size()));
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    if (!(weights_[t] > 0.0) || !std::isfinite(weights_[t]))
      throw InvalidInput("trees[" + std::to_string(t) + "]: weight must be finite and positive");
    check_tree(trees_[t], t, features_, classes_.size());
  }
}

Label RandomForest::label_of(std::string_view name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) throw InvalidInput("unknown class label '" + std::string(name) + "'");
  return static_cast<Label>(it - classes_.begin());
}

void RandomForest::check_vector(const FeatureVector& x) const {
  if (x.size() != features_.size())
    throw InvalidInput("feature vector has " + std::to_string(x.size()) + " entries, expected " +
                       std::to_string(features_.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const FeatureMeta& f = features_[i];
    if (!std::isfinite(x[i]))
      throw InvalidInput("feature '" + f.name + "': non-finite value");
    if (f.categorical()) {
      const double v = x[i];
      if (v < 0 || v != std::floor(v) || v >= static_cast<double>(f.categories.size()))
        throw InvalidInput("feature '" + f.name + "': category index " + std::to_string(v) +
                           " outside the domain");
    }
  }
}

std::vector<double> RandomForest::distribution(const FeatureVector& x) const {
  check_vector(x);
  std::vector<double> votes(classes_.size(), 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    votes[trees_[t].descend(x, features_)] += weights_[t];
    total += weights_[t];
  }
  for (double& v : votes) v /= total;
  return votes;
}

Label predict_tree(const DecisionTree& tree, const std::vector<FeatureMeta>& features,
                   const FeatureVector& x) {
  if (x.size() != features.size())
    throw InvalidInput("feature vector has " + std::to_string(x.size()) + " entries, expected " +
                       std::to_string(features.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (features[i].categorical()) {
      const double v = x[i];
      if (v < 0 || v != std::floor(v) || v >= static_cast<double>(features[i].categories.size()))
        throw InvalidInput("feature '" + features[i].name + "': category outside the domain");
    } else if (std::isnan(x[i])) {
      throw InvalidInput("feature '" + features[i].name + "': NaN value");
    }
  }
  return tree.descend(x, features);
}

double class_proba(const RandomForest& forest, const FeatureVector& x, Label c) {
  if (c >= forest.classes().size())
    throw InvalidInput("label index " + std::to_string(c) + " not in the class domain");
  return forest.distribution(x)[c];
}

Label predict(const RandomForest& forest, const FeatureVector& x) {
  const auto dist = forest.distribution(x);
  // max_element returns the first maximum, which is the declaration-order tie-break
  return static_cast<Label>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

// ---------------------------------------------------------------------------
// Training

namespace {

double gini(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum += p * p;
  }
  return 1.0 - sum;
}

struct Split {
  bool found = false;
  double score = std::numeric_limits<double>::infinity();  // weighted child impurity
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t category = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const TrainParams& params, std::mt19937_64& rng)
      : data_(data), params_(params), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> sample) {
    nodes_.clear();
    grow(sample, 0);
    return DecisionTree(std::move(nodes_));
  }

 private:
  Label majority(const std::vector<std::size_t>& counts) const {
    return static_cast<Label>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  std::vector<std::size_t> class_counts(const std::vector<std::size_t>& rows) const {
    std::vector<std::size_t> counts(data_.classes.size(), 0);
    for (std::size_t r : rows) ++counts[data_.labels[r]];
    return counts;
  }

  void consider_numerical(const std::vector<std::size_t>& rows, std::size_t f, Split& best) {
    std::vector<std::pair<double, Label>> values;
    values.reserve(rows.size());
    for (std::size_t r : rows) values.emplace_back(data_.rows[r][f], data_.labels[r]);
    std::sort(values.begin(), values.end());

    const std::size_t n = values.size();
    std::vector<std::size_t> left(data_.classes.size(), 0);
    std::vector<std::size_t> right = class_counts(rows);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      ++left[values[i].second];
      --right[values[i].second];
      if (values[i].first == values[i + 1].first) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
      const double score = (static_cast<double>(nl) * gini(left, nl) +
                            static_cast<double>(nr) * gini(right, nr)) /
                           static_cast<double>(n);
      if (score < best.score) {
        double theta = values[i].first + (values[i + 1].first - values[i].first) / 2.0;
        if (!(theta > values[i].first)) theta = values[i + 1].first;
        best = Split{true, score, f, theta, 0};
      }
    }
  }

  void consider_categorical(const std::vector<std::size_t>& rows, std::size_t f, Split& best) {
    const std::size_t k = data_.features[f].categories.size();
    std::vector<std::vector<std::size_t>> per_cat(k,
                                                  std::vector<std::size_t>(data_.classes.size()));
    std::vector<std::size_t> cat_total(k, 0);
    for (std::size_t r : rows) {
      const auto c = static_cast<std::size_t>(data_.rows[r][f]);
      ++per_cat[c][data_.labels[r]];
      ++cat_total[c];
    }
    const std::vector<std::size_t> all = class_counts(rows);
    const std::size_t n = rows.size();
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t nl = cat_total[c];
      const std::size_t nr = n - nl;
      if (nl < params_.min_leaf || nr < params_.min_leaf || nl == 0 || nr == 0) continue;
      std::vector<std::size_t> right(all);
      for (std::size_t y = 0; y < right.size(); ++y) right[y] -= per_cat[c][y];
      const double score = (static_cast<double>(nl) * gini(per_cat[c], nl) +
                            static_cast<double>(nr) * gini(right, nr)) /
                           static_cast<double>(n);
      if (score < best.score) best = Split{true, score, f, 0.0, c};
    }
  }

  std::size_t grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    const std::size_t at = nodes_.size();
    const auto counts = class_counts(rows);
    const double impurity = gini(counts, rows.size());
    nodes_.push_back(TreeNode::leaf(majority(counts)));
    if (impurity == 0.0 || depth >= params_.max_depth || rows.size() < 2 * params_.min_leaf)
      return at;

    std::vector<std::size_t> order(data_.features.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    Split best;
    // Keep drawing features past mtry only while no valid split has been seen.
    for (std::size_t i = 0; i < order.size() && (i < params_.mtry || !best.found); ++i) {
      const std::size_t f = order[i];
      if (data_.features[f].categorical())
        consider_categorical(rows, f, best);
      else
        consider_numerical(rows, f, best);
    }
    if (!best.found || !(best.score < impurity)) return at;

    const bool cat = data_.features[best.feature].categorical();
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : rows) {
      const double v = data_.rows[r][best.feature];
      const bool left = cat ? static_cast<std::size_t>(v) == best.category : v < best.threshold;
      (left ? left_rows : right_rows).push_back(r);
    }
    const std::size_t l = grow(left_rows, depth + 1);
    const std::size_t r = grow(right_rows, depth + 1);
    nodes_[at] = cat ? TreeNode::categorical_split(best.feature, {best.category}, l, r)
                     : TreeNode::numerical_split(best.feature, best.threshold, l, r);
    return at;
  }

  const Dataset& data_;
  const TrainParams& params_;
  std::mt19937_64& rng_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

RandomForest train_forest(const Dataset& data, const TrainParams& params,
                          std::vector<std::string>* warnings) {
  const std::size_t n = data.size();
  const std::size_t m = data.features.size();
  if (n < 2) throw InvalidInput("training needs at least two samples");
  if (data.labels.size() != n) throw InvalidInput("label count does not match row count");
  if (params.tree_count == 0 || params.sample_size == 0 || params.mtry == 0 ||
      params.max_depth == 0 || params.min_leaf == 0)
    throw InvalidInput("training parameters must all be positive");
  if (params.sample_size >= n)
    throw InvalidInput("bootstrap size " + std::to_string(params.sample_size) +
                       " must be below the dataset size " + std::to_string(n));
  if (params.mtry > m)
    throw InvalidInput("mtry " + std::to_string(params.mtry) + " exceeds feature count " +
                       std::to_string(m));

  std::set<Label> distinct(data.labels.begin(), data.labels.end());
  if (distinct.size() < 2 && warnings)
    warnings->push_back("dataset has a single class; every tree is a single leaf");

  // Probe the rows up front so training never descends on malformed data.
  const RandomForest probe(data.classes, data.features, {DecisionTree({TreeNode::leaf(0)})}, {1.0});
  for (std::size_t r = 0; r < n; ++r) {
    probe.check_vector(data.rows[r]);
    if (data.labels[r] >= data.classes.size())
      throw InvalidInput("row " + std::to_string(r) + ": label outside the class domain");
  }

  std::vector<DecisionTree> trees;
  trees.reserve(params.tree_count);
  std::seed_seq seq{params.seed, params.seed >> 32};
  std::mt19937_64 rng(seq);
  TreeBuilder builder(data, params, rng);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (std::size_t d = 0; d < params.tree_count; ++d) {
    std::vector<std::size_t> sample(params.sample_size);
    for (auto& s : sample) s = pick(rng);
    trees.push_back(builder.build(std::move(sample)));
  }
  return RandomForest(data.classes, data.features, std::move(trees),
                      std::vector<double>(params.tree_count, 1.0));
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

using nlohmann::json;

const char* kind_name(FeatureKind k) { return k == FeatureKind::numerical ? "numerical" : "categorical"; }
const char* mutability_name(Mutability m) { return m == Mutability::hard ? "hard" : "soft"; }

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

json forest_to_json(const RandomForest& forest) {
  json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["classes"] = forest.classes();
  json features = json::array();
  for (const FeatureMeta& f : forest.features()) {
    json jf{{"name", f.name}, {"kind", kind_name(f.kind)}, {"mutability", mutability_name(f.mutability)}};
    if (f.categorical()) jf["categories"] = f.categories;
    features.push_back(std::move(jf));
  }
  doc["features"] = std::move(features);
  json trees = json::array();
  for (std::size_t t = 0; t < forest.trees().size(); ++t) {
    json nodes = json::array();
    for (const TreeNode& n : forest.trees()[t].nodes()) {
      if (n.is_leaf()) {
        nodes.push_back(json{{"leaf", forest.classes()[n.label]}});
        continue;
      }
      json jn{{"feature", n.feature}, {"left", n.left}, {"right", n.right}};
      const FeatureMeta& f = forest.features()[n.feature];
      if (f.categorical()) {
        json cats = json::array();
        for (std::size_t c : n.left_categories) cats.push_back(f.categories[c]);
        jn["categories"] = std::move(cats);
      } else {
        jn["threshold"] = n.threshold;
      }
      nodes.push_back(std::move(jn));
    }
    trees.push_back(json{{"weight", forest.weights()[t]}, {"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);
  return doc;
}

RandomForest forest_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("model: top level must be an object");
  const int version = field<int>(doc, "format_version", "model");
  if (version != kModelFormatVersion)
    throw ParseError("model: format_version " + std::to_string(version) + " unsupported (expected " +
                     std::to_string(kModelFormatVersion) + ")");
  auto classes = field<std::vector<std::string>>(doc, "classes", "model");

  std::vector<FeatureMeta> features;
  const json& jfeatures = doc.contains("features") ? doc["features"] : json();
  if (!jfeatures.is_array()) throw ParseError("model: 'features' must be an array");
  for (std::size_t i = 0; i < jfeatures.size(); ++i) {
    const std::string where = "features[" + std::to_string(i) + "]";
    FeatureMeta f;
    f.index = i;
    f.name = field<std::string>(jfeatures[i], "name", where);
    const auto kind = field<std::string>(jfeatures[i], "kind", where);
    if (kind == "numerical") {
      f.kind = FeatureKind::numerical;
    } else if (kind == "categorical") {
      f.kind = FeatureKind::categorical;
      f.categories = field<std::vector<std::string>>(jfeatures[i], "categories", where);
    } else {
      throw ParseError(where + ": unknown kind '" + kind + "'");
    }
    const auto mut = field<std::string>(jfeatures[i], "mutability", where);
    if (mut != "hard" && mut != "soft") throw ParseError(where + ": unknown mutability '" + mut + "'");
    f.mutability = mut == "hard" ? Mutability::hard : Mutability::soft;
    features.push_back(std::move(f));
  }

  const json& jtrees = doc.contains("trees") ? doc["trees"] : json();
  if (!jtrees.is_array()) throw ParseError("model: 'trees' must be an array");
  std::vector<DecisionTree> trees;
  std::vector<double> weights;
  for (std::size_t t = 0; t < jtrees.size(); ++t) {
    const std::string where = "trees[" + std::to_string(t) + "]";
    weights.push_back(field<double>(jtrees[t], "weight", where));
    const json& jnodes = jtrees[t].contains("nodes") ? jtrees[t]["nodes"] : json();
    if (!jnodes.is_array()) throw ParseError(where + ": 'nodes' must be an array");
    std::vector<TreeNode> nodes;
    for (std::size_t k = 0; k < jnodes.size(); ++k) {
      const std::string nwhere = node_path(t, k);
      const json& jn = jnodes[k];
      if (jn.is_object() && jn.contains("leaf")) {
        const auto name = field<std::string>(jn, "leaf", nwhere);
        auto it = std::find(classes.begin(), classes.end(), name);
        if (it == classes.end())
          throw ParseError(nwhere + ": leaf label '" + name + "' is not in the class domain");
        nodes.push_back(TreeNode::leaf(static_cast<Label>(it - classes.begin())));
        continue;
      }
      const auto f = field<std::size_t>(jn, "feature", nwhere);
      const auto left = field<std::size_t>(jn, "left", nwhere);
      const auto right = field<std::size_t>(jn, "right", nwhere);
      if (f >= features.size()) throw ParseError(nwhere + ": feature index out of range");
      if (features[f].categorical()) {
        std::vector<std::size_t> subset;
        for (const auto& name : field<std::vector<std::string>>(jn, "categories", nwhere)) {
          const auto& cats = features[f].categories;
          auto it = std::find(cats.begin(), cats.end(), name);
          if (it == cats.end())
            throw ParseError(nwhere + ": category '" + name + "' not in the domain of '" +
                             features[f].name + "'");
          subset.push_back(static_cast<std::size_t>(it - cats.begin()));
        }
        nodes.push_back(TreeNode::categorical_split(f, std::move(subset), left, right));
      } else {
        nodes.push_back(
            TreeNode::numerical_split(f, field<double>(jn, "threshold", nwhere), left, right));
      }
    }
    trees.emplace_back(std::move(nodes));
  }
  try {
    return RandomForest(std::move(classes), std::move(features), std::move(trees), std::move(weights));
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

void save_forest(const RandomForest& forest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << forest_to_json(forest).dump(1) << '\n';
}

RandomForest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return forest_from_json(doc);
}

std::string forest_fingerprint(const RandomForest& forest) {
  const std::string canon = forest_to_json(forest).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

}  // namespace soap
