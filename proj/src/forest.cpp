// Copyright 2026 The PerceptIQ Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "perceptiq/forest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "perceptiq/error.hpp"
#include "perceptiq/parallel.hpp"

namespace perceptiq {

namespace {

using nlohmann::json;

constexpr char kForestFormat[] = "perceptiq-forest";

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, const ForestParams& params, int features_per_split,
              std::uint64_t seed)
      : data_(data), params_(params), mtry_(features_per_split), rng_(seed) {}

  RegressionTree Build() {
    const std::size_t n = data_.targets.size();
    std::vector<std::size_t> rows(n);
    if (params_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng_);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    RegressionTree tree;
    nodes_ = &tree.nodes;
    Grow(rows, 0);
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int Grow(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(nodes_->size());
    nodes_->emplace_back();

    double sum = 0.0;
    for (auto r : rows) sum += data_.targets[r];
    const double mean = sum / static_cast<double>(rows.size());
    (*nodes_)[id].value = mean;

    const bool depth_capped = params_.max_depth > 0 && depth >= params_.max_depth;
    const bool too_small = rows.size() < 2 * static_cast<std::size_t>(params_.min_leaf);
    const bool pure = std::all_of(rows.begin(), rows.end(), [&](std::size_t r) {
      return data_.targets[r] == data_.targets[rows.front()];
    });
    if (depth_capped || too_small || pure) return id;

    const Split split = FindSplit(rows, sum);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_.features[r][split.feature] <= split.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int l = Grow(left, depth + 1);
    const int r = Grow(right, depth + 1);
    TreeNode& node = (*nodes_)[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Samples candidate features without replacement. Constant features do not
  // count towards the mtry budget, and the search keeps drawing past the budget
  // until some candidate yields a positive variance reduction.
  Split FindSplit(const std::vector<std::size_t>& rows, double total) {
    const int n_features = static_cast<int>(data_.features.front().size());
    std::vector<int> order(n_features);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);

    const std::size_t n = rows.size();
    const std::size_t min_leaf = static_cast<std::size_t>(params_.min_leaf);
    const double base = total * total / static_cast<double>(n);
    Split best;
    int evaluated = 0;
    std::vector<std::pair<double, double>> xy(n);
    for (int f : order) {
      if (evaluated >= mtry_ && best.feature >= 0) break;
      for (std::size_t i = 0; i < n; ++i) {
        xy[i] = {data_.features[rows[i]][f], data_.targets[rows[i]]};
      }
      std::sort(xy.begin(), xy.end());
      if (xy.front().first == xy.back().first) continue;
      ++evaluated;
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += xy[i].second;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        if (xy[i].first == xy[i + 1].first) continue;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - base;
        if (gain > best.gain) {
          double thr = xy[i].first + 0.5 * (xy[i + 1].first - xy[i].first);
          if (!(thr < xy[i + 1].first)) thr = xy[i].first;
          best = {f, thr, gain};
        }
      }
    }
    return best;
  }

  const TrainingSet& data_;
  const ForestParams& params_;
  int mtry_;
  std::mt19937_64 rng_;
  std::vector<TreeNode>* nodes_ = nullptr;
};

void ValidateTrainingSet(const TrainingSet& data) {
  if (data.features.size() != data.targets.size()) {
    throw Error(ErrorCode::kInvalidArgument, "feature and target counts differ");
  }
  if (data.targets.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "forest training needs at least 2 rows");
  }
  const std::size_t width = data.features.front().size();
  if (width == 0) throw Error(ErrorCode::kInvalidArgument, "rows have no features");
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    if (data.features[i].size() != width) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "row " + std::to_string(i) + " has " +
                      std::to_string(data.features[i].size()) + " features, expected " +
                      std::to_string(width));
    }
    for (double v : data.features[i]) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kInvalidArgument, "non-finite feature in row " + std::to_string(i));
      }
    }
    if (!std::isfinite(data.targets[i])) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite target in row " + std::to_string(i));
    }
  }
}

json NodeToJson(const RegressionTree& tree, int id) {
  const TreeNode& node = tree.nodes[id];
  if (node.IsLeaf()) return json{{"leaf", node.value}};
  json j;
  j["feature"] = node.feature;
  j["threshold"] = node.threshold;
  j["value"] = node.value;
  j["left"] = NodeToJson(tree, node.left);
  j["right"] = NodeToJson(tree, node.right);
  return j;
}

int NodeFromJson(const json& j, int n_features, RegressionTree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    tree.nodes[id].value = j.at("leaf").get<double>();
    return id;
  }
  const int feature = j.at("feature").get<int>();
  if (feature < 0 || feature >= n_features) {
    throw Error(ErrorCode::kFormat, "split feature index out of range");
  }
  const double threshold = j.at("threshold").get<double>();
  const double value = j.at("value").get<double>();
  const int l = NodeFromJson(j.at("left"), n_features, tree);
  const int r = NodeFromJson(j.at("right"), n_features, tree);
  TreeNode& node = tree.nodes[id];
  node.feature = feature;
  node.threshold = threshold;
  node.value = value;
  node.left = l;
  node.right = r;
  return id;
}

bool ParseNumber(std::string_view s, double& out) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

double RegressionTree::Predict(std::span<const double> x) const {
  int id = 0;
  while (!nodes[id].IsLeaf()) {
    const TreeNode& node = nodes[id];
    id = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[id].value;
}

ForestModel TrainForest(const TrainingSet& data, const ForestParams& params, int workers) {
  ValidateTrainingSet(data);
  if (params.trees < 1) throw Error(ErrorCode::kInvalidArgument, "tree count must be >= 1");
  if (params.min_leaf < 1) throw Error(ErrorCode::kInvalidArgument, "min leaf must be >= 1");
  if (params.max_depth < 0) throw Error(ErrorCode::kInvalidArgument, "max depth must be >= 0");
  if (params.features_per_split < 0) {
    throw Error(ErrorCode::kInvalidArgument, "features per split must be >= 0");
  }
  const int n_features = static_cast<int>(data.features.front().size());
  const int mtry = params.features_per_split > 0
                       ? std::min(params.features_per_split, n_features)
                       : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n_features))));

  std::mt19937_64 seeder(params.seed);
  std::vector<std::uint64_t> seeds(params.trees);
  for (auto& s : seeds) s = seeder();

  ForestModel model;
  model.n_features = n_features;
  model.params = params;
  model.trees.resize(params.trees);
  ParallelFor(seeds.size(), workers, [&](std::size_t t) {
    model.trees[t] = TreeBuilder(data, params, mtry, seeds[t]).Build();
  });
  return model;
}

double PredictForest(const ForestModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.n_features) {
    throw Error(ErrorCode::kDimensionMismatch,
                "forest expects " + std::to_string(model.n_features) + " features, got " +
                    std::to_string(x.size()));
  }
  if (model.trees.empty()) throw Error(ErrorCode::kInvalidArgument, "forest has no trees");
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.Predict(x);
  return sum / static_cast<double>(model.trees.size());
}

std::string SerializeForest(const ForestModel& model) {
  json j;
  j["format"] = kForestFormat;
  j["format_version"] = kForestModelVersion;
  j["n_features"] = model.n_features;
  j["params"] = {{"trees", model.params.trees},
                 {"max_depth", model.params.max_depth},
                 {"min_leaf", model.params.min_leaf},
                 {"seed", model.params.seed},
                 {"bootstrap", model.params.bootstrap},
                 {"features_per_split", model.params.features_per_split}};
  json trees = json::array();
  for (const auto& tree : model.trees) trees.push_back(NodeToJson(tree, 0));
  j["trees"] = std::move(trees);
  return j.dump() + "\n";
}

ForestModel ParseForest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("forest file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kForestFormat) {
      throw Error(ErrorCode::kFormat, "not a forest file");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kForestModelVersion) {
      throw Error(ErrorCode::kConfigMismatch,
                  "unsupported forest format_version " + std::to_string(version));
    }
    ForestModel m;
    m.n_features = j.at("n_features").get<int>();
    if (m.n_features < 1) throw Error(ErrorCode::kFormat, "n_features must be >= 1");
    const json& p = j.at("params");
    m.params.trees = p.at("trees").get<int>();
    m.params.max_depth = p.at("max_depth").get<int>();
    m.params.min_leaf = p.at("min_leaf").get<int>();
    m.params.seed = p.at("seed").get<std::uint64_t>();
    m.params.bootstrap = p.at("bootstrap").get<bool>();
    m.params.features_per_split = p.at("features_per_split").get<int>();
    for (const json& t : j.at("trees")) {
      RegressionTree tree;
      NodeFromJson(t, m.n_features, tree);
      m.trees.push_back(std::move(tree));
    }
    if (m.trees.empty()) throw Error(ErrorCode::kFormat, "forest has no trees");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("malformed forest file: ") + e.what());
  }
}

void SaveForest(const ForestModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << SerializeForest(model);
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

ForestModel LoadForest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseForest(ss.str());
}

TrainingSet ParseTrainingCsv(const std::string& text) {
  TrainingSet set;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> values;
    bool numeric = true;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string_view cell =
          std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                          : comma - start);
      double v = 0.0;
      if (!ParseNumber(cell, v)) {
        numeric = false;
        break;
      }
      values.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": non-numeric cell");
    }
    first = false;
    if (values.size() < 2) {
      throw Error(ErrorCode::kFormat,
                  "line " + std::to_string(line_no) + ": need features and a score");
    }
    if (!set.features.empty() && values.size() != set.features.front().size() + 1) {
      throw Error(ErrorCode::kFormat, "line " + std::to_string(line_no) + ": has " +
                                          std::to_string(values.size()) + " columns, expected " +
                                          std::to_string(set.features.front().size() + 1));
    }
    set.targets.push_back(values.back());
    values.pop_back();
    set.features.push_back(std::move(values));
  }
  if (set.targets.empty()) throw Error(ErrorCode::kFormat, "training CSV has no data rows");
  return set;
}

TrainingSet ReadTrainingCsv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseTrainingCsv(ss.str());
}

}  // namespace perceptiq
