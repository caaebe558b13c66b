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

#ifndef PERCEPTIQ_FOREST_HPP_
#define PERCEPTIQ_FOREST_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace perceptiq {

struct ForestParams {
  int trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_leaf = 5;
  std::uint64_t seed = 1;
  bool bootstrap = true;
  // Candidate features per node; 0 = floor(sqrt(n_features)).
  int features_per_split = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean

  bool IsLeaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// CART regression tree stored as a flat node array; node 0 is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double Predict(std::span<const double> x) const;
  bool operator==(const RegressionTree&) const = default;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  int n_features = 0;
  ForestParams params;
};

struct TrainingSet {
  std::vector<std::vector<double>> features;
  std::vector<double> targets;
};

// Bagged CART regression trees with variance-reduction splits. Each tree gets
// its own seed drawn from params.seed, so the result does not depend on the
// number of workers.
ForestModel TrainForest(const TrainingSet& data, const ForestParams& params,
                        int workers = 1);

// Mean of the per-tree predictions.
double PredictForest(const ForestModel& model, std::span<const double> x);

inline constexpr int kForestModelVersion = 1;

std::string SerializeForest(const ForestModel& model);
ForestModel ParseForest(const std::string& text);
void SaveForest(const ForestModel& model, const std::string& path);
ForestModel LoadForest(const std::string& path);

// CSV rows of features followed by the target. A first line that does not
// parse as numbers is treated as a header.
TrainingSet ReadTrainingCsv(const std::string& path);
TrainingSet ParseTrainingCsv(const std::string& text);

}  // namespace perceptiq

#endif  // PERCEPTIQ_FOREST_HPP_
