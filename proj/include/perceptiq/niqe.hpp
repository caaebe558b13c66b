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

#ifndef PERCEPTIQ_NIQE_HPP_
#define PERCEPTIQ_NIQE_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "perceptiq/image.hpp"
#include "perceptiq/nss.hpp"

namespace perceptiq {

// Feature extraction settings. Two models may only be compared when these
// match exactly.
struct NiqeConfig {
  int patch = 96;
  int window = 7;
  double threshold_fraction = 0.75;
  WindowWeighting weighting = WindowWeighting::kGaussian;
  // 1: the 18 single-scale parameters. 2: also the half-resolution image,
  // 36 parameters per patch.
  int scales = 1;

  int FeatureDim() const { return PatchFeature::kSize * scales; }
  void Validate() const;
  bool operator==(const NiqeConfig&) const = default;
};

using FeatureRow = std::vector<double>;

// Multivariate Gaussian over patch features.
struct MvgModel {
  int dim = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  NiqeConfig config;
  std::string corpus_note;
  long patch_count = 0;
};

// Sample mean and (N - 1)-normalized covariance. Needs >= 2 rows.
MvgModel FitMvg(const std::vector<FeatureRow>& features);

// Ridge added to the pooled covariance: 1e-6 * trace / dim, or 1e-6 when the
// trace is zero.
double PooledRidge(const Eigen::MatrixXd& pooled);

// sqrt(dv^T ((S_n + S_t) / 2 + lambda I)^-1 dv), dv = mean_n - mean_t.
double MvgDistance(const MvgModel& natural, const MvgModel& test);

// Per-patch feature rows of one image under `config`, in row-major tile order.
std::vector<FeatureRow> ExtractFeatures(const GrayImage& image, const NiqeConfig& config);

MvgModel FitNaturalModel(const std::vector<GrayImage>& corpus, const NiqeConfig& config,
                         const std::string& corpus_note = "", int workers = 1);
MvgModel FitNaturalModel(const std::vector<std::string>& paths, const NiqeConfig& config,
                         const std::string& corpus_note = "", int workers = 1);

// Distance between `natural` and an MVG fitted to already-extracted rows.
double NiqeFromRows(const std::vector<FeatureRow>& rows, const MvgModel& natural);

double NiqeScore(const GrayImage& image, const MvgModel& natural);

inline constexpr int kNiqeModelVersion = 1;

std::string SerializeModel(const MvgModel& model);
MvgModel ParseModel(const std::string& text);
void SaveModel(const MvgModel& model, const std::string& path);
MvgModel LoadModel(const std::string& path);

}  // namespace perceptiq

#endif  // PERCEPTIQ_NIQE_HPP_
