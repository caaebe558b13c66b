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

#include "perceptiq/niqe.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "perceptiq/error.hpp"
#include "perceptiq/parallel.hpp"

namespace perceptiq {

namespace {

using nlohmann::json;

constexpr char kModelFormat[] = "perceptiq-niqe-model";

GrayImage HalfResolution(const GrayImage& image) {
  const int w = image.width() / 2;
  const int h = image.height() / 2;
  if (w < 1 || h < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image too small for a second scale");
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(x, y) = 0.25 * (image(2 * x, 2 * y) + image(2 * x + 1, 2 * y) +
                          image(2 * x, 2 * y + 1) + image(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

std::vector<FeatureRow> PooledFeatures(
    std::size_t count, int workers,
    const std::function<std::vector<FeatureRow>(std::size_t)>& extract) {
  std::vector<std::vector<FeatureRow>> per_image(count);
  ParallelFor(count, workers, [&](std::size_t i) { per_image[i] = extract(i); });
  std::vector<FeatureRow> rows;
  for (auto& image_rows : per_image) {
    for (auto& r : image_rows) rows.push_back(std::move(r));
  }
  return rows;
}

MvgModel FitPooled(std::vector<FeatureRow> rows, const NiqeConfig& config,
                   const std::string& note) {
  if (rows.size() < 2) {
    throw Error(ErrorCode::kInsufficientTexture,
                "corpus yields " + std::to_string(rows.size()) +
                    " selected patches, need at least 2");
  }
  MvgModel model = FitMvg(rows);
  model.config = config;
  model.corpus_note = note;
  return model;
}

const char* WeightingName(WindowWeighting w) {
  return w == WindowWeighting::kGaussian ? "gaussian" : "box";
}

WindowWeighting ParseWeighting(const std::string& s) {
  if (s == "gaussian") return WindowWeighting::kGaussian;
  if (s == "box") return WindowWeighting::kBox;
  throw Error(ErrorCode::kFormat, "unknown window weighting '" + s + "'");
}

}  // namespace

void NiqeConfig::Validate() const {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "window must be odd and >= 3");
  }
  if (patch < 2) throw Error(ErrorCode::kInvalidArgument, "patch must be >= 2");
  if (!(threshold_fraction >= 0.0 && threshold_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold fraction must be in [0, 1]");
  }
  if (scales != 1 && scales != 2) {
    throw Error(ErrorCode::kInvalidArgument, "scales must be 1 or 2");
  }
  if (scales == 2 && (patch % 2 != 0 || patch < 8)) {
    throw Error(ErrorCode::kInvalidArgument, "two-scale features need an even patch >= 8");
  }
}

MvgModel FitMvg(const std::vector<FeatureRow>& features) {
  if (features.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "MVG fit needs at least 2 feature vectors");
  }
  const std::size_t dim = features.front().size();
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "empty feature vectors");
  for (const auto& f : features) {
    if (f.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch, "feature vectors differ in length");
    }
  }
  const auto n = static_cast<Eigen::Index>(features.size());
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(features[i].data(), d);
  }
  MvgModel m;
  m.dim = static_cast<int>(dim);
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  m.covariance = (centered.transpose() * centered) / static_cast<double>(n - 1);
  // Exact symmetry; the product above is symmetric only up to rounding.
  m.covariance = 0.5 * (m.covariance + m.covariance.transpose()).eval();
  m.patch_count = n;
  return m;
}

double PooledRidge(const Eigen::MatrixXd& pooled) {
  const double trace = pooled.trace();
  return trace > 0.0 ? 1e-6 * trace / static_cast<double>(pooled.rows()) : 1e-6;
}

double MvgDistance(const MvgModel& natural, const MvgModel& test) {
  if (natural.dim != test.dim || natural.mean.size() != test.mean.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "MVG models differ in dimension");
  }
  if (!(natural.config == test.config)) {
    throw Error(ErrorCode::kConfigMismatch,
                "MVG models were built with different extraction settings");
  }
  Eigen::MatrixXd pooled = 0.5 * (natural.covariance + test.covariance);
  pooled.diagonal().array() += PooledRidge(pooled);
  const Eigen::VectorXd diff = natural.mean - test.mean;
  const Eigen::VectorXd solved = pooled.ldlt().solve(diff);
  const double q = diff.dot(solved);
  if (!std::isfinite(q)) {
    throw Error(ErrorCode::kNumerical, "MVG distance is not finite");
  }
  return std::sqrt(std::max(0.0, q));
}

std::vector<FeatureRow> ExtractFeatures(const GrayImage& image, const NiqeConfig& config) {
  config.Validate();
  if (config.patch > std::min(image.width(), image.height())) {
    throw Error(ErrorCode::kInsufficientTexture,
                "image smaller than one " + std::to_string(config.patch) + "px patch");
  }
  const MscnField field = ComputeMscn(image, config.window, config.weighting);
  const std::vector<TileOrigin> origins =
      SelectPatches(field, config.patch, config.threshold_fraction);

  MscnField half_field;
  if (config.scales == 2) {
    half_field = ComputeMscn(HalfResolution(image), config.window, config.weighting);
  }
  std::vector<FeatureRow> rows;
  rows.reserve(origins.size());
  for (const TileOrigin& o : origins) {
    const auto f = ComputePatchFeature(field, o, config.patch).Flatten();
    FeatureRow row(f.begin(), f.end());
    if (config.scales == 2) {
      const auto g =
          ComputePatchFeature(half_field, {o.x / 2, o.y / 2}, config.patch / 2).Flatten();
      row.insert(row.end(), g.begin(), g.end());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

MvgModel FitNaturalModel(const std::vector<GrayImage>& corpus, const NiqeConfig& config,
                         const std::string& corpus_note, int workers) {
  if (corpus.empty()) throw Error(ErrorCode::kInvalidArgument, "empty corpus");
  config.Validate();
  auto rows = PooledFeatures(corpus.size(), workers, [&](std::size_t i) {
    return ExtractFeatures(corpus[i], config);
  });
  return FitPooled(std::move(rows), config, corpus_note);
}

MvgModel FitNaturalModel(const std::vector<std::string>& paths, const NiqeConfig& config,
                         const std::string& corpus_note, int workers) {
  if (paths.empty()) throw Error(ErrorCode::kInvalidArgument, "empty corpus");
  config.Validate();
  auto rows = PooledFeatures(paths.size(), workers, [&](std::size_t i) {
    return ExtractFeatures(LoadGray(paths[i]), config);
  });
  return FitPooled(std::move(rows), config, corpus_note);
}

double NiqeScore(const GrayImage& image, const MvgModel& natural) {
  return NiqeFromRows(ExtractFeatures(image, natural.config), natural);
}

double NiqeFromRows(const std::vector<FeatureRow>& rows, const MvgModel& natural) {
  if (rows.size() < 2) {
    throw Error(ErrorCode::kInsufficientTexture,
                "only " + std::to_string(rows.size()) + " patch passes the threshold");
  }
  MvgModel test = FitMvg(rows);
  test.config = natural.config;
  return MvgDistance(natural, test);
}

std::string SerializeModel(const MvgModel& model) {
  json j;
  j["format"] = kModelFormat;
  j["format_version"] = kNiqeModelVersion;
  j["dim"] = model.dim;
  j["patch"] = model.config.patch;
  j["window"] = model.config.window;
  j["threshold_fraction"] = model.config.threshold_fraction;
  j["weighting"] = WeightingName(model.config.weighting);
  j["scales"] = model.config.scales;
  j["corpus_note"] = model.corpus_note;
  j["patch_count"] = model.patch_count;
  j["nu"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  json sigma = json::array();
  for (Eigen::Index r = 0; r < model.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < model.covariance.cols(); ++c) {
      row.push_back(model.covariance(r, c));
    }
    sigma.push_back(std::move(row));
  }
  j["sigma"] = std::move(sigma);
  return j.dump(2) + "\n";
}

MvgModel ParseModel(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat) {
      throw Error(ErrorCode::kFormat, "not a NIQE model file");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kNiqeModelVersion) {
      throw Error(ErrorCode::kConfigMismatch,
                  "unsupported model format_version " + std::to_string(version));
    }
    MvgModel m;
    m.dim = j.at("dim").get<int>();
    m.config.patch = j.at("patch").get<int>();
    m.config.window = j.at("window").get<int>();
    m.config.threshold_fraction = j.at("threshold_fraction").get<double>();
    m.config.weighting = ParseWeighting(j.at("weighting").get<std::string>());
    m.config.scales = j.at("scales").get<int>();
    m.config.Validate();
    m.corpus_note = j.at("corpus_note").get<std::string>();
    m.patch_count = j.at("patch_count").get<long>();
    if (m.dim != m.config.FeatureDim()) {
      throw Error(ErrorCode::kFormat, "dim does not match the feature configuration");
    }
    const auto nu = j.at("nu").get<std::vector<double>>();
    const auto sigma = j.at("sigma").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(nu.size()) != m.dim || static_cast<int>(sigma.size()) != m.dim) {
      throw Error(ErrorCode::kFormat, "nu/sigma sizes do not match dim");
    }
    m.mean = Eigen::Map<const Eigen::VectorXd>(nu.data(), m.dim);
    m.covariance.resize(m.dim, m.dim);
    for (int r = 0; r < m.dim; ++r) {
      if (static_cast<int>(sigma[r].size()) != m.dim) {
        throw Error(ErrorCode::kFormat, "sigma is not square");
      }
      for (int c = 0; c < m.dim; ++c) m.covariance(r, c) = sigma[r][c];
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("malformed model file: ") + e.what());
  }
}

void SaveModel(const MvgModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << SerializeModel(model);
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

MvgModel LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseModel(ss.str());
}

}  // namespace perceptiq
