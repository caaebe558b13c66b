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

#include "perceptiq/nss.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "perceptiq/error.hpp"

namespace perceptiq {

std::vector<double> WindowWeights(int window, WindowWeighting weighting) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "window must be a positive odd size");
  }
  const int radius = window / 2;
  std::vector<double> w(static_cast<std::size_t>(window) * window, 1.0);
  if (weighting == WindowWeighting::kGaussian) {
    const double s = window / 6.0;
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        w[(dy + radius) * window + (dx + radius)] =
            std::exp(-(dx * dx + dy * dy) / (2.0 * s * s));
      }
    }
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

MscnField ComputeMscn(const GrayImage& image, int window, WindowWeighting weighting) {
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "MSCN window must be odd and >= 3");
  }
  if (window > std::min(image.width(), image.height())) {
    throw Error(ErrorCode::kInvalidArgument, "MSCN window larger than image");
  }
  MscnField f;
  f.width = image.width();
  f.height = image.height();
  f.intensity.resize(image.size());
  f.mu.resize(image.size());
  f.sigma.resize(image.size());
  f.coeff.resize(image.size());
  const std::vector<double> weights = WindowWeights(window, weighting);
  UpdateMscnRegion(image, window, weights, 0, 0, f.width - 1, f.height - 1, f);
  return f;
}

void UpdateMscnRegion(const GrayImage& image, int window, std::span<const double> weights,
                      int x0, int y0, int x1, int y1, MscnField& field) {
  const int w = image.width();
  const int h = image.height();
  const int radius = window / 2;
  std::vector<double> neighbourhood(weights.size());
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const bool interior = x >= radius && y >= radius && x + radius < w && y + radius < h;
      double* dst = neighbourhood.data();
      for (int ky = -radius; ky <= radius; ++ky) {
        if (interior) {
          auto src = image.row(y + ky).subspan(x - radius, window);
          dst = std::copy(src.begin(), src.end(), dst);
        } else {
          const int sy = FoldIndex(y + ky, h);
          for (int kx = -radius; kx <= radius; ++kx) *dst++ = image(FoldIndex(x + kx, w), sy);
        }
      }
      // Offsets from the centre keep flat windows at exactly zero variance.
      const double anchor = image(x, y);
      double mean = 0.0;
      for (std::size_t k = 0; k < weights.size(); ++k) {
        mean += weights[k] * (neighbourhood[k] - anchor);
      }
      mean += anchor;
      double var = 0.0;
      for (std::size_t k = 0; k < weights.size(); ++k) {
        const double d = neighbourhood[k] - mean;
        var += weights[k] * d * d;
      }
      const std::size_t i = field.Index(x, y);
      field.intensity[i] = image(x, y);
      field.mu[i] = mean;
      field.sigma[i] = std::sqrt(var);
      field.coeff[i] = (field.intensity[i] - mean) / (field.sigma[i] + 1.0);
    }
  }
}

double TileSigmaSum(const MscnField& field, TileOrigin origin, int patch) {
  double sum = 0.0;
  for (int y = origin.y; y < origin.y + patch; ++y) {
    for (int x = origin.x; x < origin.x + patch; ++x) sum += field.sigma[field.Index(x, y)];
  }
  return sum;
}

std::vector<double> TileSharpness(const MscnField& field, int patch) {
  if (patch < 1 || patch > std::min(field.width, field.height)) {
    throw Error(ErrorCode::kInvalidArgument, "patch size does not fit the image");
  }
  const int cols = field.width / patch;
  const int rows = field.height / patch;
  std::vector<double> sharpness;
  sharpness.reserve(static_cast<std::size_t>(rows) * cols);
  for (int ty = 0; ty < rows; ++ty) {
    for (int tx = 0; tx < cols; ++tx) {
      sharpness.push_back(TileSigmaSum(field, {tx * patch, ty * patch}, patch));
    }
  }
  return sharpness;
}

std::vector<std::size_t> SelectTiles(std::span<const double> sharpness,
                                     double threshold_fraction) {
  if (!(threshold_fraction >= 0.0 && threshold_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold fraction must be in [0, 1]");
  }
  if (sharpness.empty()) throw Error(ErrorCode::kInvalidArgument, "no tiles");
  const double peak = *std::max_element(sharpness.begin(), sharpness.end());
  const double cut = threshold_fraction * peak;
  std::vector<std::size_t> kept;
  for (std::size_t t = 0; t < sharpness.size(); ++t) {
    if (sharpness[t] > cut) kept.push_back(t);
  }
  if (kept.empty()) {
    throw Error(ErrorCode::kInsufficientTexture, "no patch passes the sharpness threshold");
  }
  return kept;
}

std::vector<TileOrigin> SelectPatches(const MscnField& field, int patch,
                                      double threshold_fraction) {
  const std::vector<double> sharpness = TileSharpness(field, patch);
  const int cols = field.width / patch;
  std::vector<TileOrigin> kept;
  for (std::size_t t : SelectTiles(sharpness, threshold_fraction)) {
    kept.push_back({static_cast<int>(t % cols) * patch, static_cast<int>(t / cols) * patch});
  }
  return kept;
}

namespace {
std::atomic<std::uint64_t> clamp_count{0};
}  // namespace

std::uint64_t ShapeGrid::ClampCount() {
  return clamp_count.load(std::memory_order_relaxed);
}

ShapeGrid::ShapeGrid() {
  constexpr int kSteps = 9800;  // (10 - 0.2) / 0.001
  alphas_.resize(kSteps + 1);
  ratios_.resize(kSteps + 1);
  for (int k = 0; k <= kSteps; ++k) {
    alphas_[k] = 0.2 + 0.001 * k;
    ratios_[k] = Ratio(alphas_[k]);
  }
}

const ShapeGrid& ShapeGrid::Instance() {
  static const ShapeGrid grid;
  return grid;
}

double ShapeGrid::Ratio(double alpha) {
  const double g2 = std::tgamma(2.0 / alpha);
  return std::tgamma(1.0 / alpha) * std::tgamma(3.0 / alpha) / (g2 * g2);
}

double ShapeGrid::Solve(double ratio, bool* clamped) const {
  // ratios_ is strictly decreasing in k.
  const bool outside = ratio > ratios_.front() || ratio < ratios_.back();
  if (clamped) *clamped = outside;
  if (outside) clamp_count.fetch_add(1, std::memory_order_relaxed);
  auto it = std::lower_bound(ratios_.begin(), ratios_.end(), ratio, std::greater<>());
  if (it == ratios_.begin()) return alphas_.front();
  if (it == ratios_.end()) return alphas_.back();
  const std::size_t k = static_cast<std::size_t>(it - ratios_.begin());
  // ratios_[k] <= ratio < ratios_[k - 1]
  return (ratio - ratios_[k] <= ratios_[k - 1] - ratio) ? alphas_[k] : alphas_[k - 1];
}

GgdParams FitGgd(std::span<const double> samples) {
  if (samples.size() < kMinFitSamples) {
    throw Error(ErrorCode::kDegenerateSamples, "GGD fit needs at least 16 samples");
  }
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (double x : samples) {
    abs_sum += std::abs(x);
    sq_sum += x * x;
  }
  if (sq_sum == 0.0) {
    throw Error(ErrorCode::kDegenerateSamples, "GGD fit on all-zero samples");
  }
  const double n = static_cast<double>(samples.size());
  const double mean_abs = abs_sum / n;
  const double r = mean_abs * mean_abs / (sq_sum / n);
  GgdParams p;
  p.alpha = ShapeGrid::Instance().Solve(1.0 / r, &p.clamped);
  p.beta = mean_abs * std::tgamma(1.0 / p.alpha) / std::tgamma(2.0 / p.alpha);
  return p;
}

double AggdMean(double gamma, double beta_l, double beta_r) {
  return (beta_l - beta_r) * std::tgamma(2.0 / gamma) / std::tgamma(1.0 / gamma);
}

AggdParams FitAggd(std::span<const double> samples) {
  if (samples.size() < kMinFitSamples) {
    throw Error(ErrorCode::kDegenerateSamples, "AGGD fit needs at least 16 samples");
  }
  double left_sq = 0.0;
  double right_sq = 0.0;
  double abs_sum = 0.0;
  std::size_t left_n = 0;
  std::size_t right_n = 0;
  for (double x : samples) {
    if (x < 0.0) {
      left_sq += x * x;
      ++left_n;
    } else if (x > 0.0) {
      right_sq += x * x;
      ++right_n;
    }
    abs_sum += std::abs(x);
  }
  if (left_n == 0 || right_n == 0) {
    throw Error(ErrorCode::kDegenerateSamples,
                "AGGD fit needs both negative and positive samples");
  }
  const double n = static_cast<double>(samples.size());
  const double sigma_l = std::sqrt(left_sq / static_cast<double>(left_n));
  const double sigma_r = std::sqrt(right_sq / static_cast<double>(right_n));
  const double g = sigma_l / sigma_r;
  const double mean_abs = abs_sum / n;
  const double r_hat = mean_abs * mean_abs / ((left_sq + right_sq) / n);
  const double r_norm = r_hat * (g * g * g + 1.0) * (g + 1.0) /
                        ((g * g + 1.0) * (g * g + 1.0));

  AggdParams p;
  p.gamma = ShapeGrid::Instance().Solve(1.0 / r_norm, &p.clamped);
  const double scale = std::sqrt(std::tgamma(1.0 / p.gamma) / std::tgamma(3.0 / p.gamma));
  p.beta_l = sigma_l * scale;
  p.beta_r = sigma_r * scale;
  p.eta = AggdMean(p.gamma, p.beta_l, p.beta_r);
  return p;
}

std::array<double, PatchFeature::kSize> PatchFeature::Flatten() const {
  std::array<double, kSize> v{};
  v[0] = ggd.alpha;
  v[1] = ggd.beta;
  for (int o = 0; o < 4; ++o) {
    v[2 + 4 * o + 0] = aggd[o].gamma;
    v[2 + 4 * o + 1] = aggd[o].beta_l;
    v[2 + 4 * o + 2] = aggd[o].beta_r;
    v[2 + 4 * o + 3] = aggd[o].eta;
  }
  return v;
}

std::vector<double> PairwiseProducts(const MscnField& field, TileOrigin origin,
                                     int patch, int orientation) {
  const auto [dx, dy] = kOrientationOffsets.at(orientation);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(patch) * patch);
  for (int y = origin.y; y < origin.y + patch; ++y) {
    const int ny = y + dy;
    if (ny >= origin.y + patch) continue;
    for (int x = origin.x; x < origin.x + patch; ++x) {
      const int nx = x + dx;
      if (nx < origin.x || nx >= origin.x + patch) continue;
      out.push_back(field.coeff[field.Index(x, y)] * field.coeff[field.Index(nx, ny)]);
    }
  }
  return out;
}

PatchFeature ComputePatchFeature(const MscnField& field, TileOrigin origin, int patch) {
  if (patch < 2 || origin.x < 0 || origin.y < 0 || origin.x + patch > field.width ||
      origin.y + patch > field.height) {
    throw Error(ErrorCode::kInvalidArgument, "patch does not fit inside the field");
  }
  std::vector<double> coeffs;
  coeffs.reserve(static_cast<std::size_t>(patch) * patch);
  for (int y = origin.y; y < origin.y + patch; ++y) {
    for (int x = origin.x; x < origin.x + patch; ++x) {
      coeffs.push_back(field.coeff[field.Index(x, y)]);
    }
  }
  PatchFeature feature;
  feature.ggd = FitGgd(coeffs);
  for (int o = 0; o < 4; ++o) {
    feature.aggd[o] = FitAggd(PairwiseProducts(field, origin, patch, o));
  }
  return feature;
}

}  // namespace perceptiq
