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

#include "perceptiq/msd.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "perceptiq/error.hpp"

namespace perceptiq {

std::vector<double> SingularValues(std::span<const double> matrix, int rows, int cols) {
  if (rows < 1 || cols < 1 ||
      matrix.size() != static_cast<std::size_t>(rows) * cols) {
    throw Error(ErrorCode::kInvalidArgument, "matrix shape does not match data");
  }
  // Work on the orientation with fewer columns; transposing keeps the spectrum.
  const bool transpose = cols > rows;
  const int m = transpose ? cols : rows;  // column length
  const int n = transpose ? rows : cols;  // column count
  std::vector<double> a(static_cast<std::size_t>(m) * n);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = matrix[static_cast<std::size_t>(r) * cols + c];
      if (transpose) {
        a[static_cast<std::size_t>(r) * m + c] = v;
      } else {
        a[static_cast<std::size_t>(c) * m + r] = v;
      }
    }
  }

  // Rounding leaves |gamma| near m * eps * |ap| |aq| after a rotation, so the
  // cutoff has to scale with the column length.
  const double tol = std::max(1e-15, 4.0 * m * std::numeric_limits<double>::epsilon());
  constexpr int kMaxSweeps = 80;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      double* ap = &a[static_cast<std::size_t>(p) * m];
      for (int q = p + 1; q < n; ++q) {
        double* aq = &a[static_cast<std::size_t>(q) * m];
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int i = 0; i < m; ++i) {
          alpha += ap[i] * ap[i];
          beta += aq[i] * aq[i];
          gamma += ap[i] * aq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < m; ++i) {
          const double x = ap[i];
          const double y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sv(n);
  for (int j = 0; j < n; ++j) {
    const double* col = &a[static_cast<std::size_t>(j) * m];
    double norm = 0.0;
    for (int i = 0; i < m; ++i) norm += col[i] * col[i];
    sv[j] = std::sqrt(norm);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

MsdFeature ComputeMsdFeature(const GrayImage& image, int patch) {
  if (patch < 1 || patch > std::min(image.width(), image.height())) {
    throw Error(ErrorCode::kInvalidArgument,
                "MSD patch " + std::to_string(patch) + " does not fit a " +
                    std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                    " image");
  }
  MsdFeature f;
  f.patch = patch;
  f.grid_rows = image.height() / patch;
  f.grid_cols = image.width() / patch;
  f.flat.reserve(static_cast<std::size_t>(f.tile_count()) * patch);
  for (int ty = 0; ty < f.grid_rows; ++ty) {
    for (int tx = 0; tx < f.grid_cols; ++tx) {
      const std::vector<double> sv = TileSpectrum(image, tx, ty, patch);
      f.flat.insert(f.flat.end(), sv.begin(), sv.end());
    }
  }
  PoolSpectra(f);
  return f;
}

std::vector<double> TileSpectrum(const GrayImage& image, int tx, int ty, int patch) {
  std::vector<double> tile(static_cast<std::size_t>(patch) * patch);
  for (int y = 0; y < patch; ++y) {
    auto src = image.row(ty * patch + y).subspan(static_cast<std::size_t>(tx) * patch, patch);
    std::copy(src.begin(), src.end(), tile.begin() + static_cast<std::ptrdiff_t>(y) * patch);
  }
  return SingularValues(tile, patch, patch);
}

void PoolSpectra(MsdFeature& feature) {
  feature.pooled.assign(feature.patch, 0.0);
  for (int t = 0; t < feature.tile_count(); ++t) {
    const auto sv = feature.tile(t);
    for (int k = 0; k < feature.patch; ++k) feature.pooled[k] += sv[k];
  }
  for (double& v : feature.pooled) v /= feature.tile_count();
}

double MsdFeatureLoss(const MsdFeature& sr, const MsdFeature& hr) {
  if (sr.patch != hr.patch || sr.grid_rows != hr.grid_rows ||
      sr.grid_cols != hr.grid_cols || sr.flat.size() != hr.flat.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "MSD features have different shapes");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < sr.flat.size(); ++i) {
    const double d = sr.flat[i] - hr.flat[i];
    sum += d * d;
  }
  return sum;
}

double SpectralTailMass(const MsdFeature& feature) {
  double total = 0.0;
  for (int t = 0; t < feature.tile_count(); ++t) {
    const auto sv = feature.tile(t);
    for (int k = feature.patch / 2; k < feature.patch; ++k) total += sv[k];
  }
  return total / feature.tile_count();
}

double MaScore(const GrayImage& image, const ForestModel& model, int patch) {
  if (model.n_features != patch) {
    throw Error(ErrorCode::kDimensionMismatch,
                "forest expects " + std::to_string(model.n_features) +
                    " features but the MSD patch is " + std::to_string(patch));
  }
  return MaScore(ComputeMsdFeature(image, patch), model);
}

double MaScore(const MsdFeature& feature, const ForestModel& model) {
  if (model.n_features != feature.patch) {
    throw Error(ErrorCode::kDimensionMismatch,
                "forest expects " + std::to_string(model.n_features) +
                    " features but the MSD patch is " + std::to_string(feature.patch));
  }
  return std::clamp(PredictForest(model, feature.pooled), 0.0, 10.0);
}

}  // namespace perceptiq
