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

#ifndef PERCEPTIQ_MSD_HPP_
#define PERCEPTIQ_MSD_HPP_

// Spatial-discontinuity features: singular value spectra of non-overlapping
// image tiles.

#include <span>
#include <vector>

#include "perceptiq/forest.hpp"
#include "perceptiq/image.hpp"

namespace perceptiq {

// Singular values of a row-major rows x cols matrix, descending. One-sided
// Jacobi rotations on the columns.
std::vector<double> SingularValues(std::span<const double> matrix, int rows, int cols);

struct MsdFeature {
  int grid_rows = 0;
  int grid_cols = 0;
  int patch = 0;
  std::vector<double> flat;    // per-tile spectra, row-major tile order
  std::vector<double> pooled;  // mean spectrum over tiles

  int tile_count() const { return grid_rows * grid_cols; }
  std::span<const double> tile(int index) const {
    return std::span<const double>(flat).subspan(static_cast<std::size_t>(index) * patch,
                                                 patch);
  }
};

inline constexpr int kDefaultMsdPatch = 32;

MsdFeature ComputeMsdFeature(const GrayImage& image, int patch = kDefaultMsdPatch);

// Spectrum of the tile at grid position (tx, ty).
std::vector<double> TileSpectrum(const GrayImage& image, int tx, int ty, int patch);

// Recomputes `pooled` from `flat`.
void PoolSpectra(MsdFeature& feature);

// sum_i (sr_i - hr_i)^2 over the concatenated spectra.
double MsdFeatureLoss(const MsdFeature& sr, const MsdFeature& hr);

// Mean over tiles of the singular values with index >= patch / 2.
double SpectralTailMass(const MsdFeature& feature);

// Forest prediction on the pooled spectrum, clamped to [0, 10].
double MaScore(const GrayImage& image, const ForestModel& model,
               int patch = kDefaultMsdPatch);
double MaScore(const MsdFeature& feature, const ForestModel& model);

}  // namespace perceptiq

#endif  // PERCEPTIQ_MSD_HPP_
