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

#ifndef PERCEPTIQ_NSS_HPP_
#define PERCEPTIQ_NSS_HPP_

// Natural scene statistics: MSCN coefficients, sharpness-gated patch
// selection, GGD/AGGD moment fits and the 18-parameter patch feature.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "perceptiq/image.hpp"

namespace perceptiq {

enum class WindowWeighting { kGaussian, kBox };

// Normalized window x window weights, row-major. The Gaussian variant uses a
// standard deviation of window / 6.
std::vector<double> WindowWeights(int window, WindowWeighting weighting);

struct MscnField {
  int width = 0;
  int height = 0;
  std::vector<double> intensity;  // I(i, j), the stored source luminance
  std::vector<double> mu;         // local weighted mean
  std::vector<double> sigma;      // local weighted standard deviation
  std::vector<double> coeff;      // (I - mu) / (sigma + 1)

  std::size_t Index(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

// Local statistics use a window x window neighbourhood with mirror padding.
MscnField ComputeMscn(const GrayImage& image, int window,
                      WindowWeighting weighting = WindowWeighting::kGaussian);

// Recomputes intensity, mu, sigma and coeff of `field` for pixels in
// [x0, x1] x [y0, y1] from `image`. `weights` comes from WindowWeights().
// Produces exactly the values ComputeMscn would.
void UpdateMscnRegion(const GrayImage& image, int window, std::span<const double> weights,
                      int x0, int y0, int x1, int y1, MscnField& field);

struct TileOrigin {
  int x = 0;
  int y = 0;
  bool operator==(const TileOrigin&) const = default;
};

// Sum of sigma over one patch x patch tile.
double TileSigmaSum(const MscnField& field, TileOrigin origin, int patch);

// Sum of sigma over each non-overlapping patch x patch tile, row-major.
// Trailing rows and columns that do not fill a tile are ignored.
std::vector<double> TileSharpness(const MscnField& field, int patch);

// Tiles whose sharpness exceeds threshold_fraction * (max tile sharpness).
// Throws kInsufficientTexture when nothing passes.
std::vector<TileOrigin> SelectPatches(const MscnField& field, int patch,
                                      double threshold_fraction);

// Same rule on precomputed row-major tile sharpness; returns tile indices.
std::vector<std::size_t> SelectTiles(std::span<const double> sharpness,
                                     double threshold_fraction);

struct GgdParams {
  double alpha = 0.0;  // shape
  double beta = 0.0;   // scale
  bool clamped = false;  // moment ratio fell outside the shape grid
};

struct AggdParams {
  double gamma = 0.0;
  double beta_l = 0.0;
  double beta_r = 0.0;
  double eta = 0.0;
  bool clamped = false;
};

// Shape grid for moment matching: alpha_k = 0.2 + 0.001 k up to 10 and the
// ratio rho(alpha) = G(1/a) G(3/a) / G(2/a)^2, which is strictly decreasing.
class ShapeGrid {
 public:
  static const ShapeGrid& Instance();

  std::size_t size() const { return alphas_.size(); }
  double alpha(std::size_t k) const { return alphas_[k]; }
  double ratio(std::size_t k) const { return ratios_[k]; }

  // Grid shape whose ratio is nearest to `ratio`. Ratios beyond either end
  // resolve to that end and set *clamped.
  double Solve(double ratio, bool* clamped = nullptr) const;

  static double Ratio(double alpha);

  // Process-wide count of Solve calls that clamped; diagnostics only.
  static std::uint64_t ClampCount();

 private:
  ShapeGrid();

  std::vector<double> alphas_;
  std::vector<double> ratios_;
};

inline constexpr std::size_t kMinFitSamples = 16;

GgdParams FitGgd(std::span<const double> samples);
AggdParams FitAggd(std::span<const double> samples);

// eta = (beta_l - beta_r) G(2/gamma) / G(1/gamma).
double AggdMean(double gamma, double beta_l, double beta_r);

// Neighbour offsets (dx, dy) for the pairwise products, in feature order:
// horizontal, vertical, main diagonal, anti-diagonal.
inline constexpr std::array<std::array<int, 2>, 4> kOrientationOffsets = {{
    {1, 0}, {0, 1}, {1, 1}, {-1, 1}}};

struct PatchFeature {
  static constexpr int kSize = 18;

  GgdParams ggd;
  std::array<AggdParams, 4> aggd;  // H, V, D1, D2

  // [alpha, beta, then gamma, beta_l, beta_r, eta per orientation]
  std::array<double, kSize> Flatten() const;
};

// GGD fit of the tile's coefficients plus AGGD fits of the four neighbour
// products. Pairs are formed only inside the tile.
PatchFeature ComputePatchFeature(const MscnField& field, TileOrigin origin,
                                 int patch);

// Products c(x, y) * c(x + dx, y + dy) for every pair inside the tile.
std::vector<double> PairwiseProducts(const MscnField& field, TileOrigin origin,
                                     int patch, int orientation);

}  // namespace perceptiq

#endif  // PERCEPTIQ_NSS_HPP_
