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

#ifndef PERCEPTIQ_LOSS_HPP_
#define PERCEPTIQ_LOSS_HPP_

// Composite explicit perceptual loss and a pixel-space finite-difference
// descent that exercises it without a generator network.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "perceptiq/error.hpp"
#include "perceptiq/forest.hpp"
#include "perceptiq/image.hpp"
#include "perceptiq/msd.hpp"
#include "perceptiq/niqe.hpp"

namespace perceptiq {

enum class MaVariant {
  kReference,  // squared distance between MSD spectra of the image and the reference
  kRegressor,  // 10 - Ma score from a trained forest, so lower is better
};

struct LossSpec {
  double w_mse = 0.0;
  double epsilon = 0.0;  // NIQE weight
  double zeta = 0.0;     // Ma weight
  MaVariant ma_variant = MaVariant::kReference;
  // Weight the squared NIQE distance (true) or the distance itself.
  bool niqe_squared = true;

  void Validate() const;
  LossSpec Scaled(double factor) const;
};

// Parses "term:weight[,term:weight...]" with terms mse, niqe, ma-ref and
// ma-forest. vgg, adv and style are recognised but rejected as unimplemented.
LossSpec ParseLossSpec(std::string_view text);

// Weight rows of the 32 loss-combination experiments, numbered 1..32.
struct CombinationWeights {
  double vgg;
  double adv;
  double style;
  double niqe;
  double ma;
};
const CombinationWeights& CombinationRow(int number);

// Loss spec for a combination row: MSE weight 10, NIQE as the plain distance,
// Ma through the reference spectra. Rows that use vgg, adv or style throw
// kNotImplemented.
LossSpec CombinationPreset(int number);

struct LossContext {
  const GrayImage* hr = nullptr;
  const MvgModel* natural = nullptr;
  const ForestModel* forest = nullptr;
  const MsdFeature* hr_msd = nullptr;  // computed from hr when null
  int msd_patch = kDefaultMsdPatch;
};

struct LossBreakdown {
  double total = 0.0;
  // Weighted contributions; total is their sum.
  double mse = 0.0;
  double niqe = 0.0;
  double ma = 0.0;
  // Unweighted values of the active terms.
  double mse_raw = 0.0;
  double niqe_distance = 0.0;
  double ma_raw = 0.0;
};

// total = w_mse * MSE + epsilon * D^2 (or D) + zeta * L_Ma. Terms with zero
// weight are not evaluated and need no inputs.
LossBreakdown CompositeLoss(const GrayImage& image, const LossContext& context,
                            const LossSpec& spec);

// Evaluates CompositeLoss for single-pixel edits of a fixed base image,
// recomputing only the MSCN neighbourhood, NIQE tiles and MSD tile that the
// edited pixel reaches. Results are identical to CompositeLoss on the edited
// image. Not thread-safe; use one instance per thread.
class PixelEditEvaluator {
 public:
  PixelEditEvaluator(const GrayImage& base, const LossContext& context, const LossSpec& spec);

  LossBreakdown Evaluate(std::size_t index, double value);

 private:
  struct TileFeature {
    FeatureRow row;
    std::optional<Error> error;
  };

  double NiqeDistance(int x, int y);
  double MaTerm(int x, int y);
  TileFeature FeatureOf(int tile) const;

  GrayImage image_;
  LossContext context_;
  LossSpec spec_;
  std::optional<MsdFeature> own_hr_msd_;

  bool local_niqe_ = false;
  std::vector<double> weights_;
  MscnField field_;
  int tile_cols_ = 0;
  int tile_rows_ = 0;
  std::vector<double> sharpness_;
  std::vector<TileFeature> tiles_;

  bool local_msd_ = false;
  MsdFeature msd_;
};

// Central differences (L(x + h e_i) - L(x - h e_i)) / 2h for every pixel.
std::vector<double> FiniteDifferenceGradient(const GrayImage& image,
                                             const LossContext& context,
                                             const LossSpec& spec, double fd_epsilon,
                                             int workers = 1);

inline constexpr int kMaxProbeSide = 64;

struct ProbeOptions {
  int steps = 50;
  double step_size = 1.0;
  double fd_epsilon = 0.5;
  int workers = 1;
};

struct ProbeStep {
  int step = 0;
  LossBreakdown loss;
  double rmse = 0.0;  // to the reference image
};

struct ProbeTrace {
  std::vector<ProbeStep> steps;  // step 0 is the initial state
  std::optional<GrayImage> final_image;
  std::string error;  // set when the descent aborted early

  bool completed() const { return error.empty(); }
};

// x <- clamp(x - step_size * grad, 0, 255), repeated `steps` times.
ProbeTrace ProbeDescent(const GrayImage& init, const GrayImage& hr, const LossSpec& spec,
                        const LossContext& context, const ProbeOptions& options);

// Columns: step,total,mse_term,niqe_term,ma_term,rmse.
void WriteTraceCsv(const ProbeTrace& trace, std::ostream& out);
std::vector<ProbeStep> ReadTraceCsv(std::istream& in);

}  // namespace perceptiq

#endif  // PERCEPTIQ_LOSS_HPP_
