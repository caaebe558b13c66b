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

#include "perceptiq/loss.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "perceptiq/error.hpp"
#include "perceptiq/parallel.hpp"

namespace perceptiq {

namespace {

// vgg, adv, style, niqe, ma
constexpr std::array<CombinationWeights, 32> kCombinationRows = {{
    {0, 0, 0, 0, 0},          {0.1, 0, 0, 0, 0},         {0, 0.1, 0, 0, 0},
    {0, 0, 10, 0, 0},         {0, 0, 0, 0.01, 0},        {0, 0, 0, 0, 0.001},
    {0.1, 0.1, 0, 0, 0},      {0.1, 0, 10, 0, 0},        {0.1, 0, 0, 0.01, 0},
    {0.1, 0, 0, 0, 0.001},    {0, 0.1, 10, 0, 0},        {0, 0.1, 0, 0.01, 0},
    {0, 0.1, 0, 0, 0.001},    {0, 0, 10, 0.01, 0},       {0, 0, 10, 0, 0.001},
    {0, 0, 0, 0.01, 0.001},   {0.1, 0.1, 10, 0, 0},      {0.1, 0.1, 0, 0.01, 0},
    {0.1, 0.1, 0, 0, 0.001},  {0.1, 0, 10, 0.01, 0},     {0.1, 0, 10, 0, 0.001},
    {0.1, 0, 0, 0.01, 0.001}, {0, 0.1, 10, 0.01, 0},     {0, 0, 10, 0.01, 0.001},
    {0, 0.1, 0, 0.01, 0.001}, {0, 0.1, 10, 0, 0.001},    {0.1, 0.1, 10, 0.01, 0},
    {0.1, 0.1, 10, 0, 0.001}, {0.1, 0.1, 0, 0.01, 0.001}, {0.1, 0, 10, 0.01, 0.001},
    {0, 0.1, 10, 0.01, 0.001}, {0.1, 0.1, 10, 0.01, 0.001},
}};

Error SpecError(std::size_t pos, const std::string& token, const std::string& what) {
  return Error(ErrorCode::kInvalidArgument, "loss spec at position " + std::to_string(pos) +
                                                " ('" + token + "'): " + what);
}

std::string_view Trim(std::string_view s, std::size_t& offset) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
    ++offset;
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void LossSpec::Validate() const {
  for (double w : {w_mse, epsilon, zeta}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "loss weights must be finite and >= 0");
    }
  }
  if (w_mse == 0.0 && epsilon == 0.0 && zeta == 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "at least one loss weight must be positive");
  }
}

LossSpec LossSpec::Scaled(double factor) const {
  LossSpec s = *this;
  s.w_mse *= factor;
  s.epsilon *= factor;
  s.zeta *= factor;
  return s;
}

LossSpec ParseLossSpec(std::string_view text) {
  LossSpec spec;
  bool seen_mse = false, seen_niqe = false, seen_ma = false;
  std::size_t start = 0;
  if (text.find_first_not_of(" \t") == std::string_view::npos) {
    throw SpecError(0, std::string(text), "empty loss spec");
  }
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
    std::size_t pos = start;
    const std::string_view item = Trim(text.substr(start, end - start), pos);
    const std::string token(item);
    const std::size_t colon = item.find(':');
    if (colon == std::string_view::npos) {
      throw SpecError(pos, token, "expected term:weight");
    }
    const std::string term(item.substr(0, colon));
    const std::string_view weight_text = item.substr(colon + 1);
    double weight = 0.0;
    auto res = std::from_chars(weight_text.data(), weight_text.data() + weight_text.size(), weight);
    if (weight_text.empty() || res.ec != std::errc() ||
        res.ptr != weight_text.data() + weight_text.size()) {
      throw SpecError(pos + colon + 1, token, "weight is not a number");
    }
    if (!std::isfinite(weight) || weight < 0.0) {
      throw SpecError(pos + colon + 1, token, "weight must be finite and >= 0");
    }
    if (term == "mse") {
      if (seen_mse) throw SpecError(pos, token, "duplicate term");
      seen_mse = true;
      spec.w_mse = weight;
    } else if (term == "niqe") {
      if (seen_niqe) throw SpecError(pos, token, "duplicate term");
      seen_niqe = true;
      spec.epsilon = weight;
    } else if (term == "ma-ref" || term == "ma-forest") {
      if (seen_ma) throw SpecError(pos, token, "only one Ma term is allowed");
      seen_ma = true;
      spec.zeta = weight;
      spec.ma_variant = term == "ma-ref" ? MaVariant::kReference : MaVariant::kRegressor;
    } else if (term == "vgg" || term == "adv" || term == "style") {
      throw Error(ErrorCode::kNotImplemented,
                  "loss spec at position " + std::to_string(pos) + " ('" + token +
                      "'): term not implemented: " + term);
    } else {
      throw SpecError(pos, token, "unknown term '" + term + "'");
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  spec.Validate();
  return spec;
}

const CombinationWeights& CombinationRow(int number) {
  if (number < 1 || number > static_cast<int>(kCombinationRows.size())) {
    throw Error(ErrorCode::kInvalidArgument,
                "combination preset must be in 1..32, got " + std::to_string(number));
  }
  return kCombinationRows[number - 1];
}

LossSpec CombinationPreset(int number) {
  const CombinationWeights& row = CombinationRow(number);
  std::string missing;
  if (row.vgg != 0) missing += " vgg";
  if (row.adv != 0) missing += " adv";
  if (row.style != 0) missing += " style";
  if (!missing.empty()) {
    throw Error(ErrorCode::kNotImplemented,
                "preset " + std::to_string(number) + " needs term not implemented:" + missing);
  }
  LossSpec spec;
  spec.w_mse = 10.0;
  spec.epsilon = row.niqe;
  spec.zeta = row.ma;
  spec.ma_variant = MaVariant::kReference;
  spec.niqe_squared = false;
  return spec;
}

namespace {

void CheckContext(const LossContext& context, const LossSpec& spec) {
  spec.Validate();
  if (spec.w_mse > 0.0 && !context.hr) {
    throw Error(ErrorCode::kInvalidArgument, "mse term needs a reference image");
  }
  if (spec.epsilon > 0.0 && !context.natural) {
    throw Error(ErrorCode::kInvalidArgument, "niqe term needs a natural model");
  }
  if (spec.zeta > 0.0) {
    if (spec.ma_variant == MaVariant::kReference && !context.hr_msd && !context.hr) {
      throw Error(ErrorCode::kInvalidArgument, "ma-ref term needs a reference image");
    }
    if (spec.ma_variant == MaVariant::kRegressor && !context.forest) {
      throw Error(ErrorCode::kInvalidArgument, "ma-forest term needs a forest");
    }
  }
}

double NiqeTerm(const LossSpec& spec, double distance) {
  return spec.epsilon * (spec.niqe_squared ? distance * distance : distance);
}

}  // namespace

LossBreakdown CompositeLoss(const GrayImage& image, const LossContext& context,
                            const LossSpec& spec) {
  CheckContext(context, spec);
  LossBreakdown out;
  if (spec.w_mse > 0.0) {
    out.mse_raw = MseLoss(image, *context.hr);
    out.mse = spec.w_mse * out.mse_raw;
  }
  if (spec.epsilon > 0.0) {
    out.niqe_distance = NiqeScore(image, *context.natural);
    out.niqe = NiqeTerm(spec, out.niqe_distance);
  }
  if (spec.zeta > 0.0) {
    const MsdFeature current = ComputeMsdFeature(image, context.msd_patch);
    if (spec.ma_variant == MaVariant::kReference) {
      out.ma_raw = context.hr_msd
                       ? MsdFeatureLoss(current, *context.hr_msd)
                       : MsdFeatureLoss(current, ComputeMsdFeature(*context.hr, context.msd_patch));
    } else {
      out.ma_raw = 10.0 - MaScore(current, *context.forest);
    }
    out.ma = spec.zeta * out.ma_raw;
  }
  out.total = out.mse + out.niqe + out.ma;
  return out;
}

PixelEditEvaluator::PixelEditEvaluator(const GrayImage& base, const LossContext& context,
                                       const LossSpec& spec)
    : image_(base), context_(context), spec_(spec) {
  CheckContext(context, spec);
  const NiqeConfig* config = spec.epsilon > 0.0 ? &context.natural->config : nullptr;
  if (config && config->scales == 1 && config->patch <= std::min(base.width(), base.height())) {
    // Shape errors recur on every edit; leave them to the full path.
    try {
      weights_ = WindowWeights(config->window, config->weighting);
      field_ = ComputeMscn(base, config->window, config->weighting);
      sharpness_ = TileSharpness(field_, config->patch);
      tile_cols_ = base.width() / config->patch;
      tile_rows_ = base.height() / config->patch;
      for (int t = 0; t < tile_cols_ * tile_rows_; ++t) tiles_.push_back(FeatureOf(t));
      local_niqe_ = true;
    } catch (const Error&) {
      local_niqe_ = false;
    }
  }
  if (spec.zeta > 0.0) {
    try {
      msd_ = ComputeMsdFeature(base, context.msd_patch);
      local_msd_ = true;
    } catch (const Error&) {
      local_msd_ = false;
    }
    if (spec.ma_variant == MaVariant::kReference && !context_.hr_msd && local_msd_) {
      own_hr_msd_ = ComputeMsdFeature(*context.hr, context.msd_patch);
      context_.hr_msd = &*own_hr_msd_;
    }
  }
}

PixelEditEvaluator::TileFeature PixelEditEvaluator::FeatureOf(int tile) const {
  const int patch = context_.natural->config.patch;
  TileFeature out;
  try {
    const auto f =
        ComputePatchFeature(field_, {(tile % tile_cols_) * patch, (tile / tile_cols_) * patch}, patch)
            .Flatten();
    out.row.assign(f.begin(), f.end());
  } catch (const Error& e) {
    out.error = e;
  }
  return out;
}

LossBreakdown PixelEditEvaluator::Evaluate(std::size_t index, double value) {
  if (index >= image_.size()) throw Error(ErrorCode::kInvalidArgument, "pixel index out of range");
  const int x = static_cast<int>(index % image_.width());
  const int y = static_cast<int>(index / image_.width());
  double& pixel = image_.pixels()[index];
  const double saved = pixel;
  pixel = value;
  struct Restore {
    double& target;
    double value;
    ~Restore() { target = value; }
  } restore{pixel, saved};

  LossBreakdown out;
  if (spec_.w_mse > 0.0) {
    out.mse_raw = MseLoss(image_, *context_.hr);
    out.mse = spec_.w_mse * out.mse_raw;
  }
  if (spec_.epsilon > 0.0) {
    out.niqe_distance =
        local_niqe_ ? NiqeDistance(x, y) : NiqeScore(image_, *context_.natural);
    out.niqe = NiqeTerm(spec_, out.niqe_distance);
  }
  if (spec_.zeta > 0.0) {
    if (local_msd_) {
      out.ma_raw = MaTerm(x, y);
    } else {
      LossSpec ma_only = spec_;
      ma_only.w_mse = 0.0;
      ma_only.epsilon = 0.0;
      out.ma_raw = CompositeLoss(image_, context_, ma_only).ma_raw;
    }
    out.ma = spec_.zeta * out.ma_raw;
  }
  out.total = out.mse + out.niqe + out.ma;
  return out;
}

double PixelEditEvaluator::NiqeDistance(int x, int y) {
  const NiqeConfig& config = context_.natural->config;
  const int radius = config.window / 2;
  const int x0 = std::max(0, x - radius);
  const int y0 = std::max(0, y - radius);
  const int x1 = std::min(image_.width() - 1, x + radius);
  const int y1 = std::min(image_.height() - 1, y + radius);

  // Every pixel whose window reads (x, y), mirrored reads included, lies in
  // this rectangle because the window never exceeds the image.
  const MscnField saved_field = [&] {
    MscnField s;
    for (int yy = y0; yy <= y1; ++yy) {
      for (int xx = x0; xx <= x1; ++xx) {
        const std::size_t i = field_.Index(xx, yy);
        s.intensity.push_back(field_.intensity[i]);
        s.mu.push_back(field_.mu[i]);
        s.sigma.push_back(field_.sigma[i]);
        s.coeff.push_back(field_.coeff[i]);
      }
    }
    return s;
  }();
  struct RestoreField {
    MscnField& field;
    const MscnField& saved;
    int x0, y0, x1, y1;
    ~RestoreField() {
      std::size_t k = 0;
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx, ++k) {
          const std::size_t i = field.Index(xx, yy);
          field.intensity[i] = saved.intensity[k];
          field.mu[i] = saved.mu[k];
          field.sigma[i] = saved.sigma[k];
          field.coeff[i] = saved.coeff[k];
        }
      }
    }
  } restore{field_, saved_field, x0, y0, x1, y1};
  UpdateMscnRegion(image_, config.window, weights_, x0, y0, x1, y1, field_);

  const int patch = config.patch;
  std::vector<double> sharpness = sharpness_;
  std::vector<std::pair<int, TileFeature>> changed;
  for (int ty = y0 / patch; ty <= std::min(y1 / patch, tile_rows_ - 1); ++ty) {
    for (int tx = x0 / patch; tx <= std::min(x1 / patch, tile_cols_ - 1); ++tx) {
      const int t = ty * tile_cols_ + tx;
      sharpness[t] = TileSigmaSum(field_, {tx * patch, ty * patch}, patch);
      changed.emplace_back(t, FeatureOf(t));
    }
  }

  std::vector<FeatureRow> rows;
  for (std::size_t t : SelectTiles(sharpness, config.threshold_fraction)) {
    const TileFeature* tile = &tiles_[t];
    for (const auto& [index, feature] : changed) {
      if (static_cast<std::size_t>(index) == t) tile = &feature;
    }
    if (tile->error) throw *tile->error;
    rows.push_back(tile->row);
  }
  return NiqeFromRows(rows, *context_.natural);
}

double PixelEditEvaluator::MaTerm(int x, int y) {
  const int patch = msd_.patch;
  const int tx = x / patch;
  const int ty = y / patch;
  const bool inside = tx < msd_.grid_cols && ty < msd_.grid_rows;
  const std::size_t offset = static_cast<std::size_t>(ty * msd_.grid_cols + tx) * patch;
  std::vector<double> saved;
  if (inside) {
    saved.assign(msd_.flat.begin() + offset, msd_.flat.begin() + offset + patch);
    const std::vector<double> sv = TileSpectrum(image_, tx, ty, patch);
    std::copy(sv.begin(), sv.end(), msd_.flat.begin() + offset);
  }
  struct RestoreTile {
    MsdFeature& f;
    const std::vector<double>& saved;
    std::size_t offset;
    ~RestoreTile() { std::copy(saved.begin(), saved.end(), f.flat.begin() + offset); }
  } restore{msd_, saved, offset};

  if (spec_.ma_variant == MaVariant::kReference) return MsdFeatureLoss(msd_, *context_.hr_msd);
  MsdFeature edited = msd_;
  PoolSpectra(edited);
  return 10.0 - MaScore(edited, *context_.forest);
}

std::vector<double> FiniteDifferenceGradient(const GrayImage& image,
                                             const LossContext& context,
                                             const LossSpec& spec, double fd_epsilon,
                                             int workers) {
  if (!(fd_epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "finite-difference step must be > 0");
  }
  std::vector<double> grad(image.size());
  const std::size_t chunks = std::clamp<std::size_t>(workers, 1, image.size());
  ParallelFor(chunks, workers, [&](std::size_t c) {
    PixelEditEvaluator evaluator(image, context, spec);
    for (std::size_t i = c; i < image.size(); i += chunks) {
      const double v = image.pixels()[i];
      const double up = evaluator.Evaluate(i, v + fd_epsilon).total;
      const double down = evaluator.Evaluate(i, v - fd_epsilon).total;
      grad[i] = (up - down) / (2.0 * fd_epsilon);
    }
  });
  return grad;
}

ProbeTrace ProbeDescent(const GrayImage& init, const GrayImage& hr, const LossSpec& spec,
                        const LossContext& context, const ProbeOptions& options) {
  spec.Validate();
  if (options.steps < 1) throw Error(ErrorCode::kInvalidArgument, "probe needs >= 1 step");
  if (!(options.step_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step size must be > 0");
  if (init.width() != hr.width() || init.height() != hr.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "probe images differ in size");
  }
  if (init.width() > kMaxProbeSide || init.height() > kMaxProbeSide) {
    throw Error(ErrorCode::kInvalidArgument,
                "probe images are limited to " + std::to_string(kMaxProbeSide) + "x" +
                    std::to_string(kMaxProbeSide));
  }

  LossContext ctx = context;
  ctx.hr = &hr;
  std::optional<MsdFeature> hr_msd;
  if (spec.zeta > 0.0 && spec.ma_variant == MaVariant::kReference && !ctx.hr_msd) {
    // The reference spectra are fixed for the whole descent.
    hr_msd = ComputeMsdFeature(hr, ctx.msd_patch);
    ctx.hr_msd = &*hr_msd;
  }

  ProbeTrace trace;
  GrayImage current = init;
  auto record = [&](int step) {
    const LossBreakdown loss = CompositeLoss(current, ctx, spec);
    if (!std::isfinite(loss.total)) {
      throw Error(ErrorCode::kNumerical, "non-finite loss at step " + std::to_string(step));
    }
    trace.steps.push_back({step, loss, Rmse(current, hr)});
  };
  try {
    record(0);
    for (int step = 1; step <= options.steps; ++step) {
      const std::vector<double> grad =
          FiniteDifferenceGradient(current, ctx, spec, options.fd_epsilon, options.workers);
      auto px = current.pixels();
      for (std::size_t i = 0; i < px.size(); ++i) {
        if (!std::isfinite(grad[i])) {
          throw Error(ErrorCode::kNumerical, "non-finite gradient at step " + std::to_string(step));
        }
        px[i] = std::clamp(px[i] - options.step_size * grad[i], 0.0, 255.0);
      }
      record(step);
    }
  } catch (const Error& e) {
    trace.error = e.what();
  }
  trace.final_image = current;
  return trace;
}

void WriteTraceCsv(const ProbeTrace& trace, std::ostream& out) {
  out << "step,total,mse_term,niqe_term,ma_term,rmse\n";
  for (const auto& s : trace.steps) {
    out << s.step << ',' << FormatDouble(s.loss.total) << ',' << FormatDouble(s.loss.mse) << ','
        << FormatDouble(s.loss.niqe) << ',' << FormatDouble(s.loss.ma) << ','
        << FormatDouble(s.rmse) << '\n';
  }
}

std::vector<ProbeStep> ReadTraceCsv(std::istream& in) {
  std::vector<ProbeStep> steps;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) continue;  // header
    if (line.empty()) continue;
    std::array<double, 6> v{};
    std::size_t start = 0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const std::size_t comma = line.find(',', start);
      const std::size_t end = comma == std::string::npos ? line.size() : comma;
      auto res = std::from_chars(line.data() + start, line.data() + end, v[k]);
      if (res.ec != std::errc() || res.ptr != line.data() + end ||
          (k + 1 < v.size()) == (comma == std::string::npos)) {
        throw Error(ErrorCode::kFormat, "trace line " + std::to_string(line_no) + " is malformed");
      }
      start = end + 1;
    }
    ProbeStep s;
    s.step = static_cast<int>(v[0]);
    s.loss.total = v[1];
    s.loss.mse = v[2];
    s.loss.niqe = v[3];
    s.loss.ma = v[4];
    s.rmse = v[5];
    steps.push_back(s);
  }
  return steps;
}

}  // namespace perceptiq
