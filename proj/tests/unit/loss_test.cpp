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

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "perceptiq/loss.hpp"
#include "support/combinations.hpp"
#include "support/errors.hpp"
#include "support/synth.hpp"

namespace perceptiq {
namespace {

using testing::ThrownCode;
using testing::ThrownMessage;

GrayImage Clamped(GrayImage img) {
  for (double& v : img.pixels()) v = std::clamp(v, 0.0, 255.0);
  return img;
}

struct LossFixture {
  LossFixture() {
    config.patch = 8;
    config.threshold_fraction = 0.0;
    natural = FitNaturalModel(testing::DeadLeavesCorpus(6, 64, 64, 40), config);
    hr = Crop(testing::DeadLeaves(64, 64, 41), 16, 16, 32, 32);
    init = Clamped(testing::AddGaussianNoise(hr, 12.0, 1));
    TrainingSet t;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const GrayImage img = testing::GaussianBlur(testing::DeadLeaves(32, 32, 60 + s), 0.3 * (s % 5));
      t.features.push_back(ComputeMsdFeature(img, 8).pooled);
      t.targets.push_back(9.0 - 1.5 * (s % 5));
    }
    ForestParams p;
    p.trees = 10;
    forest = TrainForest(t, p);
  }
  LossContext Context() const {
    LossContext c;
    c.hr = &hr;
    c.natural = &natural;
    c.forest = &forest;
    c.msd_patch = 8;
    return c;
  }
  NiqeConfig config;
  MvgModel natural;
  ForestModel forest;
  GrayImage hr{1, 1};
  GrayImage init{1, 1};
};

TEST_CASE("loss spec grammar") {
  const LossSpec s = ParseLossSpec("mse:10, niqe:0.01 ,ma-ref:1e-3");
  CHECK(s.w_mse == 10.0);
  CHECK(s.epsilon == 0.01);
  CHECK(s.zeta == 0.001);
  CHECK(s.ma_variant == MaVariant::kReference);
  CHECK(s.niqe_squared);
  CHECK(ParseLossSpec("ma-forest:2").ma_variant == MaVariant::kRegressor);
  CHECK(ParseLossSpec("mse:1,niqe:0").epsilon == 0.0);
}

TEST_CASE("loss spec errors name the offending token") {
  const std::string m = ThrownMessage([] { ParseLossSpec("mse:"); });
  CHECK(m.find("'mse:'") != std::string::npos);
  CHECK(m.find("position 4") != std::string::npos);
  CHECK(ThrownMessage([] { ParseLossSpec("mse:10,foo:1"); }).find("'foo:1'") != std::string::npos);
  CHECK(ThrownMessage([] { ParseLossSpec("mse:10,niqe"); }).find("position 7") != std::string::npos);
  CHECK(ThrownCode([] { ParseLossSpec("mse:x"); }) == ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([] { ParseLossSpec("mse:-1"); }) == ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([] { ParseLossSpec("mse:1,mse:2"); }) == ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([] { ParseLossSpec("ma-ref:1,ma-forest:2"); }) == ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([] { ParseLossSpec("mse:0"); }) == ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([] { ParseLossSpec(""); }) == ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([] { ParseLossSpec("mse:1,"); }) == ErrorCode::kInvalidArgument);
  for (const char* t : {"vgg:0.1", "mse:10,adv:0.1", "style:10"}) {
    CHECK(ThrownCode([&] { ParseLossSpec(t); }) == ErrorCode::kNotImplemented);
    CHECK(ThrownMessage([&] { ParseLossSpec(t); }).find("term not implemented") != std::string::npos);
  }
}

TEST_CASE("combination rows and presets") {
  for (const auto& rec : testing::kCombinationRecords) {
    CAPTURE(rec.number);
    const CombinationWeights& w = CombinationRow(rec.number);
    CHECK(w.vgg == rec.vgg);
    CHECK(w.adv == rec.adv);
    CHECK(w.style == rec.style);
    CHECK(w.niqe == rec.niqe);
    CHECK(w.ma == rec.ma);
    if (rec.vgg != 0 || rec.adv != 0 || rec.style != 0) {
      CHECK(ThrownCode([&] { CombinationPreset(rec.number); }) == ErrorCode::kNotImplemented);
      CHECK(ThrownMessage([&] { CombinationPreset(rec.number); }).find("term not implemented") !=
            std::string::npos);
    } else {
      const LossSpec s = CombinationPreset(rec.number);
      CHECK(s.w_mse == 10.0);
      CHECK(s.epsilon == rec.niqe);
      CHECK(s.zeta == rec.ma);
      CHECK_FALSE(s.niqe_squared);
    }
  }
  CHECK(ThrownCode([] { CombinationRow(0); }) == ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([] { CombinationRow(33); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE_FIXTURE(LossFixture, "pure mse composite") {
  LossSpec s;
  s.w_mse = 10.0;
  CHECK(CompositeLoss(hr, Context(), s).total == 0.0);
  const LossBreakdown b = CompositeLoss(init, Context(), s);
  CHECK(std::abs(b.total - 10.0 * MseLoss(init, hr)) <= 1e-12 * b.total);
  CHECK(b.niqe == 0.0);
  CHECK(b.ma == 0.0);
}

TEST_CASE_FIXTURE(LossFixture, "niqe term composes with the distance") {
  const GrayImage corpus_image = testing::DeadLeavesCorpus(6, 64, 64, 40)[2];
  LossSpec s;
  s.epsilon = 0.3;
  const LossBreakdown b = CompositeLoss(corpus_image, Context(), s);
  const double d = NiqeScore(corpus_image, natural);
  CHECK(b.niqe_distance == d);
  CHECK(b.total == doctest::Approx(0.3 * d * d).epsilon(1e-14));
  s.niqe_squared = false;
  CHECK(CompositeLoss(corpus_image, Context(), s).total == doctest::Approx(0.3 * d).epsilon(1e-14));
}

TEST_CASE_FIXTURE(LossFixture, "preset 16 recomposes from its parts") {
  const LossSpec s = CombinationPreset(16);
  const LossBreakdown b = CompositeLoss(init, Context(), s);
  const double mse = MseLoss(init, hr);
  const double d = NiqeScore(init, natural);
  const double ma = MsdFeatureLoss(ComputeMsdFeature(init, 8), ComputeMsdFeature(hr, 8));
  CHECK(b.total == doctest::Approx(10.0 * mse + 0.01 * d + 0.001 * ma).epsilon(1e-13));
  CHECK(b.total == b.mse + b.niqe + b.ma);

  LossSpec squared = s;
  squared.niqe_squared = true;
  CHECK(CompositeLoss(init, Context(), squared).total ==
        doctest::Approx(10.0 * mse + 0.01 * d * d + 0.001 * ma).epsilon(1e-13));
}

TEST_CASE_FIXTURE(LossFixture, "regressor variant uses ten minus the ma score") {
  LossSpec s;
  s.zeta = 2.0;
  s.ma_variant = MaVariant::kRegressor;
  const LossBreakdown b = CompositeLoss(init, Context(), s);
  CHECK(b.ma_raw == 10.0 - MaScore(init, forest, 8));
  CHECK(b.total == 2.0 * b.ma_raw);
}

TEST_CASE_FIXTURE(LossFixture, "composite loss is linear in the weights") {
  for (MaVariant v : {MaVariant::kReference, MaVariant::kRegressor}) {
    LossSpec s = ParseLossSpec("mse:10,niqe:0.01,ma-ref:0.001");
    s.ma_variant = v;
    const LossBreakdown one = CompositeLoss(init, Context(), s);
    const LossBreakdown two = CompositeLoss(init, Context(), s.Scaled(2.0));
    CHECK(two.mse == 2.0 * one.mse);
    CHECK(two.niqe == 2.0 * one.niqe);
    CHECK(two.ma == 2.0 * one.ma);
    CHECK(two.total == doctest::Approx(2.0 * one.total).epsilon(1e-15));
  }
}

TEST_CASE_FIXTURE(LossFixture, "missing inputs for active terms") {
  LossContext empty;
  CHECK(ThrownCode([&] { CompositeLoss(init, empty, ParseLossSpec("mse:1")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([&] { CompositeLoss(init, empty, ParseLossSpec("niqe:1")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([&] { CompositeLoss(init, empty, ParseLossSpec("ma-ref:1")); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([&] { CompositeLoss(init, empty, ParseLossSpec("ma-forest:1")); }) ==
        ErrorCode::kInvalidArgument);
  LossContext only_model;
  only_model.natural = &natural;
  CHECK_NOTHROW(CompositeLoss(init, only_model, ParseLossSpec("niqe:1")));
  CHECK(ThrownCode([&] { CompositeLoss(init, Context(), LossSpec{}); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE_FIXTURE(LossFixture, "pixel edits match full evaluation") {
  const GrayImage odd = Clamped(testing::AddGaussianNoise(testing::DeadLeaves(37, 29, 5), 6.0, 2));
  const GrayImage odd_hr = testing::DeadLeaves(37, 29, 6);
  NiqeConfig c = config;
  c.patch = 12;
  c.threshold_fraction = 0.5;
  const MvgModel model12 = FitNaturalModel(testing::DeadLeavesCorpus(4, 60, 60, 8), c);
  LossContext ctx;
  ctx.hr = &odd_hr;
  ctx.natural = &model12;
  ctx.forest = &forest;
  ctx.msd_patch = 8;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> value(0.0, 255.0);
  for (const char* text : {"mse:10,niqe:0.01,ma-ref:0.001", "niqe:1", "ma-forest:1,niqe:0.5",
                           "ma-ref:1"}) {
    for (bool squared : {true, false}) {
      LossSpec s = ParseLossSpec(text);
      s.niqe_squared = squared;
      PixelEditEvaluator evaluator(odd, ctx, s);
      for (int k = 0; k < 60; ++k) {
        std::size_t i = rng() % odd.size();
        if (k < 4) i = std::vector<std::size_t>{0, 36, odd.size() - 1, 28 * 37 + 2}[k];
        const double v = value(rng);
        GrayImage edited = odd;
        edited.pixels()[i] = v;
        const LossBreakdown full = CompositeLoss(edited, ctx, s);
        const LossBreakdown fast = evaluator.Evaluate(i, v);
        CHECK(fast.total == full.total);
        CHECK(fast.niqe_distance == full.niqe_distance);
        CHECK(fast.ma_raw == full.ma_raw);
      }
    }
  }
}

TEST_CASE_FIXTURE(LossFixture, "pixel edits on two-scale models fall back to full evaluation") {
  NiqeConfig c;
  c.patch = 16;
  c.scales = 2;
  c.threshold_fraction = 0.0;
  const MvgModel two = FitNaturalModel(testing::DeadLeavesCorpus(4, 64, 64, 8), c);
  LossContext ctx = Context();
  ctx.natural = &two;
  const LossSpec s = ParseLossSpec("niqe:1");
  PixelEditEvaluator evaluator(init, ctx, s);
  GrayImage edited = init;
  edited.pixels()[100] = 3.0;
  CHECK(evaluator.Evaluate(100, 3.0).total == CompositeLoss(edited, ctx, s).total);
}

TEST_CASE_FIXTURE(LossFixture, "pixel edit errors match the full path") {
  // A model whose patches never pass: every edit fails the same way.
  NiqeConfig strict = config;
  strict.threshold_fraction = 1.0;
  MvgModel model = natural;
  model.config = strict;
  LossContext ctx = Context();
  ctx.natural = &model;
  const LossSpec s = ParseLossSpec("niqe:1");
  PixelEditEvaluator evaluator(init, ctx, s);
  GrayImage edited = init;
  edited.pixels()[5] = 0.0;
  CHECK(ThrownCode([&] { CompositeLoss(edited, ctx, s); }) == ErrorCode::kInsufficientTexture);
  CHECK(ThrownCode([&] { evaluator.Evaluate(5, 0.0); }) == ErrorCode::kInsufficientTexture);
  CHECK(ThrownCode([&] { evaluator.Evaluate(init.size(), 0.0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE_FIXTURE(LossFixture, "finite differences of the mse term match the analytic gradient") {
  const GrayImage hr16 = Crop(hr, 0, 0, 16, 16);
  const GrayImage x = Crop(init, 0, 0, 16, 16);
  LossContext ctx;
  ctx.hr = &hr16;
  const LossSpec s = ParseLossSpec("mse:10");
  const std::vector<double> g = FiniteDifferenceGradient(x, ctx, s, 0.5);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double analytic = 2.0 * 10.0 * (x.pixels()[i] - hr16.pixels()[i]) / 256.0;
    worst = std::max(worst, std::abs(g[i] - analytic));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE_FIXTURE(LossFixture, "gradient equals central differences of the full loss") {
  const GrayImage x = Crop(init, 0, 0, 20, 20);
  const GrayImage h = Crop(hr, 0, 0, 20, 20);
  LossContext ctx = Context();
  ctx.hr = &h;
  const LossSpec s = ParseLossSpec("mse:10,niqe:0.01,ma-ref:0.001");
  const std::vector<double> g = FiniteDifferenceGradient(x, ctx, s, 0.5);
  CHECK(FiniteDifferenceGradient(x, ctx, s, 0.5, 3) == g);
  for (std::size_t i = 0; i < x.size(); i += 7) {
    GrayImage up = x, down = x;
    up.pixels()[i] += 0.5;
    down.pixels()[i] -= 0.5;
    CHECK(g[i] == (CompositeLoss(up, ctx, s).total - CompositeLoss(down, ctx, s).total) / 1.0);
  }
  CHECK(ThrownCode([&] { FiniteDifferenceGradient(x, ctx, s, 0.0); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE_FIXTURE(LossFixture, "pure mse descent decreases every step") {
  ProbeOptions opt;
  opt.steps = 20;
  opt.step_size = 0.5;
  const ProbeTrace t = ProbeDescent(init, hr, ParseLossSpec("mse:10"), Context(), opt);
  REQUIRE(t.completed());
  REQUIRE(t.steps.size() == 21);
  for (std::size_t k = 1; k < t.steps.size(); ++k) {
    CHECK(t.steps[k].step == static_cast<int>(k));
    CHECK(t.steps[k].loss.total < t.steps[k - 1].loss.total);
    CHECK(t.steps[k].rmse < t.steps[k - 1].rmse);
  }
  CHECK(t.final_image.has_value());
  CHECK(Rmse(*t.final_image, hr) == t.steps.back().rmse);
}

TEST_CASE_FIXTURE(LossFixture, "identical start gives a zero trace") {
  ProbeOptions opt;
  opt.steps = 3;
  const ProbeTrace t = ProbeDescent(hr, hr, ParseLossSpec("mse:10"), Context(), opt);
  for (const ProbeStep& s : t.steps) {
    CHECK(s.loss.total == 0.0);
    CHECK(s.rmse == 0.0);
  }
}

TEST_CASE_FIXTURE(LossFixture, "tiny steps never increase the loss") {
  for (const char* text : {"mse:10", "mse:10,niqe:0.01,ma-ref:0.001", "niqe:1", "ma-ref:0.01",
                           "ma-forest:1,mse:1"}) {
    ProbeOptions opt;
    opt.steps = 1;
    opt.step_size = 1e-4;
    const ProbeTrace t = ProbeDescent(init, hr, ParseLossSpec(text), Context(), opt);
    REQUIRE(t.completed());
    const double l0 = t.steps[0].loss.total;
    CAPTURE(text);
    CHECK(t.steps[1].loss.total - l0 <= 1e-9 * l0);
  }
}

TEST_CASE_FIXTURE(LossFixture, "probe output is clamped and deterministic") {
  ProbeOptions opt;
  opt.steps = 4;
  opt.step_size = 50.0;
  const LossSpec s = ParseLossSpec("mse:10,niqe:0.01,ma-ref:0.001");
  const ProbeTrace a = ProbeDescent(init, hr, s, Context(), opt);
  REQUIRE(a.completed());
  for (double v : a.final_image->pixels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 255.0);
  }
  opt.workers = 3;
  const ProbeTrace b = ProbeDescent(init, hr, s, Context(), opt);
  std::ostringstream ta, tb;
  WriteTraceCsv(a, ta);
  WriteTraceCsv(b, tb);
  CHECK(ta.str() == tb.str());
  CHECK(*a.final_image == *b.final_image);
}

TEST_CASE_FIXTURE(LossFixture, "probe preconditions") {
  const LossSpec s = ParseLossSpec("mse:1");
  ProbeOptions opt;
  const GrayImage big(65, 10);
  CHECK(ThrownCode([&] { ProbeDescent(big, big, s, Context(), opt); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(ThrownCode([&] { ProbeDescent(init, Crop(hr, 0, 0, 31, 32), s, Context(), opt); }) ==
        ErrorCode::kDimensionMismatch);
  opt.steps = 0;
  CHECK(ThrownCode([&] { ProbeDescent(init, hr, s, Context(), opt); }) ==
        ErrorCode::kInvalidArgument);
  opt.steps = 1;
  opt.step_size = 0.0;
  CHECK(ThrownCode([&] { ProbeDescent(init, hr, s, Context(), opt); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE_FIXTURE(LossFixture, "a failing loss aborts with the partial trace") {
  MvgModel broken = natural;
  broken.mean(0) = NAN;
  LossContext ctx = Context();
  ctx.natural = &broken;
  ProbeOptions opt;
  opt.steps = 3;
  const ProbeTrace t = ProbeDescent(init, hr, ParseLossSpec("mse:1,niqe:1"), ctx, opt);
  CHECK_FALSE(t.completed());
  CHECK(t.steps.empty());
  CHECK(t.error.find("numerical") != std::string::npos);
  REQUIRE(t.final_image.has_value());
  CHECK(*t.final_image == init);
}

TEST_CASE("trace csv round trips") {
  ProbeTrace t;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1e4);
  for (int k = 0; k < 6; ++k) {
    ProbeStep s;
    s.step = k;
    s.loss.mse = u(rng);
    s.loss.niqe = u(rng) / 3.0;
    s.loss.ma = u(rng) * 1e-7;
    s.loss.total = s.loss.mse + s.loss.niqe + s.loss.ma;
    s.rmse = std::sqrt(u(rng));
    t.steps.push_back(s);
  }
  std::stringstream io;
  WriteTraceCsv(t, io);
  const std::vector<ProbeStep> back = ReadTraceCsv(io);
  REQUIRE(back.size() == t.steps.size());
  for (std::size_t k = 0; k < back.size(); ++k) {
    CHECK(back[k].step == t.steps[k].step);
    CHECK(back[k].loss.total == t.steps[k].loss.total);
    CHECK(back[k].loss.mse == t.steps[k].loss.mse);
    CHECK(back[k].loss.niqe == t.steps[k].loss.niqe);
    CHECK(back[k].loss.ma == t.steps[k].loss.ma);
    CHECK(back[k].rmse == t.steps[k].rmse);
  }
  std::istringstream bad("step,total,mse_term,niqe_term,ma_term,rmse\n1,2,3\n");
  CHECK(ThrownCode([&] { ReadTraceCsv(bad); }) == ErrorCode::kFormat);
}

}  // namespace
}  // namespace perceptiq
