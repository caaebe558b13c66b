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

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "doctest.h"
#include "perceptiq/error.hpp"
#include "perceptiq/image.hpp"
#include "support/errors.hpp"
#include "support/synth.hpp"

namespace perceptiq {
namespace {

GrayImage RandomImage(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  GrayImage img(w, h);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

TEST_CASE("pgm passthrough") {
  const std::string path = testing::MakeTempDir("img") + "/tiny.pgm";
  {
    std::ofstream out(path, std::ios::binary);
    out << "P5\n2 2\n255\n";
    const unsigned char px[] = {0, 255, 128, 64};
    out.write(reinterpret_cast<const char*>(px), 4);
  }
  CHECK(LoadGray(path) == GrayImage(2, 2, {0, 255, 128, 64}));
}

TEST_CASE("rgb png converts with bt601 weights") {
  const std::string path = testing::MakeTempDir("img") + "/red.png";
  cv::Mat red(3, 3, CV_8UC3, cv::Scalar(0, 0, 255));  // BGR
  REQUIRE(cv::imwrite(path, red));
  const GrayImage g = LoadGray(path);
  REQUIRE(g.width() == 3);
  for (double v : g.pixels()) CHECK(v == doctest::Approx(76.245).epsilon(1e-12));

  cv::Mat mixed(1, 1, CV_8UC3, cv::Scalar(30, 200, 10));
  REQUIRE(cv::imwrite(path, mixed));
  CHECK(LoadGray(path)(0, 0) == doctest::Approx(0.299 * 10 + 0.587 * 200 + 0.114 * 30));
}

TEST_CASE("save then load round trips 8-bit data") {
  const std::string dir = testing::MakeTempDir("img");
  const GrayImage noise = testing::UniformNoiseImage(16, 16, 3);
  for (const char* name : {"/n.png", "/n.pgm"}) {
    SaveGray(noise, dir + name);
    CHECK(LoadGray(dir + name) == noise);
  }
}

TEST_CASE("save clamps and rounds") {
  const std::string path = testing::MakeTempDir("img") + "/c.pgm";
  SaveGray(GrayImage(3, 1, {-4.0, 12.6, 300.0}), path);
  CHECK(LoadGray(path) == GrayImage(3, 1, {0.0, 13.0, 255.0}));
}

TEST_CASE("load errors") {
  const std::string dir = testing::MakeTempDir("img");
  CHECK(testing::ThrownCode([&] { LoadGray(dir + "/missing.png"); }) == ErrorCode::kIo);
  {
    std::ofstream(dir + "/x.txt") << "hello";
    std::ofstream(dir + "/bad.png") << "not a png";
  }
  CHECK(testing::ThrownCode([&] { LoadGray(dir + "/x.txt"); }) == ErrorCode::kFormat);
  CHECK(testing::ThrownCode([&] { LoadGray(dir + "/bad.png"); }) == ErrorCode::kFormat);
  CHECK(testing::ThrownCode([&] { SaveGray(GrayImage(1, 1), dir + "/y.bmp"); }) == ErrorCode::kFormat);
}

TEST_CASE("image construction checks") {
  CHECK(testing::ThrownCode([] { GrayImage(0, 3); }) == ErrorCode::kInvalidArgument);
  CHECK(testing::ThrownCode([] { GrayImage(2, 2, std::vector<double>(3)); }) == ErrorCode::kInvalidArgument);
  CHECK(testing::ThrownCode([] { GrayImage(1, 1, {NAN}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("rmse examples") {
  const GrayImage a = RandomImage(4, 4, 1);
  CHECK(Rmse(a, a) == 0.0);
  GrayImage b = a;
  for (double& v : b.pixels()) v += 5.0;
  CHECK(Rmse(a, b) == doctest::Approx(5.0).epsilon(1e-14));

  const GrayImage c = RandomImage(4, 4, 2);
  double sum = 0.0;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) sum += (a(x, y) - c(x, y)) * (a(x, y) - c(x, y));
  }
  CHECK(std::abs(Rmse(a, c) - std::sqrt(sum / 16.0)) < 1e-12);
  CHECK(testing::ThrownCode([&] { Rmse(a, GrayImage(4, 5)); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("mse examples") {
  const GrayImage hr = RandomImage(8, 8, 4);
  CHECK(MseLoss(hr, hr) == 0.0);
  GrayImage sr = hr;
  for (double& v : sr.pixels()) v += 2.0;
  CHECK(MseLoss(sr, hr) == doctest::Approx(4.0).epsilon(1e-13));
  const GrayImage other = RandomImage(8, 8, 5);
  CHECK(std::abs(MseLoss(other, hr) - Rmse(other, hr) * Rmse(other, hr)) < 1e-12 * MseLoss(other, hr));
  CHECK(testing::ThrownCode([&] { MseLoss(hr, GrayImage(7, 8)); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("rmse properties over random pairs") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const int w = 1 + static_cast<int>(s % 7);
    const int h = 1 + static_cast<int>(s % 5);
    const GrayImage a = RandomImage(w, h, 100 + s);
    const GrayImage b = RandomImage(w, h, 200 + s);
    CHECK(Rmse(a, b) == Rmse(b, a));
    CHECK(Rmse(a, b) > 0.0);
    CHECK(Rmse(a, a) == 0.0);
    const double r = Rmse(a, b);
    CHECK(std::abs(MseLoss(a, b) - r * r) <= 1e-9 * r * r);
  }
}

TEST_CASE("crop, shave and mirror") {
  const GrayImage img(3, 2, {1, 2, 3, 4, 5, 6});
  CHECK(Crop(img, 1, 0, 2, 2) == GrayImage(2, 2, {2, 3, 5, 6}));
  CHECK(ShaveBorder(GrayImage(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9}), 1) == GrayImage(1, 1, {5}));
  CHECK(MirrorHorizontal(img) == GrayImage(3, 2, {3, 2, 1, 6, 5, 4}));
  CHECK(testing::ThrownCode([&] { Crop(img, 2, 0, 2, 2); }) == ErrorCode::kInvalidArgument);
  CHECK(testing::ThrownCode([&] { ShaveBorder(img, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("fold index mirrors with edge repeat") {
  CHECK(FoldIndex(-1, 5) == 0);
  CHECK(FoldIndex(-3, 5) == 2);
  CHECK(FoldIndex(5, 5) == 4);
  CHECK(FoldIndex(7, 5) == 2);
  CHECK(FoldIndex(3, 5) == 3);
}

}  // namespace
}  // namespace perceptiq
