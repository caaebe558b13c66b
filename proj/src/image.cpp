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

#include "perceptiq/image.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "perceptiq/error.hpp"

namespace perceptiq {

namespace {

void CheckFinite(std::span<const double> data) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "image contains non-finite values");
    }
  }
}

void CheckSameShape(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()));
  }
}

std::string Lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

GrayImage::GrayImage(int width, int height, double fill)
    : GrayImage(width, height,
                std::vector<double>(width > 0 && height > 0
                                        ? static_cast<std::size_t>(width) * height
                                        : 0,
                                    fill)) {}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kInvalidArgument, "pixel count does not match dimensions");
  }
  CheckFinite(data_);
}

GrayImage LoadGray(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kIo, "cannot read " + path);
  }
  const std::string ext = Lowercase(std::filesystem::path(path).extension().string());
  static const char* kSupported[] = {".png", ".pgm", ".ppm", ".pnm", ".jpg", ".jpeg"};
  if (std::none_of(std::begin(kSupported), std::end(kSupported),
                   [&](const char* e) { return ext == e; })) {
    throw Error(ErrorCode::kFormat, "unsupported image format: " + path);
  }
  cv::Mat mat = cv::imread(path, cv::IMREAD_UNCHANGED);
  if (mat.empty()) {
    throw Error(ErrorCode::kFormat, "could not decode " + path);
  }
  if (mat.depth() != CV_8U) {
    throw Error(ErrorCode::kFormat, "only 8-bit images are supported: " + path);
  }
  if (mat.cols < 1 || mat.rows < 1) {
    throw Error(ErrorCode::kFormat, "zero-dimension image: " + path);
  }
  const int channels = mat.channels();
  if (channels != 1 && channels != 3 && channels != 4) {
    throw Error(ErrorCode::kFormat, "unsupported channel count in " + path);
  }
  std::vector<double> data(static_cast<std::size_t>(mat.cols) * mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const unsigned char* src = mat.ptr<unsigned char>(y);
    double* dst = data.data() + static_cast<std::size_t>(y) * mat.cols;
    for (int x = 0; x < mat.cols; ++x) {
      const unsigned char* px = src + x * channels;
      if (channels == 1) {
        dst[x] = px[0];
      } else {
        // OpenCV decodes to BGR(A); alpha is ignored.
        dst[x] = 0.299 * px[2] + 0.587 * px[1] + 0.114 * px[0];
      }
    }
  }
  return GrayImage(mat.cols, mat.rows, std::move(data));
}

void SaveGray(const GrayImage& image, const std::string& path) {
  const std::string ext = Lowercase(std::filesystem::path(path).extension().string());
  if (ext != ".png" && ext != ".pgm") {
    throw Error(ErrorCode::kFormat, "can only write .png or .pgm: " + path);
  }
  cv::Mat mat(image.height(), image.width(), CV_8UC1);
  for (int y = 0; y < image.height(); ++y) {
    unsigned char* dst = mat.ptr<unsigned char>(y);
    for (int x = 0; x < image.width(); ++x) {
      dst[x] = static_cast<unsigned char>(std::lround(std::clamp(image(x, y), 0.0, 255.0)));
    }
  }
  std::vector<int> params;
  if (ext == ".pgm") params = {cv::IMWRITE_PXM_BINARY, 1};
  if (!cv::imwrite(path, mat, params)) {
    throw Error(ErrorCode::kIo, "cannot write " + path);
  }
}

double Rmse(const GrayImage& a, const GrayImage& b) {
  return std::sqrt(MseLoss(a, b));
}

double MseLoss(const GrayImage& sr, const GrayImage& hr) {
  CheckSameShape(sr, hr);
  const auto s = sr.pixels();
  const auto h = hr.pixels();
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = s[i] - h[i];
    sum += d * d;
  }
  return sum / static_cast<double>(s.size());
}

GrayImage Crop(const GrayImage& image, int x, int y, int width, int height) {
  if (x < 0 || y < 0 || width < 1 || height < 1 || x + width > image.width() ||
      y + height > image.height()) {
    throw Error(ErrorCode::kInvalidArgument, "crop window outside image");
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(width) * height);
  for (int r = y; r < y + height; ++r) {
    auto src = image.row(r).subspan(x, width);
    data.insert(data.end(), src.begin(), src.end());
  }
  return GrayImage(width, height, std::move(data));
}

GrayImage ShaveBorder(const GrayImage& image, int border) {
  if (border < 0) throw Error(ErrorCode::kInvalidArgument, "negative crop");
  if (border == 0) return image;
  return Crop(image, border, border, image.width() - 2 * border,
              image.height() - 2 * border);
}

GrayImage MirrorHorizontal(const GrayImage& image) {
  GrayImage out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      out(x, y) = image(image.width() - 1 - x, y);
    }
  }
  return out;
}

}  // namespace perceptiq
