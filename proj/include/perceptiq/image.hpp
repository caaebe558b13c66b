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

#ifndef PERCEPTIQ_IMAGE_HPP_
#define PERCEPTIQ_IMAGE_HPP_

#include <span>
#include <string>
#include <vector>

namespace perceptiq {

// Row-major luminance image. Values are doubles on the 8-bit scale [0, 255];
// the range is nominal and not enforced, but every value must be finite.
class GrayImage {
 public:
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  double operator()(int x, int y) const { return data_[Index(x, y)]; }
  double& operator()(int x, int y) { return data_[Index(x, y)]; }

  std::span<const double> pixels() const { return data_; }
  std::span<double> pixels() { return data_; }
  std::span<const double> row(int y) const {
    return std::span<const double>(data_).subspan(Index(0, y), width_);
  }

  bool operator==(const GrayImage& other) const = default;

 private:
  std::size_t Index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_;
  int height_;
  std::vector<double> data_;
};

// Loads PNG, PGM/PPM or JPEG. Color inputs are converted with BT.601 luma
// weights (0.299 R + 0.587 G + 0.114 B) in double precision.
GrayImage LoadGray(const std::string& path);

// Writes an 8-bit grayscale image; values are clamped to [0, 255] and rounded.
// The container is picked from the extension (.pgm is binary P5, .png).
void SaveGray(const GrayImage& image, const std::string& path);

double Rmse(const GrayImage& a, const GrayImage& b);

// Mean squared pixel difference, 1/(XY) sum (S - H)^2.
double MseLoss(const GrayImage& sr, const GrayImage& hr);

// Sub-image [x, x + width) x [y, y + height).
GrayImage Crop(const GrayImage& image, int x, int y, int width, int height);

// Removes `border` pixels from every side.
GrayImage ShaveBorder(const GrayImage& image, int border);

GrayImage MirrorHorizontal(const GrayImage& image);

// Mirror (symmetric, edge-repeating) index folding used for border padding:
// ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
inline int FoldIndex(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace perceptiq

#endif  // PERCEPTIQ_IMAGE_HPP_
