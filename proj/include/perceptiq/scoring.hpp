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

#ifndef PERCEPTIQ_SCORING_HPP_
#define PERCEPTIQ_SCORING_HPP_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "perceptiq/forest.hpp"
#include "perceptiq/image.hpp"
#include "perceptiq/msd.hpp"
#include "perceptiq/niqe.hpp"

namespace perceptiq {

// ((10 - ma) + niqe) / 2; lower is better.
double PerceptualScore(double ma, double niqe);

// RMSE strata: 1 for rmse <= 11.5, 2 for (11.5, 12.5], 3 for (12.5, 16],
// kOutOfRange above 16. Declared in increasing order.
enum class Region { k1 = 1, k2 = 2, k3 = 3, kOutOfRange = 4 };

Region RegionOf(double rmse);
std::string RegionName(Region region);

struct ImageReport {
  std::string image;
  std::optional<double> niqe;
  std::optional<double> ma;
  std::optional<double> perceptual;
  std::optional<double> rmse;
  std::optional<Region> region;
  std::string error;  // empty when every requested value was computed
};

struct ReportAggregate {
  std::size_t images = 0;
  std::size_t failed = 0;
  std::optional<double> niqe;
  std::optional<double> ma;
  std::optional<double> perceptual;
  std::optional<double> rmse;
};

struct BatchReport {
  std::vector<ImageReport> rows;
  ReportAggregate aggregate;
};

struct ScoringOptions {
  int msd_patch = kDefaultMsdPatch;
  int crop = 0;  // pixels shaved from each side before RMSE
  int workers = 1;
};

// Scores one image. Failures are recorded in the report's error field.
ImageReport ScoreImage(const std::string& id, const GrayImage& sr, const GrayImage* hr,
                       const MvgModel& natural, const ForestModel* forest,
                       const ScoringOptions& options);

// Image files (png, pgm, ppm, pnm, jpg, jpeg) directly inside `dir`, sorted
// by file name.
std::vector<std::string> ListImages(const std::string& dir);

// Scores every image of sr_dir, paired by file name with hr_dir when given.
BatchReport RunBatch(const std::string& sr_dir, const std::optional<std::string>& hr_dir,
                     const MvgModel& natural, const ForestModel* forest,
                     const ScoringOptions& options);

// Scores explicit files; hr_paths is empty or parallel to sr_paths.
BatchReport RunBatch(const std::vector<std::string>& sr_paths,
                     const std::vector<std::string>& hr_paths, const MvgModel& natural,
                     const ForestModel* forest, const ScoringOptions& options);

ReportAggregate Aggregate(const std::vector<ImageReport>& rows);

// CSV columns: image,niqe,ma,perceptual,rmse,region,error. The last row holds
// the column means with image "MEAN".
void WriteReportCsv(const BatchReport& report, std::ostream& out);
void WriteReportJson(const BatchReport& report, std::ostream& out);

}  // namespace perceptiq

#endif  // PERCEPTIQ_SCORING_HPP_
