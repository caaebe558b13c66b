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

#include "perceptiq/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "json.hpp"
#include "perceptiq/error.hpp"
#include "perceptiq/parallel.hpp"

namespace perceptiq {

namespace {

namespace fs = std::filesystem;

bool IsImageFile(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm" || ext == ".jpg" ||
         ext == ".jpeg";
}

void AppendError(std::string& error, const std::string& message) {
  if (!error.empty()) error += "; ";
  error += message;
}

std::optional<double> MeanOf(const std::vector<ImageReport>& rows,
                             std::optional<double> ImageReport::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.*field) {
      sum += *(r.*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string Cell(const std::optional<double>& v) { return v ? FormatDouble(*v) : ""; }

std::string CsvQuote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json JsonValue(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

double PerceptualScore(double ma, double niqe) {
  if (!std::isfinite(ma) || !std::isfinite(niqe)) {
    throw Error(ErrorCode::kInvalidArgument, "perceptual score needs finite inputs");
  }
  return ((10.0 - ma) + niqe) / 2.0;
}

Region RegionOf(double rmse) {
  if (!(rmse >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "RMSE must be >= 0");
  if (rmse <= 11.5) return Region::k1;
  if (rmse <= 12.5) return Region::k2;
  if (rmse <= 16.0) return Region::k3;
  return Region::kOutOfRange;
}

std::string RegionName(Region region) {
  switch (region) {
    case Region::k1: return "1";
    case Region::k2: return "2";
    case Region::k3: return "3";
    case Region::kOutOfRange: return "out-of-range";
  }
  return "?";
}

ImageReport ScoreImage(const std::string& id, const GrayImage& sr, const GrayImage* hr,
                       const MvgModel& natural, const ForestModel* forest,
                       const ScoringOptions& options) {
  ImageReport report;
  report.image = id;
  try {
    report.niqe = NiqeScore(sr, natural);
  } catch (const Error& e) {
    AppendError(report.error, std::string("niqe: ") + e.what());
  }
  if (forest) {
    try {
      report.ma = MaScore(sr, *forest, options.msd_patch);
    } catch (const Error& e) {
      AppendError(report.error, std::string("ma: ") + e.what());
    }
  }
  if (report.ma && report.niqe) report.perceptual = PerceptualScore(*report.ma, *report.niqe);
  if (hr) {
    try {
      report.rmse = Rmse(ShaveBorder(sr, options.crop), ShaveBorder(*hr, options.crop));
      report.region = RegionOf(*report.rmse);
    } catch (const Error& e) {
      AppendError(report.error, std::string("rmse: ") + e.what());
    }
  }
  return report;
}

std::vector<std::string> ListImages(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && IsImageFile(entry.path())) {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

BatchReport RunBatch(const std::string& sr_dir, const std::optional<std::string>& hr_dir,
                     const MvgModel& natural, const ForestModel* forest,
                     const ScoringOptions& options) {
  const std::vector<std::string> names = ListImages(sr_dir);
  if (names.empty()) throw Error(ErrorCode::kInvalidArgument, "no images in " + sr_dir);
  std::vector<std::string> sr_paths, hr_paths;
  for (const auto& n : names) sr_paths.push_back((fs::path(sr_dir) / n).string());
  if (hr_dir) {
    const std::vector<std::string> hr_names = ListImages(*hr_dir);
    if (hr_names != names) {
      std::vector<std::string> diff;
      std::set_symmetric_difference(names.begin(), names.end(), hr_names.begin(),
                                    hr_names.end(), std::back_inserter(diff));
      throw Error(ErrorCode::kInvalidArgument,
                  "unpaired files between " + sr_dir + " and " + *hr_dir + " (first: " +
                      diff.front() + ")");
    }
    for (const auto& n : names) hr_paths.push_back((fs::path(*hr_dir) / n).string());
  }
  return RunBatch(sr_paths, hr_paths, natural, forest, options);
}

BatchReport RunBatch(const std::vector<std::string>& sr_paths,
                     const std::vector<std::string>& hr_paths, const MvgModel& natural,
                     const ForestModel* forest, const ScoringOptions& options) {
  if (sr_paths.empty()) throw Error(ErrorCode::kInvalidArgument, "no images to score");
  if (!hr_paths.empty() && hr_paths.size() != sr_paths.size()) {
    throw Error(ErrorCode::kInvalidArgument, "reference list does not pair with inputs");
  }
  BatchReport report;
  report.rows.resize(sr_paths.size());
  ParallelFor(sr_paths.size(), options.workers, [&](std::size_t i) {
    const std::string id = fs::path(sr_paths[i]).filename().string();
    try {
      const GrayImage sr = LoadGray(sr_paths[i]);
      if (hr_paths.empty()) {
        report.rows[i] = ScoreImage(id, sr, nullptr, natural, forest, options);
      } else {
        const GrayImage hr = LoadGray(hr_paths[i]);
        report.rows[i] = ScoreImage(id, sr, &hr, natural, forest, options);
      }
    } catch (const Error& e) {
      report.rows[i] = ImageReport{};
      report.rows[i].image = id;
      report.rows[i].error = e.what();
    }
  });
  report.aggregate = Aggregate(report.rows);
  return report;
}

ReportAggregate Aggregate(const std::vector<ImageReport>& rows) {
  ReportAggregate agg;
  agg.images = rows.size();
  agg.failed = static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.error.empty(); }));
  agg.niqe = MeanOf(rows, &ImageReport::niqe);
  agg.ma = MeanOf(rows, &ImageReport::ma);
  agg.perceptual = MeanOf(rows, &ImageReport::perceptual);
  agg.rmse = MeanOf(rows, &ImageReport::rmse);
  return agg;
}

void WriteReportCsv(const BatchReport& report, std::ostream& out) {
  out << "image,niqe,ma,perceptual,rmse,region,error\n";
  for (const auto& r : report.rows) {
    out << CsvQuote(r.image) << ',' << Cell(r.niqe) << ',' << Cell(r.ma) << ','
        << Cell(r.perceptual) << ',' << Cell(r.rmse) << ','
        << (r.region ? RegionName(*r.region) : "") << ',' << CsvQuote(r.error) << '\n';
  }
  const auto& a = report.aggregate;
  out << "MEAN," << Cell(a.niqe) << ',' << Cell(a.ma) << ',' << Cell(a.perceptual) << ','
      << Cell(a.rmse) << ",," << (a.failed ? std::to_string(a.failed) + " failed" : "")
      << '\n';
}

void WriteReportJson(const BatchReport& report, std::ostream& out) {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json row;
    row["image"] = r.image;
    row["niqe"] = JsonValue(r.niqe);
    row["ma"] = JsonValue(r.ma);
    row["perceptual"] = JsonValue(r.perceptual);
    row["rmse"] = JsonValue(r.rmse);
    row["region"] = r.region ? nlohmann::json(RegionName(*r.region)) : nlohmann::json(nullptr);
    row["error"] = r.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.error);
    j["images"].push_back(std::move(row));
  }
  const auto& a = report.aggregate;
  j["aggregate"] = {{"images", a.images},       {"failed", a.failed},
                    {"niqe", JsonValue(a.niqe)}, {"ma", JsonValue(a.ma)},
                    {"perceptual", JsonValue(a.perceptual)},
                    {"rmse", JsonValue(a.rmse)}};
  out << j.dump(2) << '\n';
}

}  // namespace perceptiq
