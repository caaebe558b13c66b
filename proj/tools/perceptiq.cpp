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

// perceptiq: fit NIQE models, score images, train Ma regressors and run the
// finite-difference loss probe.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "perceptiq/error.hpp"
#include "perceptiq/forest.hpp"
#include "perceptiq/image.hpp"
#include "perceptiq/loss.hpp"
#include "perceptiq/msd.hpp"
#include "perceptiq/niqe.hpp"
#include "perceptiq/nss.hpp"
#include "perceptiq/scoring.hpp"

namespace fs = std::filesystem;
using namespace perceptiq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

struct RunConfig {
  int workers = 1;

  // fit-niqe
  std::string corpus_dir;
  std::string model_out;
  int niqe_patch = 96;
  int window = 7;
  double threshold = 0.75;
  std::string weighting = "gaussian";
  int scales = 1;
  std::string note;
  std::string dump_patches;

  // score
  std::vector<std::string> inputs;
  std::string model_path;
  std::string forest_path;
  std::string hr_dir;
  std::string format = "csv";
  std::string output;
  int crop = 0;
  int msd_patch = kDefaultMsdPatch;

  // train-forest
  std::string csv_path;
  std::string forest_out;
  int trees = 100;
  int max_depth = 0;
  int min_leaf = 5;
  std::uint64_t seed = 1;
  bool no_bootstrap = false;
  int mtry = 0;

  // probe
  std::string init_path;
  std::string hr_path;
  std::string loss_spec;
  int preset = 0;
  std::string niqe_form;
  int steps = 50;
  double step_size = 1.0;
  double fd_epsilon = 0.5;
  std::string output_prefix = "probe";

  // msd-features
  std::string view = "pooled";
};

void PrintHeader(const std::string& command, const RunConfig& c) {
  std::cerr << "perceptiq " << command << ": niqe_patch=" << c.niqe_patch
            << " window=" << c.window << " threshold=" << FormatDouble(c.threshold)
            << " msd_patch=" << c.msd_patch << " workers=" << c.workers << '\n';
}

std::vector<std::string> ExpandInputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> paths;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& name : ListImages(in)) paths.push_back((fs::path(in) / name).string());
    } else {
      paths.push_back(in);
    }
  }
  if (paths.empty()) throw Error(ErrorCode::kInvalidArgument, "no input images");
  return paths;
}

WindowWeighting ToWeighting(const std::string& s) {
  return s == "box" ? WindowWeighting::kBox : WindowWeighting::kGaussian;
}

// Writes to `path`, or stdout when path is empty.
template <typename Fn>
void WithOutput(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  fn(out);
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
}

int CmdFitNiqe(const RunConfig& c) {
  NiqeConfig config;
  config.patch = c.niqe_patch;
  config.window = c.window;
  config.threshold_fraction = c.threshold;
  config.weighting = ToWeighting(c.weighting);
  config.scales = c.scales;
  config.Validate();

  const std::vector<std::string> names = ListImages(c.corpus_dir);
  if (names.empty()) throw Error(ErrorCode::kInvalidArgument, "no images in " + c.corpus_dir);
  std::vector<std::string> paths;
  for (const auto& n : names) paths.push_back((fs::path(c.corpus_dir) / n).string());

  const std::string note = c.note.empty() ? fs::path(c.corpus_dir).filename().string() : c.note;
  const MvgModel model = FitNaturalModel(paths, config, note, c.workers);
  SaveModel(model, c.model_out);

  if (!c.dump_patches.empty()) {
    WithOutput(c.dump_patches, [&](std::ostream& out) {
      out << "image,tile_x,tile_y";
      for (int k = 0; k < config.FeatureDim(); ++k) out << ",f" << k;
      out << '\n';
      for (std::size_t i = 0; i < paths.size(); ++i) {
        const GrayImage img = LoadGray(paths[i]);
        const MscnField field = ComputeMscn(img, config.window, config.weighting);
        const auto origins = SelectPatches(field, config.patch, config.threshold_fraction);
        const auto rows = ExtractFeatures(img, config);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          out << names[i] << ',' << origins[r].x << ',' << origins[r].y;
          for (double v : rows[r]) out << ',' << FormatDouble(v);
          out << '\n';
        }
      }
    });
  }
  std::cout << "images=" << paths.size() << " patches=" << model.patch_count
            << " dim=" << model.dim << " patch=" << config.patch << " window=" << config.window
            << " threshold=" << FormatDouble(config.threshold_fraction)
            << " weighting=" << c.weighting << " scales=" << config.scales << '\n';
  return kExitOk;
}

int CmdScore(const RunConfig& c) {
  const MvgModel model = LoadModel(c.model_path);
  std::optional<ForestModel> forest;
  if (!c.forest_path.empty()) forest = LoadForest(c.forest_path);

  ScoringOptions options;
  options.msd_patch = c.msd_patch;
  options.crop = c.crop;
  options.workers = c.workers;

  const std::vector<std::string> sr = ExpandInputs(c.inputs);
  std::vector<std::string> hr;
  if (!c.hr_dir.empty()) {
    for (const auto& p : sr) {
      const fs::path candidate = fs::path(c.hr_dir) / fs::path(p).filename();
      if (!fs::is_regular_file(candidate)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "unpaired file: no reference for " + fs::path(p).filename().string());
      }
      hr.push_back(candidate.string());
    }
    if (c.inputs.size() == 1 && fs::is_directory(c.inputs.front()) &&
        ListImages(c.hr_dir).size() != sr.size()) {
      throw Error(ErrorCode::kInvalidArgument, "unpaired files in " + c.hr_dir);
    }
  }
  const BatchReport report = RunBatch(sr, hr, model, forest ? &*forest : nullptr, options);
  WithOutput(c.output, [&](std::ostream& out) {
    if (c.format == "json") {
      WriteReportJson(report, out);
    } else {
      WriteReportCsv(report, out);
    }
  });
  for (const auto& row : report.rows) {
    if (!row.error.empty()) std::cerr << row.image << ": " << row.error << '\n';
  }
  return report.aggregate.failed > 0 ? kExitPartial : kExitOk;
}

int CmdTrainForest(const RunConfig& c) {
  const TrainingSet data = ReadTrainingCsv(c.csv_path);
  ForestParams params;
  params.trees = c.trees;
  params.max_depth = c.max_depth;
  params.min_leaf = c.min_leaf;
  params.seed = c.seed;
  params.bootstrap = !c.no_bootstrap;
  params.features_per_split = c.mtry;
  const ForestModel model = TrainForest(data, params, c.workers);
  SaveForest(model, c.forest_out);

  double sq = 0.0;
  for (std::size_t i = 0; i < data.targets.size(); ++i) {
    const double d = PredictForest(model, data.features[i]) - data.targets[i];
    sq += d * d;
  }
  const double rmse = std::sqrt(sq / static_cast<double>(data.targets.size()));
  std::cout << "rows=" << data.targets.size() << " features=" << model.n_features
            << " trees=" << params.trees << " training_rmse=" << FormatDouble(rmse) << '\n';
  return kExitOk;
}

int CmdProbe(const RunConfig& c) {
  if (c.loss_spec.empty() == (c.preset == 0)) {
    throw Error(ErrorCode::kInvalidArgument, "give exactly one of --loss or --preset");
  }
  LossSpec spec = c.preset ? CombinationPreset(c.preset) : ParseLossSpec(c.loss_spec);
  if (!c.niqe_form.empty()) spec.niqe_squared = c.niqe_form == "squared";

  const GrayImage init = LoadGray(c.init_path);
  const GrayImage hr = LoadGray(c.hr_path);

  std::optional<MvgModel> natural;
  std::optional<ForestModel> forest;
  if (spec.epsilon > 0.0) {
    if (c.model_path.empty()) throw Error(ErrorCode::kInvalidArgument, "niqe term needs --model");
    natural = LoadModel(c.model_path);
  }
  if (spec.zeta > 0.0 && spec.ma_variant == MaVariant::kRegressor) {
    if (c.forest_path.empty()) throw Error(ErrorCode::kInvalidArgument, "ma-forest term needs --forest");
    forest = LoadForest(c.forest_path);
  }
  LossContext ctx;
  ctx.natural = natural ? &*natural : nullptr;
  ctx.forest = forest ? &*forest : nullptr;
  ctx.msd_patch = c.msd_patch;

  ProbeOptions options;
  options.steps = c.steps;
  options.step_size = c.step_size;
  options.fd_epsilon = c.fd_epsilon;
  options.workers = c.workers;
  const ProbeTrace trace = ProbeDescent(init, hr, spec, ctx, options);

  WithOutput(c.output_prefix + "_trace.csv",
             [&](std::ostream& out) { WriteTraceCsv(trace, out); });
  SaveGray(*trace.final_image, c.output_prefix + "_final.png");
  if (!trace.steps.empty()) {
    std::cout << "initial_loss=" << FormatDouble(trace.steps.front().loss.total)
              << " final_loss=" << FormatDouble(trace.steps.back().loss.total)
              << " steps=" << trace.steps.size() - 1 << '\n';
  }
  if (!trace.completed()) {
    std::cerr << "probe aborted: " << trace.error << '\n';
    return kExitError;
  }
  return kExitOk;
}

int CmdMsdFeatures(const RunConfig& c) {
  const std::vector<std::string> paths = ExpandInputs(c.inputs);
  WithOutput(c.output, [&](std::ostream& out) {
    for (const auto& p : paths) {
      const MsdFeature f = ComputeMsdFeature(LoadGray(p), c.msd_patch);
      out << fs::path(p).filename().string();
      for (double v : c.view == "flat" ? f.flat : f.pooled) out << ',' << FormatDouble(v);
      out << '\n';
    }
  });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explicit perceptual quality metrics (NIQE, Ma spatial discontinuity) and losses"};
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig c;

  app.add_option("--workers", c.workers, "Worker threads")
      ->envname("PERCEPTIQ_WORKERS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto add_niqe_options = [&](CLI::App* cmd) {
    cmd->add_option("--patch", c.niqe_patch, "NIQE patch side")
        ->envname("PERCEPTIQ_NIQE_PATCH")
        ->check(CLI::Range(2, 4096))
        ->capture_default_str();
    cmd->add_option("--window", c.window, "Local statistics window (odd)")
        ->envname("PERCEPTIQ_WINDOW")
        ->check(CLI::Range(3, 99))
        ->capture_default_str();
    cmd->add_option("--threshold", c.threshold, "Sharpness threshold as a fraction of the sharpest tile")
        ->envname("PERCEPTIQ_THRESHOLD")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--weighting", c.weighting, "Window weighting")
        ->check(CLI::IsMember({"gaussian", "box"}))
        ->capture_default_str();
    cmd->add_option("--scales", c.scales, "1 = 18 features per patch, 2 = add half resolution")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
  };
  auto add_msd_patch = [&](CLI::App* cmd) {
    cmd->add_option("--msd-patch", c.msd_patch, "MSD tile side")
        ->envname("PERCEPTIQ_MSD_PATCH")
        ->check(CLI::Range(1, 4096))
        ->capture_default_str();
  };

  CLI::App* fit = app.add_subcommand("fit-niqe", "Fit a natural-image MVG model from a corpus directory");
  fit->add_option("corpus", c.corpus_dir, "Directory of natural images")->required()->check(CLI::ExistingDirectory);
  fit->add_option("-o,--output", c.model_out, "Model file to write")->required();
  add_niqe_options(fit);
  fit->add_option("--note", c.note, "Corpus description stored in the model (default: directory name)");
  fit->add_option("--dump-patches", c.dump_patches, "Write per-patch feature vectors as CSV");

  CLI::App* score = app.add_subcommand("score", "Score images with NIQE, Ma and the perceptual score");
  score->add_option("inputs", c.inputs, "Image files or directories")->required();
  score->add_option("--model", c.model_path, "NIQE model file")->required()->check(CLI::ExistingFile);
  score->add_option("--forest", c.forest_path, "Ma forest file")->check(CLI::ExistingFile);
  score->add_option("--hr-dir", c.hr_dir, "Reference images, paired by file name")->check(CLI::ExistingDirectory);
  score->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  score->add_option("-o,--output", c.output, "Report file (default: stdout)");
  score->add_option("--crop", c.crop, "Pixels shaved from each side before RMSE")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  add_msd_patch(score);

  CLI::App* train = app.add_subcommand("train-forest", "Train the Ma random-forest regressor from CSV");
  train->add_option("csv", c.csv_path, "Rows of features followed by the score")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--output", c.forest_out, "Forest file to write")->required();
  train->add_option("--trees", c.trees, "Number of trees")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--max-depth", c.max_depth, "Maximum depth, 0 = unlimited")->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--min-leaf", c.min_leaf, "Minimum rows per leaf")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--seed", c.seed, "Random seed")->envname("PERCEPTIQ_SEED")->capture_default_str();
  train->add_flag("--no-bootstrap", c.no_bootstrap, "Train every tree on all rows");
  train->add_option("--mtry", c.mtry, "Candidate features per split, 0 = sqrt(n)")->check(CLI::NonNegativeNumber)->capture_default_str();

  CLI::App* probe = app.add_subcommand("probe", "Finite-difference descent on the composite loss");
  probe->add_option("--init", c.init_path, "Starting image")->required()->check(CLI::ExistingFile);
  probe->add_option("--hr", c.hr_path, "Reference image")->required()->check(CLI::ExistingFile);
  probe->add_option("--loss", c.loss_spec, "Loss terms, e.g. mse:10,niqe:0.01,ma-ref:0.001");
  probe->add_option("--preset", c.preset, "Loss-combination row 1..32 (implemented terms only)")->check(CLI::Range(1, 32));
  probe->add_option("--niqe-form", c.niqe_form, "Weight the squared NIQE distance or the distance (default: squared for --loss, plain for --preset)")
      ->check(CLI::IsMember({"squared", "plain"}));
  probe->add_option("--model", c.model_path, "NIQE model file (needed by niqe)")->check(CLI::ExistingFile);
  probe->add_option("--forest", c.forest_path, "Forest file (needed by ma-forest)")->check(CLI::ExistingFile);
  probe->add_option("--steps", c.steps, "Descent steps")->check(CLI::PositiveNumber)->capture_default_str();
  probe->add_option("--step-size", c.step_size, "Step size")->check(CLI::PositiveNumber)->capture_default_str();
  probe->add_option("--fd-epsilon", c.fd_epsilon, "Finite-difference step")->check(CLI::PositiveNumber)->capture_default_str();
  probe->add_option("--output-prefix", c.output_prefix, "Writes <prefix>_trace.csv and <prefix>_final.png")->capture_default_str();
  add_msd_patch(probe);

  CLI::App* msd = app.add_subcommand("msd-features", "Dump MSD spectra as CSV, one row per image");
  msd->add_option("inputs", c.inputs, "Image files or directories")->required();
  msd->add_option("--view", c.view, "pooled (mean spectrum) or flat (all tiles)")
      ->check(CLI::IsMember({"pooled", "flat"}))
      ->capture_default_str();
  msd->add_option("-o,--output", c.output, "CSV file (default: stdout)");
  add_msd_patch(msd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  auto dispatch = [&]() -> int {
    if (fit->parsed()) {
      PrintHeader("fit-niqe", c);
      return CmdFitNiqe(c);
    }
    if (score->parsed()) {
      PrintHeader("score", c);
      return CmdScore(c);
    }
    if (train->parsed()) {
      PrintHeader("train-forest", c);
      return CmdTrainForest(c);
    }
    if (probe->parsed()) {
      PrintHeader("probe", c);
      return CmdProbe(c);
    }
    if (msd->parsed()) {
      PrintHeader("msd-features", c);
      return CmdMsdFeatures(c);
    }
    return kExitError;
  };

  int code = kExitError;
  try {
    code = dispatch();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    code = kExitError;
  }
  if (const auto n = ShapeGrid::ClampCount(); n > 0) {
    std::cerr << "warning: " << n << " shape fit(s) fell outside the grid and were clamped\n";
  }
  return code;
}
