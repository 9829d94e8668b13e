// Command-line front end: synth, train, track, eval, gradcheck.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "mottx/checkpoint.hpp"
#include "mottx/config.hpp"
#include "mottx/dataset.hpp"
#include "mottx/errors.hpp"
#include "mottx/metrics.hpp"
#include "mottx/mot_io.hpp"
#include "mottx/objective.hpp"
#include "mottx/tracker.hpp"
#include "mottx/training.hpp"

namespace fs = std::filesystem;
using namespace mottx;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flags that mirror config keys: `--d-model` sets `d_model`. Values given on
// the command line override the --config file.
struct KeyFlags {
  std::map<std::string, std::string> given;

  void add(CLI::App* app, const KeyValues& defaults) {
    for (const auto& [key, value] : defaults.values()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (app->get_option_no_throw(flag) != nullptr) continue;
      app->add_option(flag, given[key], "default: " + (value.empty() ? std::string("none") : value));
    }
  }

  KeyValues resolve(CLI::App* app, const std::string& config_path) const {
    KeyValues kv;
    if (!config_path.empty()) kv = KeyValues::read(config_path);
    for (const auto& [key, value] : given) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (app->count(flag) > 0) kv.set(key, value);
    }
    return kv;
  }
};

void reject_unknown(const KeyValues& kv) {
  const auto unused = kv.unused();
  if (unused.empty()) return;
  std::string keys;
  for (const auto& k : unused) keys += (keys.empty() ? "" : ", ") + k;
  throw DataError("unknown config keys: " + keys);
}

template <typename Config>
Config checked(Config c) {
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------

int run_synth(CLI::App* app, const KeyFlags& flags, const std::string& config, const fs::path& out, int count) {
  const KeyValues kv = flags.resolve(app, config);
  SceneConfig scene;
  NoiseConfig noise;
  kv.apply(scene);
  kv.apply(noise);
  reject_unknown(kv);
  checked(scene);
  checked(noise);
  for (int i = 0; i < count; ++i) {
    SceneConfig c = scene;
    NoiseConfig n = noise;
    c.seed += static_cast<std::uint64_t>(i);
    n.seed += static_cast<std::uint64_t>(i);
    const fs::path dir = count == 1 ? out : out / ("seq" + std::to_string(i + 1));
    write_sequence(dir, generate(c), n);
    std::cout << "wrote " << dir.string() << '\n';
  }
  return kOk;
}

int run_train(CLI::App* app, const KeyFlags& flags, const std::string& config, const fs::path& data,
              const fs::path& out, const std::string& log_path, const std::string& init) {
  const KeyValues kv = flags.resolve(app, config);
  ModelConfig model;
  TrainConfig train_cfg;
  kv.apply(model);
  kv.apply(train_cfg);
  reject_unknown(kv);
  checked(model);
  checked(train_cfg);

  std::vector<TrainingSequence> sequences;
  for (const fs::path& dir : sequence_dirs(data)) sequences.push_back(load_training_sequence(dir));

  ModelParams<float> params = init.empty() ? ModelParams<float>::random(model, train_cfg.seed)
                                           : load_checkpoint(fs::path(init), model);
  std::ofstream log_file;
  if (!log_path.empty()) {
    log_file.open(log_path);
    if (!log_file) throw DataError("cannot write " + log_path);
    log_file << "step,epoch,lr,loss,grad_norm\n";
  }
  auto on_step = [&](const TrainLogEntry& e) {
    if (log_file) log_file << e.step << ',' << e.epoch << ',' << e.lr << ',' << e.loss << ',' << e.grad_norm << '\n';
  };
  auto on_epoch = [&](const TrainLogEntry& e) {
    std::cout << "epoch " << e.epoch << " steps " << e.step << " lr " << e.lr << " loss " << e.loss << std::endl;
  };
  const TrainResult result = train(sequences, params, train_cfg, default_threads(), on_step, on_epoch);
  save_checkpoint(out, result.params);
  if (result.diverged) {
    std::cerr << "training diverged (" << result.message << "); wrote the last finite parameters to "
              << out.string() << '\n';
    return kNumeric;
  }
  std::cout << "wrote " << out.string() << '\n';
  return kOk;
}

FrameDetections track_sequence(const ModelParams<float>& params, const TrackerConfig& cfg,
                               const FrameDetections& dets, const PatchSource& source) {
  Tracker tracker(params, cfg, source.frame_width(), source.frame_height());
  for (size_t f = 0; f < dets.size(); ++f) tracker.step(static_cast<int>(f) + 1, dets[f], source);
  const auto trajectories = tracker.finish();
  return trajectories_to_frames(trajectories);
}

std::shared_ptr<const PatchSource> source_for(const fs::path& det, const std::string& scene,
                                              const std::string& appearance) {
  const fs::path scene_file = scene.empty() ? det.parent_path() / kSceneFile : fs::path(scene);
  if (!fs::exists(scene_file)) {
    throw UsageError("no scene description for " + det.string() + "; pass --scene");
  }
  const fs::path app_file = appearance.empty() ? scene_file.parent_path() / kAppearanceFile : fs::path(appearance);
  return load_patch_source(scene_file, app_file);
}

int run_track(CLI::App* app, const KeyFlags& flags, const std::string& config, const fs::path& det,
              const fs::path& ckpt, const fs::path& out, const std::string& scene, const std::string& appearance) {
  const KeyValues kv = flags.resolve(app, config);
  TrackerConfig cfg;
  kv.apply(cfg);
  reject_unknown(kv);
  checked(cfg);
  ModelParams<float> params = load_checkpoint(ckpt);
  params.config.max_window = std::max(params.config.max_window, cfg.window_T + 1);

  if (!fs::is_directory(det)) {
    const auto source = source_for(det, scene, appearance);
    write_mot(out, track_sequence(params, cfg, read_mot(det).frames, *source));
    std::cout << "wrote " << out.string() << '\n';
    return kOk;
  }

  // One tracker per sequence; sequences run concurrently.
  const auto dirs = sequence_dirs(det, kDetFile);
  fs::create_directories(out);
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(dirs.size());
  auto worker = [&] {
    for (size_t i = next++; i < dirs.size(); i = next++) {
      try {
        const fs::path file = dirs[i] / kDetFile;
        const auto source = source_for(file, "", "");
        write_mot(out / (dirs[i].filename().string() + ".txt"),
                  track_sequence(params, cfg, read_mot(file).frames, *source));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::min<int>(default_threads(), static_cast<int>(dirs.size()));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::cout << "wrote " << dirs.size() << " result files to " << out.string() << '\n';
  return kOk;
}

int run_eval(const fs::path& gt, const fs::path& pred, const std::string& out, const std::string& hist_csv,
             double iou_threshold) {
  const MetricsReport report = evaluate(read_mot(gt).frames, read_mot(pred).frames, iou_threshold);
  write_report(std::cout, report);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw DataError("cannot write " + out);
    write_report(f, report);
  }
  if (!hist_csv.empty()) {
    std::ofstream f(hist_csv);
    if (!f) throw DataError("cannot write " + hist_csv);
    write_histogram_csv(f, report.pred_gaps);
  }
  return kOk;
}

int run_gradcheck(const KeyValues& kv, GradCheckOptions options) {
  kv.apply(options.config);
  reject_unknown(kv);
  checked(options.config);
  const GradCheckReport r = gradient_check(options);
  std::cout << "checked " << r.checked << " entries (" << r.skipped << " below " << options.min_grad << ")\n"
            << "loss " << r.loss << '\n'
            << "max relative error " << r.max_rel_error << " at " << r.worst_param << '\n'
            << "failures " << r.failures << '\n'
            << (r.passed() ? "PASS" : "FAIL") << '\n';
  return r.passed() ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformer association tracker: synthetic data, training, tracking and evaluation"};
  app.require_subcommand(1);

  std::string config;
  KeyFlags synth_flags, train_flags, track_flags, grad_flags;

  auto* synth = app.add_subcommand("synth", "Generate synthetic sequences (gt, detections, scene file)");
  fs::path synth_out;
  int synth_count = 1;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--count", synth_count, "Number of sequences (seeds seed, seed+1, ...)")->check(CLI::PositiveNumber);
  synth->add_option("--config", config, "key = value file")->check(CLI::ExistingFile);
  synth_flags.add(synth, KeyValues::from(SceneConfig{}));
  synth_flags.add(synth, KeyValues::from(NoiseConfig{}));

  auto* train_cmd = app.add_subcommand("train", "Train a model on sequence directories");
  fs::path data, train_out;
  std::string log_path, init;
  train_cmd->add_option("--data", data, "Sequence directory or directory of sequences")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--out", train_out, "Checkpoint to write")->required();
  train_cmd->add_option("--log", log_path, "CSV training log");
  train_cmd->add_option("--init", init, "Start from this checkpoint")->check(CLI::ExistingFile);
  train_cmd->add_option("--config", config, "key = value file")->check(CLI::ExistingFile);
  train_flags.add(train_cmd, KeyValues::from(ModelConfig{}));
  train_flags.add(train_cmd, KeyValues::from(TrainConfig{}));

  auto* track = app.add_subcommand("track", "Associate detections into trajectories");
  fs::path det, ckpt, track_out;
  std::string scene, appearance;
  track->add_option("--det", det, "Detection file, or directory of sequences")->required()->check(CLI::ExistingPath);
  track->add_option("--ckpt", ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  track->add_option("--out", track_out, "Result file (directory when --det is one)")->required();
  track->add_option("--scene", scene, "Scene file (default: scene.cfg next to --det)");
  track->add_option("--appearance", appearance, "Appearance sidecar (default: next to the scene file)");
  track->add_option("--config", config, "key = value file")->check(CLI::ExistingFile);
  track_flags.add(track, KeyValues::from(TrackerConfig{}));

  auto* eval = app.add_subcommand("eval", "Score a result file against ground truth");
  fs::path gt, pred;
  std::string report_out, hist_csv;
  double iou_threshold = 0.5;
  eval->add_option("--gt", gt, "Ground-truth MOT file")->required()->check(CLI::ExistingFile);
  eval->add_option("--pred", pred, "Result MOT file")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", report_out, "Report file");
  eval->add_option("--hist-csv", hist_csv, "Gap histogram of the result as CSV");
  eval->add_option("--iou", iou_threshold, "Box match threshold")->check(CLI::Range(0.0, 1.0));

  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  GradCheckOptions gopt;
  gopt.config.d_model = 8;
  gopt.config.n_layers = 1;
  gopt.config.n_heads = 2;
  gopt.config.max_window = 8;
  grad->add_option("--frames", gopt.frames, "Clip length")->check(CLI::Range(2, 8));
  grad->add_option("--objects", gopt.objects_per_frame, "Objects per frame")->check(CLI::Range(1, 16));
  grad->add_option("--seed", gopt.seed, "Random seed");
  grad->add_option("--step", gopt.step, "Finite-difference step");
  grad->add_option("--tol", gopt.rel_tol, "Relative error tolerance");
  grad->add_option("--min-grad", gopt.min_grad, "Skip entries with smaller |gradient|");
  grad->add_flag("--richardson", gopt.richardson, "Extrapolate the difference quotient from steps h and h/2");
  grad->add_option("--config", config, "key = value file")->check(CLI::ExistingFile);
  int layers_alias = 0;
  int heads_alias = 0;
  grad->add_option("--layers", layers_alias, "Same as --n-layers");
  grad->add_option("--heads", heads_alias, "Same as --n-heads");
  grad_flags.add(grad, KeyValues::from(gopt.config));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return kUsage;
  }

  try {
    if (synth->parsed()) return run_synth(synth, synth_flags, config, synth_out, synth_count);
    if (train_cmd->parsed()) return run_train(train_cmd, train_flags, config, data, train_out, log_path, init);
    if (track->parsed()) return run_track(track, track_flags, config, det, ckpt, track_out, scene, appearance);
    if (eval->parsed()) return run_eval(gt, pred, report_out, hist_csv, iou_threshold);
    if (grad->parsed()) {
      KeyValues kv = grad_flags.resolve(grad, config);
      if (grad->count("--layers")) kv.set("n_layers", std::to_string(layers_alias));
      if (grad->count("--heads")) kv.set("n_heads", std::to_string(heads_alias));
      return run_gradcheck(kv, gopt);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
