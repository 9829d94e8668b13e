#include "mottx/dataset.hpp"

#include <algorithm>

#include "mottx/checkpoint.hpp"
#include "mottx/config.hpp"
#include "mottx/errors.hpp"

namespace fs = std::filesystem;

namespace mottx {

ScenePatchSource::ScenePatchSource(Scene scene) : scene_(std::make_unique<Scene>(std::move(scene))) {
  inner_ = make_patch_source(*scene_);
}

ScenePatchSource::ScenePatchSource(Scene scene, AppearanceBank bank)
    : scene_(std::make_unique<Scene>(std::move(scene))) {
  inner_ = std::make_unique<AppearancePatchSource>(std::move(bank), scene_->config().width, scene_->config().height);
}

std::shared_ptr<const PatchSource> load_patch_source(const fs::path& scene_file,
                                                     const std::optional<fs::path>& appearance) {
  SceneConfig config;
  const KeyValues kv = KeyValues::read(scene_file);
  kv.apply(config);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(scene_file.string() + ": " + e.what());
  }
  Scene scene = generate(config);
  if (!config.render && appearance && fs::exists(*appearance)) {
    return std::make_shared<ScenePatchSource>(std::move(scene), load_appearance(*appearance));
  }
  return std::make_shared<ScenePatchSource>(std::move(scene));
}

void write_sequence(const fs::path& dir, const Scene& scene, const NoiseConfig& noise) {
  fs::create_directories(dir);
  write_mot(dir / kGtFile, scene.ground_truth());
  write_mot(dir / kDetFile, corrupt(scene.ground_truth(), noise, scene.config().width, scene.config().height), true);
  KeyValues kv = KeyValues::from(scene.config());
  kv.merge(KeyValues::from(noise));
  kv.write(dir / kSceneFile);
  if (!scene.config().render) save_appearance(dir / kAppearanceFile, AppearanceBank(scene));
}

TrainingSequence load_training_sequence(const fs::path& dir) {
  TrainingSequence seq;
  seq.frames = read_mot(dir / kGtFile).frames;
  seq.source = load_patch_source(dir / kSceneFile, dir / kAppearanceFile);
  return seq;
}

std::vector<fs::path> sequence_dirs(const fs::path& dir, const char* marker) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  if (fs::exists(dir / marker)) return {dir};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / marker)) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no sequences with " + std::string(marker) + " under " + dir.string());
  return out;
}

}  // namespace mottx
