#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "mottx/mot_io.hpp"
#include "mottx/synth.hpp"
#include "mottx/training.hpp"

namespace mottx {

/// File names inside one sequence directory.
inline constexpr const char* kGtFile = "gt.txt";
inline constexpr const char* kDetFile = "det.txt";
inline constexpr const char* kSceneFile = "scene.cfg";
inline constexpr const char* kAppearanceFile = "appearance.bin";

/// Patch source that owns the scene it draws from.
class ScenePatchSource : public PatchSource {
 public:
  explicit ScenePatchSource(Scene scene);
  ScenePatchSource(Scene scene, AppearanceBank bank);

  const Scene& scene() const { return *scene_; }
  int frame_width() const override { return inner_->frame_width(); }
  int frame_height() const override { return inner_->frame_height(); }
  void patches(int frame, std::span<const Detection> dets, TensorF& out) const override {
    inner_->patches(frame, dets, out);
  }

 private:
  std::unique_ptr<Scene> scene_;
  std::unique_ptr<PatchSource> inner_;
};

/// Rebuilds the patch source of a generated sequence from its scene file,
/// using the appearance sidecar when given and the scene is not rendered.
std::shared_ptr<const PatchSource> load_patch_source(const std::filesystem::path& scene_file,
                                                     const std::optional<std::filesystem::path>& appearance = {});

/// Writes gt.txt, det.txt, scene.cfg and (for unrendered scenes)
/// appearance.bin into `dir`.
void write_sequence(const std::filesystem::path& dir, const Scene& scene, const NoiseConfig& noise);

/// Reads gt.txt plus the patch source of one sequence directory.
TrainingSequence load_training_sequence(const std::filesystem::path& dir);

/// `dir` itself when it holds gt.txt, otherwise its immediate
/// subdirectories that do, sorted by name.
std::vector<std::filesystem::path> sequence_dirs(const std::filesystem::path& dir, const char* marker = kGtFile);

}  // namespace mottx
