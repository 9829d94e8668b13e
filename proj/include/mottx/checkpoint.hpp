#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "mottx/model.hpp"
#include "mottx/synth.hpp"

namespace mottx {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic "MOTXCKPT", format version, the model config,
/// named arrays with shape headers as little-endian float32, and a trailing
/// FNV-1a 64 checksum of everything before it.
void save_checkpoint(std::ostream& out, const ModelParams<float>& params);
void save_checkpoint(const std::filesystem::path& path, const ModelParams<float>& params);

/// Throws DataError on a bad magic, version, checksum or truncated file, and
/// ShapeError when `expected` is given and differs from the stored config.
ModelParams<float> load_checkpoint(std::istream& in, const std::optional<ModelConfig>& expected = std::nullopt);
ModelParams<float> load_checkpoint(const std::filesystem::path& path,
                                   const std::optional<ModelConfig>& expected = std::nullopt);

/// Appearance sidecar: magic "MOTXAPPR", version, seed, brightness jitter,
/// noise, object count, vector length, the base vectors as little-endian
/// float32, and the same trailing checksum.
void save_appearance(const std::filesystem::path& path, const AppearanceBank& bank);
AppearanceBank load_appearance(const std::filesystem::path& path);

}  // namespace mottx
