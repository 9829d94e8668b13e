#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mottx/detection.hpp"

namespace mottx {

/// Detections grouped by frame: frames[k] holds frame k + 1.
using FrameDetections = std::vector<std::vector<Detection>>;

struct MotData {
  FrameDetections frames;
  /// Number of confidences that were outside [0,1] and got clamped.
  size_t clamped_conf = 0;
};

/// Parses `frame,id,bb_left,bb_top,bb_width,bb_height,conf[,x,y,z]` lines.
/// Blank lines and lines starting with '#' are skipped. Throws DataError
/// naming the offending line on malformed input.
MotData parse_mot(std::istream& in, const std::string& source = "<stream>");
MotData read_mot(const std::filesystem::path& path);

/// One line per detection sorted by (frame, tid). Entries with tid -1 are
/// skipped unless `include_unassigned` is set (detector output files).
void write_mot(std::ostream& out, const FrameDetections& frames, bool include_unassigned = false);
void write_mot(const std::filesystem::path& path, const FrameDetections& frames, bool include_unassigned = false);

}  // namespace mottx
