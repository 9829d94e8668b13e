#pragma once

#include "mottx/geometry.hpp"

namespace mottx {

inline constexpr int kUnassigned = -1;

/// One detected (or ground-truth) object in one frame.
///
/// `x`, `y`, `z` are the trailing MOTChallenge columns and are passed through
/// untouched. Synthetic detection files use `x` to carry the appearance key
/// when frames are not rendered.
struct Detection {
  int frame = 1;
  int tid = kUnassigned;
  BBox box{0.5, 0.5, 1.0, 1.0};
  double conf = 1.0;
  double x = -1.0;
  double y = -1.0;
  double z = -1.0;
};

}  // namespace mottx
