#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include "mottx/mot_io.hpp"

namespace mottx {

struct IdentityScore {
  double idf1 = 0.0;
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
};

/// Identity F1. Boxes are matched per frame at IoU >= `iou_threshold`
/// (maximum-cardinality, then maximum-IoU assignment), then one global
/// one-to-one id mapping maximizes the number of matched pairs whose ids
/// correspond. Entries with tid < 0 are ignored on both sides.
IdentityScore idf1(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold = 0.5);

/// Frames at which a ground-truth identity's matched predicted id differs
/// from the one it was last matched to.
long id_switches(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold = 0.5);

/// Fraction of consecutive appearances of each ground-truth identity (frames
/// f and f' with nothing in between, both matched) whose predicted ids agree.
/// Returns 1 when there are no such pairs.
double association_accuracy(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold = 0.5);

/// Percentage of each frame difference > 1 between successive appearances of
/// the same identity.
std::map<int, double> gap_histogram(const FrameDetections& frames);

/// Raw counts behind gap_histogram.
std::map<int, long> gap_counts(const FrameDetections& frames);

struct MetricsReport {
  IdentityScore identity;
  long id_switches = 0;
  double association_accuracy = 0.0;
  std::map<int, double> gt_gaps;
  std::map<int, double> pred_gaps;
};

MetricsReport evaluate(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold = 0.5);

void write_report(std::ostream& out, const MetricsReport& report);
/// `interval,percent` lines.
void write_histogram_csv(std::ostream& out, const std::map<int, double>& histogram);

}  // namespace mottx
