#include "mottx/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <unordered_map>

#include "mottx/geometry.hpp"
#include "mottx/hungarian.hpp"

namespace mottx {

namespace {

/// (gt tid, pred tid) pairs matched in one frame.
std::vector<std::pair<int, int>> match_frame(const std::vector<Detection>& gt, const std::vector<Detection>& pred,
                                             double iou_threshold) {
  std::vector<const Detection*> g;
  std::vector<const Detection*> p;
  for (const Detection& d : gt) {
    if (d.tid >= 0) g.push_back(&d);
  }
  for (const Detection& d : pred) {
    if (d.tid >= 0) p.push_back(&d);
  }
  std::vector<std::pair<int, int>> out;
  if (g.empty() || p.empty()) return out;
  // The offset makes every valid pair outweigh any IoU total, so the number
  // of matches is maximized first.
  const double offset = static_cast<double>(std::min(g.size(), p.size())) + 1.0;
  Eigen::MatrixXd score = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(p.size()));
  for (size_t i = 0; i < g.size(); ++i) {
    for (size_t j = 0; j < p.size(); ++j) {
      const double v = iou(g[i]->box, p[j]->box);
      if (v >= iou_threshold) score(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = offset + v;
    }
  }
  for (const auto& [i, j] : hungarian_max(score).matches) {
    out.emplace_back(g[static_cast<size_t>(i)]->tid, p[static_cast<size_t>(j)]->tid);
  }
  return out;
}

long count_assigned(const FrameDetections& frames) {
  long n = 0;
  for (const auto& f : frames) {
    for (const Detection& d : f) n += d.tid >= 0 ? 1 : 0;
  }
  return n;
}

std::vector<std::vector<std::pair<int, int>>> match_all(const FrameDetections& gt, const FrameDetections& pred,
                                                        double iou_threshold) {
  static const std::vector<Detection> kEmpty;
  const size_t n = std::max(gt.size(), pred.size());
  std::vector<std::vector<std::pair<int, int>>> out(n);
  for (size_t f = 0; f < n; ++f) {
    out[f] = match_frame(f < gt.size() ? gt[f] : kEmpty, f < pred.size() ? pred[f] : kEmpty, iou_threshold);
  }
  return out;
}

}  // namespace

IdentityScore idf1(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold) {
  const auto matches = match_all(gt, pred, iou_threshold);
  std::unordered_map<int, int> gi;
  std::unordered_map<int, int> pi;
  for (const auto& frame : matches) {
    for (const auto& [g, p] : frame) {
      gi.emplace(g, static_cast<int>(gi.size()));
      pi.emplace(p, static_cast<int>(pi.size()));
    }
  }
  IdentityScore s;
  if (!gi.empty()) {
    Eigen::MatrixXd co = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gi.size()), static_cast<Eigen::Index>(pi.size()));
    for (const auto& frame : matches) {
      for (const auto& [g, p] : frame) co(gi[g], pi[p]) += 1.0;
    }
    s.idtp = static_cast<long>(std::lround(assignment_total(co, hungarian_max(co, 0.5))));
  }
  s.idfp = count_assigned(pred) - s.idtp;
  s.idfn = count_assigned(gt) - s.idtp;
  const long denom = 2 * s.idtp + s.idfp + s.idfn;
  s.idf1 = denom > 0 ? 2.0 * static_cast<double>(s.idtp) / static_cast<double>(denom) : 0.0;
  return s;
}

long id_switches(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold) {
  std::unordered_map<int, int> last;
  long switches = 0;
  for (const auto& frame : match_all(gt, pred, iou_threshold)) {
    for (const auto& [g, p] : frame) {
      const auto it = last.find(g);
      if (it != last.end() && it->second != p) ++switches;
      last[g] = p;
    }
  }
  return switches;
}

double association_accuracy(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold) {
  const auto matches = match_all(gt, pred, iou_threshold);
  // Previous appearance per gt id: the predicted id it got, or -1.
  std::unordered_map<int, int> previous;
  long pairs = 0;
  long correct = 0;
  for (size_t f = 0; f < gt.size(); ++f) {
    std::unordered_map<int, int> now;
    for (const auto& [g, p] : matches[f]) now[g] = p;
    for (const Detection& d : gt[f]) {
      if (d.tid < 0) continue;
      const auto here = now.find(d.tid);
      const int assigned = here == now.end() ? -1 : here->second;
      if (const auto it = previous.find(d.tid); it != previous.end()) {
        ++pairs;
        if (assigned >= 0 && it->second == assigned) ++correct;
      }
      previous[d.tid] = assigned;
    }
  }
  return pairs > 0 ? static_cast<double>(correct) / static_cast<double>(pairs) : 1.0;
}

std::map<int, long> gap_counts(const FrameDetections& frames) {
  std::unordered_map<int, int> last;
  std::map<int, long> counts;
  for (size_t f = 0; f < frames.size(); ++f) {
    const int frame = static_cast<int>(f) + 1;
    for (const Detection& d : frames[f]) {
      if (d.tid < 0) continue;
      if (const auto it = last.find(d.tid); it != last.end() && frame - it->second > 1) ++counts[frame - it->second];
      last[d.tid] = frame;
    }
  }
  return counts;
}

std::map<int, double> gap_histogram(const FrameDetections& frames) {
  const auto counts = gap_counts(frames);
  long total = 0;
  for (const auto& [k, n] : counts) total += n;
  std::map<int, double> out;
  for (const auto& [k, n] : counts) out[k] = 100.0 * static_cast<double>(n) / static_cast<double>(total);
  return out;
}

MetricsReport evaluate(const FrameDetections& gt, const FrameDetections& pred, double iou_threshold) {
  MetricsReport r;
  r.identity = idf1(gt, pred, iou_threshold);
  r.id_switches = id_switches(gt, pred, iou_threshold);
  r.association_accuracy = association_accuracy(gt, pred, iou_threshold);
  r.gt_gaps = gap_histogram(gt);
  r.pred_gaps = gap_histogram(pred);
  return r;
}

void write_report(std::ostream& out, const MetricsReport& r) {
  out << std::fixed << std::setprecision(6);
  out << "IDF1 " << r.identity.idf1 << '\n';
  out << "IDTP " << r.identity.idtp << '\n';
  out << "IDFP " << r.identity.idfp << '\n';
  out << "IDFN " << r.identity.idfn << '\n';
  out << "ID_switches " << r.id_switches << '\n';
  out << "association_accuracy " << r.association_accuracy << '\n';
  auto hist = [&](const char* name, const std::map<int, double>& h) {
    out << name;
    if (h.empty()) out << " none";
    for (const auto& [k, v] : h) out << ' ' << k << ':' << std::setprecision(2) << v << std::setprecision(6);
    out << '\n';
  };
  hist("gt_gap_histogram", r.gt_gaps);
  hist("pred_gap_histogram", r.pred_gaps);
  out.unsetf(std::ios::floatfield);
}

void write_histogram_csv(std::ostream& out, const std::map<int, double>& histogram) {
  out << "interval,percent\n";
  for (const auto& [k, v] : histogram) out << k << ',' << v << '\n';
}

}  // namespace mottx
