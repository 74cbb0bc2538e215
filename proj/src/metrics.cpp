#include "pirnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "pirnn/errors.hpp"
#include "pirnn/hungarian.hpp"

namespace pirnn {

namespace {

Vec3 row3(const Tensor& t, std::size_t i) { return {t(i, 0), t(i, 1), t(i, 2)}; }

void fill_error_stats(TrackReport& r) {
  if (r.errors_deg.empty()) {
    r.mean_error_deg = r.median_error_deg = 0.0;
    return;
  }
  double s = 0.0;
  for (double e : r.errors_deg) s += e;
  r.mean_error_deg = s / static_cast<double>(r.errors_deg.size());
  std::vector<double> sorted = r.errors_deg;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_error_deg = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace

double angular_error_deg(const Vec3& a, const Vec3& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw UsageError("angular_error: zero-length direction");
  const double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

FrameMatch match_frame(const Tensor& preds, std::span<const Vec3> gts, double gate_deg, double activity_threshold) {
  std::vector<std::size_t> active;
  for (std::size_t m = 0; m < preds.rows(); ++m) {
    if (norm(row3(preds, m)) >= activity_threshold) active.push_back(m);
  }
  FrameMatch fm;
  fm.slot_of_gt.assign(gts.size(), -1);
  std::vector<bool> pred_used(active.size(), false);
  if (!active.empty() && !gts.empty()) {
    std::vector<double> err(active.size() * gts.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t s = 0; s < gts.size(); ++s) err[a * gts.size() + s] = angular_error_deg(row3(preds, active[a]), gts[s]);
    }
    // The solver wants the larger side as the slots.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (active index, gt)
    if (active.size() >= gts.size()) {
      CostMatrix c(active.size(), gts.size());
      c.cost = err;
      const Assignment asg = hungarian(c);
      for (std::size_t s = 0; s < gts.size(); ++s) pairs.emplace_back(static_cast<std::size_t>(asg.slot_of_gt[s]), s);
    } else {
      CostMatrix c(gts.size(), active.size());
      for (std::size_t s = 0; s < gts.size(); ++s) {
        for (std::size_t a = 0; a < active.size(); ++a) c(s, a) = err[a * gts.size() + s];
      }
      const Assignment asg = hungarian(c);
      for (std::size_t a = 0; a < active.size(); ++a) pairs.emplace_back(a, static_cast<std::size_t>(asg.slot_of_gt[a]));
      std::sort(pairs.begin(), pairs.end(), [](auto x, auto y) { return x.second < y.second; });
    }
    for (auto [a, s] : pairs) {
      const double e = err[a * gts.size() + s];
      if (e > gate_deg) continue;
      fm.slot_of_gt[s] = static_cast<int>(active[a]);
      fm.error_deg.push_back(e);
      pred_used[a] = true;
    }
  }
  fm.misses = static_cast<std::size_t>(std::count(fm.slot_of_gt.begin(), fm.slot_of_gt.end(), -1));
  fm.false_positives = static_cast<std::size_t>(std::count(pred_used.begin(), pred_used.end(), false));
  return fm;
}

std::size_t ids_count(std::span<const FrameTruth> truth, std::span<const FrameMatch> matches) {
  if (truth.size() != matches.size()) throw DimensionError("ids_count: truth and matches differ in length");
  std::map<int, int> last_slot;
  std::size_t switches = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (std::size_t s = 0; s < truth[t].ids.size(); ++s) {
      const int slot = matches[t].slot_of_gt[s];
      if (slot < 0) continue;
      auto [it, inserted] = last_slot.try_emplace(truth[t].ids[s], slot);
      if (!inserted && it->second != slot) {
        ++switches;
        it->second = slot;
      }
    }
  }
  return switches;
}

double TrackReport::ids_per_active_minute() const {
  const double minutes = active_minutes();
  return minutes > 0.0 ? static_cast<double>(identity_switches) / minutes : 0.0;
}

TrackReport evaluate_tracks(std::span<const Tensor> preds, std::span<const FrameTruth> truth, double frame_period,
                            const MetricsConfig& cfg) {
  if (preds.size() != truth.size()) throw DimensionError("evaluate_tracks: sequences differ in length");
  TrackReport r;
  r.frames = preds.size();
  r.frame_period = frame_period;
  std::vector<FrameMatch> matches;
  matches.reserve(preds.size());
  for (std::size_t t = 0; t < preds.size(); ++t) {
    FrameMatch fm = match_frame(preds[t], truth[t].doas, cfg.gate_deg, cfg.activity_threshold);
    r.active_gt_frames += truth[t].doas.size();
    r.misses += fm.misses;
    r.false_positives += fm.false_positives;
    r.matched += fm.error_deg.size();
    r.errors_deg.insert(r.errors_deg.end(), fm.error_deg.begin(), fm.error_deg.end());
    matches.push_back(std::move(fm));
  }
  r.identity_switches = ids_count(truth, matches);
  fill_error_stats(r);
  return r;
}

TrackReport aggregate(std::span<const TrackReport> reports) {
  TrackReport total;
  if (!reports.empty()) total.frame_period = reports.front().frame_period;
  for (const auto& r : reports) {
    total.frames += r.frames;
    total.active_gt_frames += r.active_gt_frames;
    total.matched += r.matched;
    total.misses += r.misses;
    total.false_positives += r.false_positives;
    total.identity_switches += r.identity_switches;
    total.errors_deg.insert(total.errors_deg.end(), r.errors_deg.begin(), r.errors_deg.end());
  }
  fill_error_stats(total);
  return total;
}

DetAccumulator::DetAccumulator(std::vector<double> thresholds)
    : thresholds_(std::move(thresholds)), fps_(thresholds_.size(), 0), misses_(thresholds_.size(), 0) {
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!(thresholds_[i] > 0.0 && thresholds_[i] < 1.0)) throw UsageError("DET thresholds must lie in (0, 1)");
    if (i && thresholds_[i] < thresholds_[i - 1]) throw UsageError("DET thresholds must be sorted");
  }
}

void DetAccumulator::add(std::span<const Tensor> preds, std::span<const FrameTruth> truth, double gate_deg) {
  if (preds.size() != truth.size()) throw DimensionError("det_curve: sequences differ in length");
  frames_ += preds.size();
  for (const auto& f : truth) gt_frames_ += f.doas.size();
  for (std::size_t k = 0; k < thresholds_.size(); ++k) {
    for (std::size_t t = 0; t < preds.size(); ++t) {
      const FrameMatch fm = match_frame(preds[t], truth[t].doas, gate_deg, thresholds_[k]);
      fps_[k] += fm.false_positives;
      misses_[k] += fm.misses;
    }
  }
}

std::vector<DetPoint> DetAccumulator::points() const {
  std::vector<DetPoint> out;
  for (std::size_t k = 0; k < thresholds_.size(); ++k) {
    DetPoint p;
    p.threshold = thresholds_[k];
    p.fp_rate = frames_ ? static_cast<double>(fps_[k]) / static_cast<double>(frames_) : 0.0;
    p.miss_rate_defined = gt_frames_ > 0;
    p.miss_rate = gt_frames_ ? static_cast<double>(misses_[k]) / static_cast<double>(gt_frames_) : 0.0;
    out.push_back(p);
  }
  return out;
}

std::vector<DetPoint> det_curve(std::span<const Tensor> preds, std::span<const FrameTruth> truth,
                                std::span<const double> thresholds, double gate_deg) {
  DetAccumulator acc(std::vector<double>(thresholds.begin(), thresholds.end()));
  acc.add(preds, truth, gate_deg);
  return acc.points();
}

std::string report_csv(std::span<const TrackReport> scenes, const TrackReport& total) {
  std::ostringstream out;
  out.precision(10);
  out << "# ids_per_active_minute = identity switches / (active ground-truth frames * frame period / 60)\n";
  out << "scene,frames,active_gt_frames,matched,misses,false_positives,identity_switches,ids_per_active_minute,"
         "mean_error_deg,median_error_deg\n";
  auto row = [&](const std::string& name, const TrackReport& r) {
    out << name << ',' << r.frames << ',' << r.active_gt_frames << ',' << r.matched << ',' << r.misses << ','
        << r.false_positives << ',' << r.identity_switches << ',' << r.ids_per_active_minute() << ','
        << r.mean_error_deg << ',' << r.median_error_deg << '\n';
  };
  for (std::size_t i = 0; i < scenes.size(); ++i) row(std::to_string(i), scenes[i]);
  row("all", total);
  return out.str();
}

nlohmann::json report_json(const TrackReport& r) {
  return {{"frames", r.frames},
          {"active_gt_frames", r.active_gt_frames},
          {"matched", r.matched},
          {"misses", r.misses},
          {"false_positives", r.false_positives},
          {"identity_switches", r.identity_switches},
          {"ids_per_active_minute", r.ids_per_active_minute()},
          {"mean_error_deg", r.mean_error_deg},
          {"median_error_deg", r.median_error_deg}};
}

std::string det_csv(std::span<const DetPoint> points) {
  std::ostringstream out;
  out.precision(10);
  out << "# fp_rate = false positives per frame; miss_rate = misses per active ground-truth frame\n";
  out << "threshold,fp_rate,miss_rate,miss_rate_defined\n";
  for (const auto& p : points) {
    out << p.threshold << ',' << p.fp_rate << ',' << p.miss_rate << ',' << (p.miss_rate_defined ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace pirnn
