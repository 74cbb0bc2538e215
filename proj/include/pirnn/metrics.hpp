#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pirnn/pit_loss.hpp"
#include "pirnn/tensor.hpp"
#include "pirnn/vec3.hpp"

namespace pirnn {

struct MetricsConfig {
  double gate_deg = 20.0;
  double activity_threshold = 0.5;
  std::vector<double> det_thresholds = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
};

// Angle between two directions in degrees, in [0, 180]. Inputs are renormalized.
double angular_error_deg(const Vec3& a, const Vec3& b);

struct FrameMatch {
  std::vector<int> slot_of_gt;     // -1 when the ground truth is missed
  std::vector<double> error_deg;   // angular error of each matched pair, in gt order
  std::size_t misses = 0;
  std::size_t false_positives = 0;
};

// Optimal angular matching between ground truths and active predictions, then gated.
FrameMatch match_frame(const Tensor& preds, std::span<const Vec3> gts, double gate_deg, double activity_threshold);

// Number of times a trajectory's matched slot differs from the slot at its previous matched frame.
std::size_t ids_count(std::span<const FrameTruth> truth, std::span<const FrameMatch> matches);

struct TrackReport {
  std::size_t frames = 0;
  std::size_t active_gt_frames = 0;
  std::size_t matched = 0;
  std::size_t misses = 0;
  std::size_t false_positives = 0;
  std::size_t identity_switches = 0;
  double frame_period = 0.1;
  double mean_error_deg = 0.0;
  double median_error_deg = 0.0;
  std::vector<double> errors_deg;  // kept for aggregation, not serialized

  double active_minutes() const { return static_cast<double>(active_gt_frames) * frame_period / 60.0; }
  double ids_per_active_minute() const;
};

TrackReport evaluate_tracks(std::span<const Tensor> preds, std::span<const FrameTruth> truth, double frame_period,
                            const MetricsConfig& cfg);
// Pools counts and errors; rates are recomputed from the pooled totals.
TrackReport aggregate(std::span<const TrackReport> reports);

struct DetPoint {
  double threshold = 0.0;
  double fp_rate = 0.0;    // false positives per frame
  double miss_rate = 0.0;  // misses per active ground-truth frame
  bool miss_rate_defined = true;
};

std::vector<DetPoint> det_curve(std::span<const Tensor> preds, std::span<const FrameTruth> truth,
                                std::span<const double> thresholds, double gate_deg);

// Accumulates DET counts over several scenes before dividing.
class DetAccumulator {
 public:
  explicit DetAccumulator(std::vector<double> thresholds);
  void add(std::span<const Tensor> preds, std::span<const FrameTruth> truth, double gate_deg);
  std::vector<DetPoint> points() const;

 private:
  std::vector<double> thresholds_;
  std::vector<std::size_t> fps_, misses_;
  std::size_t frames_ = 0, gt_frames_ = 0;
};

// Report files: one CSV row per scene plus an "all" aggregate row.
std::string report_csv(std::span<const TrackReport> scenes, const TrackReport& total);
nlohmann::json report_json(const TrackReport& r);
std::string det_csv(std::span<const DetPoint> points);

}  // namespace pirnn
