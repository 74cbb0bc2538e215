#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "pirnn/errors.hpp"
#include "pirnn/metrics.hpp"
#include "pirnn/scene.hpp"

using namespace pirnn;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Vec3 tilt(const Vec3& v, double deg) {
  const Vec3 axis = normalized(cross(v, std::abs(v[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0}));
  return rotate(v, axis, deg * kDeg);
}

Tensor frame_of(std::size_t M, const std::vector<std::pair<std::size_t, Vec3>>& rows) {
  Tensor t = Tensor::zeros({M, 3});
  for (const auto& [m, v] : rows)
    for (std::size_t k = 0; k < 3; ++k) t(m, k) = v[k];
  return t;
}

FrameMatch matched(std::vector<int> slots) {
  FrameMatch m;
  m.slot_of_gt = std::move(slots);
  return m;
}

Tensor permute_slots(const Tensor& t, const std::vector<std::size_t>& perm) { return oracle::permute_rows(t, perm); }

Tensor scaled_copy(Tensor t, double s) {
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) t(i, j) *= s;
  return t;
}

}  // namespace

TEST_CASE("angular_error examples and symmetry") {
  const Vec3 x{1, 0, 0};
  CHECK(angular_error_deg(x, x) == 0.0);
  CHECK(std::abs(angular_error_deg(x, {0, 1, 0}) - 90.0) <= 1e-12);
  CHECK(std::abs(angular_error_deg(x, {-1, 0, 0}) - 180.0) <= 1e-12);
  CHECK(std::abs(angular_error_deg({2, 0, 0}, {0, 0, 0.5}) - 90.0) <= 1e-12);
  CHECK_THROWS_AS(angular_error_deg(x, {0, 0, 0}), UsageError);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Vec3 a = rng.unit_vector(), b = rng.unit_vector();
    const double e = angular_error_deg(a, b);
    CHECK(std::abs(e - angular_error_deg(b, a)) <= 1e-12);
    CHECK(e >= 0.0);
    CHECK(e <= 180.0);
  }
}

TEST_CASE("match_frame examples") {
  const Vec3 g{0, 0, 1};
  const auto near = match_frame(frame_of(4, {{2, tilt(g, 3.0)}}), std::span(&g, 1), 20.0, 0.5);
  CHECK(near.slot_of_gt == std::vector<int>{2});
  CHECK(near.misses == 0);
  CHECK(near.false_positives == 0);
  CHECK(std::abs(near.error_deg[0] - 3.0) <= 1e-9);

  const auto far = match_frame(frame_of(4, {{1, tilt(g, 25.0)}}), std::span(&g, 1), 20.0, 0.5);
  CHECK(far.slot_of_gt == std::vector<int>{-1});
  CHECK(far.misses == 1);
  CHECK(far.false_positives == 1);

  // Inactive rows never match, even when they point the right way.
  const auto quiet = match_frame(frame_of(4, {{0, scaled(g, 0.3)}}), std::span(&g, 1), 20.0, 0.5);
  CHECK(quiet.misses == 1);
  CHECK(quiet.false_positives == 0);
}

TEST_CASE("match_frame picks the optimal pairing of two gts") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Vec3> gts = {rng.unit_vector(), rng.unit_vector()};
    const Vec3 p0 = tilt(gts[trial % 2], rng.uniform(0, 10)), p1 = rng.unit_vector();
    const Tensor preds = frame_of(3, {{0, p0}, {2, p1}});
    const auto fm = match_frame(preds, gts, 180.0, 0.5);
    const double straight = angular_error_deg(p0, gts[0]) + angular_error_deg(p1, gts[1]);
    const double crossed = angular_error_deg(p0, gts[1]) + angular_error_deg(p1, gts[0]);
    const std::vector<int> want = straight <= crossed ? std::vector<int>{0, 2} : std::vector<int>{2, 0};
    CHECK(fm.slot_of_gt == want);
    CHECK(std::abs(fm.error_deg[0] + fm.error_deg[1] - std::min(straight, crossed)) <= 1e-9);
  }
}

TEST_CASE("ids_count examples") {
  const FrameTruth one{{7}, {Vec3{1, 0, 0}}};
  const std::vector<FrameTruth> truth(3, one);
  const std::vector<FrameMatch> steady = {matched({4}), matched({4}), matched({4})};
  CHECK(ids_count(truth, steady) == 0);
  const std::vector<FrameMatch> moved = {matched({2}), matched({5}), matched({5})};
  CHECK(ids_count(truth, moved) == 1);
  // A miss in between does not reset the last slot.
  const std::vector<FrameMatch> gap = {matched({2}), matched({-1}), matched({2})};
  CHECK(ids_count(truth, gap) == 0);

  // Two sources cross; the tracker swaps their slots once.
  const FrameTruth two{{1, 2}, {Vec3{1, 0, 0}, Vec3{0, 1, 0}}};
  const std::vector<FrameTruth> t2(4, two);
  const std::vector<FrameMatch> swap = {matched({0, 1}), matched({0, 1}), matched({1, 0}), matched({1, 0})};
  CHECK(ids_count(t2, swap) == 2);

  // Births are not switches.
  const std::vector<FrameTruth> born = {one, FrameTruth{{7, 8}, {Vec3{1, 0, 0}, Vec3{0, 1, 0}}}};
  CHECK(ids_count(born, std::vector<FrameMatch>{matched({0}), matched({0, 3})}) == 0);
  CHECK_THROWS_AS(ids_count(born, steady), DimensionError);
}

TEST_CASE("evaluate_tracks on a perfect tracker and under slot relabeling") {
  SimConfig c;
  c.seed = 21;
  c.birth_rate = 0.1;
  const Scene s = make_scene(c, 0);
  const auto truth = s.truth();
  std::vector<Tensor> perfect;
  for (std::size_t t = 0; t < s.T; ++t) {
    Tensor f = Tensor::zeros({s.M, 3});
    for (std::size_t k = 0; k < truth[t].ids.size(); ++k) {
      const auto m = static_cast<std::size_t>(truth[t].ids[k]) % s.M;
      REQUIRE(f(m, 0) == 0.0);
      for (std::size_t j = 0; j < 3; ++j) f(m, j) = truth[t].doas[k][j];
    }
    perfect.push_back(f);
  }
  const MetricsConfig cfg;
  const auto r = evaluate_tracks(perfect, truth, s.frame_period, cfg);
  CHECK(r.identity_switches == 0);
  CHECK(r.misses == 0);
  CHECK(r.false_positives == 0);
  CHECK(r.mean_error_deg <= 1e-6);
  const double thresholds[] = {0.1, 0.5, 0.9};
  for (const auto& p : det_curve(perfect, truth, thresholds, cfg.gate_deg)) {
    CHECK(p.fp_rate == 0.0);
    CHECK(p.miss_rate == 0.0);
  }

  // The noisy detector output relabeled by one global slot permutation.
  Rng rng(3);
  const auto perm = oracle::random_permutation(rng, s.M);
  std::vector<Tensor> relabeled;
  for (const auto& f : s.detections) relabeled.push_back(permute_slots(f, perm));
  const auto a = evaluate_tracks(s.detections, truth, s.frame_period, cfg);
  const auto b = evaluate_tracks(relabeled, truth, s.frame_period, cfg);
  CHECK(a.identity_switches == b.identity_switches);
  CHECK(a.misses == b.misses);
  CHECK(a.false_positives == b.false_positives);
  CHECK(std::abs(a.mean_error_deg - b.mean_error_deg) <= 1e-12);

  // Per-frame permutations leave every frame-level count unchanged.
  std::vector<Tensor> scrambled;
  for (const auto& f : s.detections) scrambled.push_back(permute_slots(f, oracle::random_permutation(rng, s.M)));
  const auto d = evaluate_tracks(scrambled, truth, s.frame_period, cfg);
  CHECK(a.misses == d.misses);
  CHECK(a.false_positives == d.false_positives);
  CHECK(std::abs(a.mean_error_deg - d.mean_error_deg) <= 1e-12);
}

TEST_CASE("DET curve examples and monotonicity") {
  Rng rng(8);
  SimConfig c;
  c.seed = 2;
  c.birth_rate = 0.1;
  const Scene s = make_scene(c, 1);
  const auto truth = s.truth();
  const double high[] = {0.99};
  std::vector<Tensor> small;
  for (const auto& f : s.detections) small.push_back(scaled_copy(f, 0.9));
  const auto top = det_curve(small, truth, high, 20.0);
  CHECK(top[0].fp_rate == 0.0);
  CHECK(top[0].miss_rate == 1.0);

  const std::vector<double> grid = {0.02, 0.1, 0.2, 0.3, 0.5, 0.7, 0.85, 0.95};
  const auto curve = det_curve(s.detections, truth, grid, 20.0);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    CHECK(curve[k].fp_rate <= curve[k - 1].fp_rate);
    CHECK(curve[k].miss_rate >= curve[k - 1].miss_rate);
  }

  // No ground truth: all-active random predictions count M false positives per frame.
  std::vector<Tensor> noise;
  for (int t = 0; t < 10; ++t) {
    Tensor f = Tensor::zeros({5, 3});
    for (std::size_t m = 0; m < 5; ++m) {
      const Vec3 v = scaled(rng.unit_vector(), rng.uniform(0.5, 1.0));
      for (std::size_t j = 0; j < 3; ++j) f(m, j) = v[j];
    }
    noise.push_back(f);
  }
  const std::vector<FrameTruth> none(10);
  const double low[] = {1e-6};
  const auto empty = det_curve(noise, none, low, 20.0);
  CHECK(empty[0].fp_rate == 5.0);
  CHECK(empty[0].miss_rate == 0.0);
  CHECK_FALSE(empty[0].miss_rate_defined);

  const double bad[] = {0.5, 0.2};
  CHECK_THROWS_AS(det_curve(noise, none, bad, 20.0), UsageError);
}

TEST_CASE("reports pool counts and serialize") {
  TrackReport a, b;
  a.frames = 10, a.active_gt_frames = 600, a.identity_switches = 2, a.errors_deg = {1.0, 3.0};
  b.frames = 10, b.active_gt_frames = 600, b.identity_switches = 1, b.errors_deg = {2.0};
  const std::vector<TrackReport> both = {a, b};
  const TrackReport total = aggregate(both);
  CHECK(total.identity_switches == 3);
  CHECK(total.active_minutes() == doctest::Approx(2.0));
  CHECK(total.ids_per_active_minute() == doctest::Approx(1.5));
  CHECK(total.mean_error_deg == doctest::Approx(2.0));
  CHECK(total.median_error_deg == 2.0);
  const std::string csv = report_csv(both, total);
  CHECK(csv.find("\nall,20,1200,") != std::string::npos);
  const auto j = report_json(total);
  CHECK(j.at("identity_switches") == 3);
  const std::vector<DetPoint> pts = {{0.5, 0.25, 0.125, true}};
  CHECK(det_csv(pts).find("0.5,0.25,0.125") != std::string::npos);
}
