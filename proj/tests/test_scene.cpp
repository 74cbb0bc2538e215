#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pirnn/errors.hpp"
#include "pirnn/parallel.hpp"
#include "pirnn/scene.hpp"
#include "temp_dir.hpp"

using namespace pirnn;

namespace {

Vec3 row(const Tensor& t, std::size_t i) { return {t(i, 0), t(i, 1), t(i, 2)}; }

SimConfig noiseless() {
  SimConfig c;
  c.noise_sigma = 0.0;
  c.miss_prob = 0.0;
  c.false_alarm_prob = 0.0;
  c.shuffle_prob = 0.0;
  return c;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("config validation") {
  SimConfig c;
  CHECK_NOTHROW(c.validate());
  c.miss_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SimConfig{};
  c.M = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("same seed gives byte-identical scenes, other indices differ") {
  SimConfig c;
  c.seed = 5;
  const Scene a = make_scene(c, 3), b = make_scene(c, 3);
  CHECK(scene_to_json(a) == scene_to_json(b));
  CHECK(scene_to_json(make_scene(c, 4)) != scene_to_json(a));
  c.seed = 6;
  CHECK(scene_to_json(make_scene(c, 3)) != scene_to_json(a));
}

TEST_CASE("ground-truth invariants over 1000 scenes") {
  SimConfig c;
  c.seed = 11;
  c.birth_rate = 0.2;
  const auto scenes = parallel::generate_dataset(c, 1000, parallel::Execution::serial);
  const double max_step = c.max_angular_speed * c.frame_period + 1e-9;
  std::size_t peak = 0;
  for (const Scene& s : scenes) {
    for (std::size_t t = 0; t < s.T; ++t) {
      REQUIRE(s.active_count(t) <= 3);
      peak = std::max(peak, s.active_count(t));
    }
    for (const auto& tr : s.trajectories) {
      for (std::size_t k = 0; k < tr.doa.size(); ++k) {
        CHECK(std::abs(norm(tr.doa[k]) - 1.0) <= 1e-9);
        if (k) CHECK(angle_deg(tr.doa[k - 1], tr.doa[k]) <= max_step);
      }
    }
  }
  CHECK(peak == 3);
}

TEST_CASE("birth rate zero gives an empty scene") {
  SimConfig c;
  c.birth_rate = 0.0;
  const Scene s = make_scene(c, 0);
  CHECK(s.trajectories.empty());
  for (std::size_t t = 0; t < s.T; ++t) CHECK(s.truth_at(t).ids.empty());
}

TEST_CASE("noiseless detector reproduces the ground truth in stable slots") {
  SimConfig c = noiseless();
  c.birth_rate = 0.1;
  for (std::uint64_t idx = 0; idx < 20; ++idx) {
    const Scene s = make_scene(c, idx);
    std::vector<int> slot_of(s.trajectories.size(), -1);
    for (std::size_t t = 0; t < s.T; ++t) {
      std::vector<bool> used(s.M, false);
      for (std::size_t i = 0; i < s.trajectories.size(); ++i) {
        const auto& tr = s.trajectories[i];
        if (!tr.active_at(t)) continue;
        int found = -1;
        for (std::size_t m = 0; m < s.M; ++m) {
          if (s.provenance[t][m] == tr.id) found = static_cast<int>(m);
        }
        REQUIRE(found >= 0);
        if (slot_of[i] >= 0) CHECK(found == slot_of[i]);
        slot_of[i] = found;
        used[static_cast<std::size_t>(found)] = true;
        const Vec3 d = row(s.detections[t], static_cast<std::size_t>(found));
        CHECK(norm(d) >= 0.8);
        CHECK(norm(d) <= 1.0);
        const Vec3 dir = normalized(d);
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(dir[k] - tr.at(t)[k]) <= 1e-12);
      }
      for (std::size_t m = 0; m < s.M; ++m) {
        if (!used[m]) CHECK(norm(row(s.detections[t], m)) <= 0.05);
      }
    }
  }
}

TEST_CASE("shuffle probability one moves a single source between slots") {
  SimConfig c = noiseless();
  c.shuffle_prob = 1.0;
  c.T = 2000;
  Scene s;
  s.T = c.T;
  s.M = c.M;
  Trajectory tr;
  tr.birth = 0;
  tr.death = c.T - 1;
  for (std::size_t t = 0; t < c.T; ++t) tr.doa.push_back(normalized(Vec3{std::cos(0.01 * t), std::sin(0.01 * t), 0.3}));
  s.trajectories.push_back(tr);
  simulate_detector(s, c, 9);
  int prev = -1;
  std::size_t changes = 0;
  for (std::size_t t = 0; t < c.T; ++t) {
    int slot = -1;
    for (std::size_t m = 0; m < s.M; ++m) {
      if (s.provenance[t][m] == 0) slot = static_cast<int>(m);
    }
    REQUIRE(slot >= 0);
    const Vec3 dir = normalized(row(s.detections[t], static_cast<std::size_t>(slot)));
    CHECK(angle_deg(dir, tr.doa[t]) <= 1e-6);
    if (prev >= 0 && slot != prev) ++changes;
    prev = slot;
  }
  // Expected (M-1)/M = 0.9 of the 1999 transitions; binomial std is about 13.
  const double rate = static_cast<double>(changes) / static_cast<double>(c.T - 1);
  CHECK(rate > 0.86);
  CHECK(rate < 0.94);
}

TEST_CASE("miss probability one leaves every slot inactive") {
  SimConfig c;
  c.miss_prob = 1.0;
  c.false_alarm_prob = 0.0;
  c.birth_rate = 0.2;
  for (std::uint64_t idx = 0; idx < 5; ++idx) {
    const Scene s = make_scene(c, idx);
    CHECK_FALSE(s.trajectories.empty());
    for (std::size_t t = 0; t < s.T; ++t)
      for (std::size_t m = 0; m < s.M; ++m) {
        CHECK(norm(row(s.detections[t], m)) < 0.5);
        CHECK(s.provenance[t][m] == -1);
      }
  }
}

TEST_CASE("dataset files round trip") {
  testing::TempDir dir;
  SimConfig c;
  c.seed = 3;
  const auto scenes = parallel::generate_dataset(c, 6, parallel::Execution::serial);
  const std::string path = dir.file("d.jsonl");
  write_dataset(path, scenes);
  CHECK(read_dataset(path) == scenes);

  const std::string empty = dir.file("empty.jsonl");
  testing::write_file(empty, "");
  CHECK(read_dataset(empty).empty());

  const std::string text = testing::read_file(path);
  const std::size_t second = text.find('\n') + 1;
  const std::size_t third = text.find('\n', second) + 1;
  const std::string broken = dir.file("broken.jsonl");
  testing::write_file(broken, text.substr(0, third) + text.substr(third, 40) + "\n");
  try {
    (void)read_dataset(broken);
    FAIL("truncated line accepted");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("broken.jsonl:3:") != std::string::npos);
  }
  CHECK_THROWS_AS(read_dataset(dir.file("missing.jsonl")), SchemaError);
}
