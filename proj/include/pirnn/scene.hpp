#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pirnn/pit_loss.hpp"
#include "pirnn/rng.hpp"
#include "pirnn/tensor.hpp"
#include "pirnn/vec3.hpp"

namespace pirnn {

struct SimConfig {
  std::size_t T = 200;
  double frame_period = 0.1;  // seconds
  std::size_t M = 10;         // detector slots
  std::size_t max_concurrent = 3;
  double birth_rate = 0.03;        // per frame
  double mean_lifetime = 6.0;      // seconds
  double max_angular_speed = 20.0; // degrees per second
  double noise_sigma = 5.0;        // degrees
  double miss_prob = 0.05;
  double false_alarm_prob = 0.02;  // per empty slot and frame
  double shuffle_prob = 0.05;      // per frame
  std::uint64_t seed = 1;

  void validate() const;
};

struct Trajectory {
  int id = 0;
  std::size_t birth = 0;
  std::size_t death = 0;  // inclusive
  std::vector<Vec3> doa;   // one unit vector per frame in [birth, death]

  bool active_at(std::size_t t) const { return t >= birth && t <= death; }
  const Vec3& at(std::size_t t) const { return doa[t - birth]; }
};

struct Scene {
  std::size_t T = 0;
  double frame_period = 0.1;
  std::size_t M = 0;
  std::vector<Trajectory> trajectories;
  std::vector<Tensor> detections;            // T tensors of shape M x 3
  std::vector<std::vector<int>> provenance;  // T x M trajectory ids, -1 for none; diagnostics only

  FrameTruth truth_at(std::size_t t) const;
  std::vector<FrameTruth> truth() const;
  std::size_t active_count(std::size_t t) const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

inline bool operator==(const Trajectory& a, const Trajectory& b) {
  return a.id == b.id && a.birth == b.birth && a.death == b.death && a.doa == b.doa;
}

// Ground truth of scene `index` of a dataset; each index draws from its own stream.
Scene generate_scene(const SimConfig& cfg, std::uint64_t index = 0);
// Fills detections and provenance with simulated detector output.
void simulate_detector(Scene& scene, const SimConfig& cfg, Rng& rng);
void simulate_detector(Scene& scene, const SimConfig& cfg, std::uint64_t index = 0);
// generate_scene followed by simulate_detector.
Scene make_scene(const SimConfig& cfg, std::uint64_t index);

inline constexpr int kDatasetFormatVersion = 1;

std::string scene_to_json(const Scene& scene);
Scene scene_from_json(const std::string& line);
void write_dataset(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_dataset(const std::string& path);

}  // namespace pirnn
