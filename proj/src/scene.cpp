#include "pirnn/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "pirnn/errors.hpp"

namespace pirnn {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kAxisDrift = 0.05;  // std of the per-frame rotation-axis perturbation

// Salts keep the ground-truth and detector streams of one scene independent.
constexpr std::uint64_t kTruthSalt = 0x7472757468ULL;
constexpr std::uint64_t kDetectorSalt = 0x646574656374ULL;

void check_probability(const char* name, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("sim.") + name + " must lie in [0, 1]");
}

Vec3 perturb_direction(const Vec3& doa, double sigma_rad, Rng& rng) {
  const double angle = std::abs(sigma_rad * rng.normal());
  Vec3 axis = cross(doa, rng.unit_vector());
  while (norm(axis) < 1e-9) axis = cross(doa, rng.unit_vector());
  return normalized(rotate(doa, normalized(axis), angle));
}

void set_row(Tensor& t, std::size_t r, const Vec3& v) {
  for (std::size_t k = 0; k < 3; ++k) t(r, k) = v[k];
}

}  // namespace

void SimConfig::validate() const {
  if (T == 0) throw ConfigError("sim.T must be positive");
  if (!(frame_period > 0.0)) throw ConfigError("sim.frame_period must be positive");
  if (M < max_concurrent || M == 0) throw ConfigError("sim.M must be at least sim.max_concurrent");
  if (!(mean_lifetime > 0.0)) throw ConfigError("sim.mean_lifetime must be positive");
  if (!(max_angular_speed >= 0.0)) throw ConfigError("sim.max_angular_speed must be nonnegative");
  if (!(noise_sigma >= 0.0)) throw ConfigError("sim.noise_sigma must be nonnegative");
  check_probability("birth_rate", birth_rate);
  check_probability("miss_prob", miss_prob);
  check_probability("false_alarm_prob", false_alarm_prob);
  check_probability("shuffle_prob", shuffle_prob);
}

FrameTruth Scene::truth_at(std::size_t t) const {
  FrameTruth f;
  for (const auto& tr : trajectories) {
    if (!tr.active_at(t)) continue;
    f.ids.push_back(tr.id);
    f.doas.push_back(tr.at(t));
  }
  return f;
}

std::vector<FrameTruth> Scene::truth() const {
  std::vector<FrameTruth> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) out.push_back(truth_at(t));
  return out;
}

std::size_t Scene::active_count(std::size_t t) const {
  return static_cast<std::size_t>(
      std::count_if(trajectories.begin(), trajectories.end(), [t](const Trajectory& tr) { return tr.active_at(t); }));
}

Scene generate_scene(const SimConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng = Rng::stream(cfg.seed ^ kTruthSalt, index);
  Scene s;
  s.T = cfg.T;
  s.frame_period = cfg.frame_period;
  s.M = cfg.M;
  const double death_prob = std::min(1.0, cfg.frame_period / cfg.mean_lifetime);
  const double max_step = cfg.max_angular_speed * kDeg * cfg.frame_period;
  int next_id = 0;
  for (std::size_t t = 0; t < cfg.T; ++t) {
    if (s.active_count(t) >= cfg.max_concurrent || !rng.bernoulli(cfg.birth_rate)) continue;
    // Geometric lifetime in frames with the configured mean.
    std::size_t life = 1;
    if (death_prob < 1.0) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      life += static_cast<std::size_t>(std::floor(std::log(u) / std::log1p(-death_prob)));
    }
    Trajectory tr;
    tr.id = next_id++;
    tr.birth = t;
    tr.death = std::min(cfg.T - 1, t + std::min(life, cfg.T) - 1);
    const double step = max_step * rng.uniform(0.25, 1.0);
    Vec3 axis = rng.unit_vector();
    Vec3 doa = rng.unit_vector();
    tr.doa.push_back(doa);
    for (std::size_t k = tr.birth + 1; k <= tr.death; ++k) {
      axis = normalized(Vec3{axis[0] + kAxisDrift * rng.normal(), axis[1] + kAxisDrift * rng.normal(),
                             axis[2] + kAxisDrift * rng.normal()});
      doa = normalized(rotate(doa, axis, step));
      tr.doa.push_back(doa);
    }
    s.trajectories.push_back(std::move(tr));
  }
  return s;
}

void simulate_detector(Scene& scene, const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t M = scene.M;
  const double sigma = cfg.noise_sigma * kDeg;
  scene.detections.assign(scene.T, Tensor::zeros({M, 3}));
  scene.provenance.assign(scene.T, std::vector<int>(M, -1));
  std::vector<int> slot_of(scene.trajectories.size(), -1);

  for (std::size_t t = 0; t < scene.T; ++t) {
    // Slots of trajectories that have died are free again.
    std::vector<std::size_t> active;
    std::vector<bool> occupied(M, false);
    for (std::size_t i = 0; i < scene.trajectories.size(); ++i) {
      if (!scene.trajectories[i].active_at(t)) continue;
      active.push_back(i);
      if (slot_of[i] >= 0) occupied[static_cast<std::size_t>(slot_of[i])] = true;
    }
    for (std::size_t i : active) {
      if (slot_of[i] >= 0) continue;
      std::vector<std::size_t> free;
      for (std::size_t m = 0; m < M; ++m) {
        if (!occupied[m]) free.push_back(m);
      }
      const std::size_t m = free[rng.below(free.size())];
      slot_of[i] = static_cast<int>(m);
      occupied[m] = true;
    }
    if (!active.empty() && rng.bernoulli(cfg.shuffle_prob)) {
      std::vector<std::size_t> perm(M);
      for (std::size_t m = 0; m < M; ++m) perm[m] = m;
      for (std::size_t m = M - 1; m > 0; --m) std::swap(perm[m], perm[rng.below(m + 1)]);
      std::fill(occupied.begin(), occupied.end(), false);
      for (std::size_t k = 0; k < active.size(); ++k) {
        slot_of[active[k]] = static_cast<int>(perm[k]);
        occupied[perm[k]] = true;
      }
    }

    Tensor& frame = scene.detections[t];
    for (std::size_t i : active) {
      const auto m = static_cast<std::size_t>(slot_of[i]);
      const Vec3 dir = sigma > 0.0 ? perturb_direction(scene.trajectories[i].at(t), sigma, rng)
                                   : scene.trajectories[i].at(t);
      if (rng.bernoulli(cfg.miss_prob)) {
        set_row(frame, m, scaled(dir, rng.uniform(0.0, 0.3)));
      } else {
        set_row(frame, m, scaled(dir, rng.uniform(0.8, 1.0)));
        scene.provenance[t][m] = scene.trajectories[i].id;
      }
    }
    for (std::size_t m = 0; m < M; ++m) {
      if (occupied[m]) continue;
      const Vec3 dir = rng.unit_vector();
      if (rng.bernoulli(cfg.false_alarm_prob)) {
        set_row(frame, m, scaled(dir, rng.uniform(0.8, 1.0)));
      } else {
        set_row(frame, m, scaled(dir, rng.uniform(0.0, 0.05)));
      }
    }
  }
}

void simulate_detector(Scene& scene, const SimConfig& cfg, std::uint64_t index) {
  Rng rng = Rng::stream(cfg.seed ^ kDetectorSalt, index);
  simulate_detector(scene, cfg, rng);
}

Scene make_scene(const SimConfig& cfg, std::uint64_t index) {
  Scene s = generate_scene(cfg, index);
  simulate_detector(s, cfg, index);
  return s;
}

std::string scene_to_json(const Scene& s) {
  json j;
  j["format_version"] = kDatasetFormatVersion;
  j["T"] = s.T;
  j["frame_period"] = s.frame_period;
  j["M"] = s.M;
  json trs = json::array();
  for (const auto& tr : s.trajectories) {
    trs.push_back({{"id", tr.id}, {"birth", tr.birth}, {"death", tr.death}, {"doa", tr.doa}});
  }
  j["trajectories"] = std::move(trs);
  json dets = json::array();
  for (const auto& f : s.detections) dets.push_back(std::vector<double>(f.values().begin(), f.values().end()));
  j["detections"] = std::move(dets);
  j["provenance"] = s.provenance;
  return j.dump();
}

Scene scene_from_json(const std::string& line) {
  const json j = json::parse(line);
  if (j.at("format_version").get<int>() != kDatasetFormatVersion) {
    throw SchemaError("unsupported dataset format_version " + j.at("format_version").dump());
  }
  Scene s;
  s.T = j.at("T").get<std::size_t>();
  s.frame_period = j.at("frame_period").get<double>();
  s.M = j.at("M").get<std::size_t>();
  for (const auto& jt : j.at("trajectories")) {
    Trajectory tr;
    tr.id = jt.at("id").get<int>();
    tr.birth = jt.at("birth").get<std::size_t>();
    tr.death = jt.at("death").get<std::size_t>();
    tr.doa = jt.at("doa").get<std::vector<Vec3>>();
    if (tr.death < tr.birth || tr.doa.size() != tr.death - tr.birth + 1) {
      throw SchemaError("trajectory " + std::to_string(tr.id) + " has inconsistent birth/death/doa");
    }
    s.trajectories.push_back(std::move(tr));
  }
  for (const auto& jd : j.at("detections")) s.detections.emplace_back(Tensor::Shape{s.M, 3}, jd.get<std::vector<double>>());
  s.provenance = j.at("provenance").get<std::vector<std::vector<int>>>();
  if (s.detections.size() != s.T || s.provenance.size() != s.T) {
    throw SchemaError("scene detections/provenance do not cover T frames");
  }
  return s;
}

void write_dataset(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset '" + path + "'");
  for (const auto& s : scenes) out << scene_to_json(s) << '\n';
}

std::vector<Scene> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open dataset '" + path + "'");
  std::vector<Scene> scenes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      scenes.push_back(scene_from_json(line));
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DimensionError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const SchemaError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace pirnn
