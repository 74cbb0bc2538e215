#include "pirnn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pirnn/errors.hpp"

namespace pirnn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

using Setter = std::function<void(Settings&, const std::string&, const std::string&)>;

const std::vector<std::pair<std::string, Setter>>& table() {
  static const std::vector<std::pair<std::string, Setter>> t = {
      {"sim.T", [](Settings& s, const auto& k, const auto& v) { s.sim.T = to_uint(k, v); }},
      {"sim.frame_period", [](Settings& s, const auto& k, const auto& v) { s.sim.frame_period = to_double(k, v); }},
      {"sim.M", [](Settings& s, const auto& k, const auto& v) { s.sim.M = to_uint(k, v); }},
      {"sim.max_concurrent", [](Settings& s, const auto& k, const auto& v) { s.sim.max_concurrent = to_uint(k, v); }},
      {"sim.birth_rate", [](Settings& s, const auto& k, const auto& v) { s.sim.birth_rate = to_double(k, v); }},
      {"sim.mean_lifetime", [](Settings& s, const auto& k, const auto& v) { s.sim.mean_lifetime = to_double(k, v); }},
      {"sim.max_angular_speed", [](Settings& s, const auto& k, const auto& v) { s.sim.max_angular_speed = to_double(k, v); }},
      {"sim.noise_sigma", [](Settings& s, const auto& k, const auto& v) { s.sim.noise_sigma = to_double(k, v); }},
      {"sim.miss_prob", [](Settings& s, const auto& k, const auto& v) { s.sim.miss_prob = to_double(k, v); }},
      {"sim.false_alarm_prob", [](Settings& s, const auto& k, const auto& v) { s.sim.false_alarm_prob = to_double(k, v); }},
      {"sim.shuffle_prob", [](Settings& s, const auto& k, const auto& v) { s.sim.shuffle_prob = to_double(k, v); }},
      {"sim.seed", [](Settings& s, const auto& k, const auto& v) { s.sim.seed = to_uint(k, v); }},
      {"sim.scenes", [](Settings& s, const auto& k, const auto& v) { s.scenes = to_uint(k, v); }},
      {"model.kind",
       [](Settings& s, const auto& k, const auto& v) {
         if (v == "pirnn") {
           s.train.kind = ModelKind::pirnn;
         } else if (v == "baseline") {
           s.train.kind = ModelKind::baseline;
         } else {
           throw ConfigError("key '" + k + "' expects pirnn or baseline, got '" + v + "'");
         }
       }},
      {"model.M", [](Settings& s, const auto& k, const auto& v) { s.train.model.M = to_uint(k, v); }},
      {"model.d", [](Settings& s, const auto& k, const auto& v) { s.train.model.d = to_uint(k, v); }},
      {"model.n_heads", [](Settings& s, const auto& k, const auto& v) { s.train.model.n_heads = to_uint(k, v); }},
      {"model.d_g", [](Settings& s, const auto& k, const auto& v) { s.train.model.d_g = to_uint(k, v); }},
      {"model.mlp_hidden", [](Settings& s, const auto& k, const auto& v) { s.train.model.mlp_hidden = to_uint(k, v); }},
      {"model.reset_threshold", [](Settings& s, const auto& k, const auto& v) { s.train.model.reset_threshold = to_double(k, v); }},
      {"model.gate_candidate", [](Settings& s, const auto& k, const auto& v) { s.train.model.gate_candidate = to_bool(k, v); }},
      {"model.output_projection", [](Settings& s, const auto& k, const auto& v) { s.train.model.output_projection = to_bool(k, v); }},
      {"loss.window", [](Settings& s, const auto& k, const auto& v) { s.train.loss.window = to_uint(k, v); }},
      {"loss.unassigned_weight", [](Settings& s, const auto& k, const auto& v) { s.train.loss.unassigned_weight = to_double(k, v); }},
      {"loss.aux_fpit_weight", [](Settings& s, const auto& k, const auto& v) { s.train.loss.aux_fpit_weight = to_double(k, v); }},
      {"adam.lr", [](Settings& s, const auto& k, const auto& v) { s.train.adam.lr = to_double(k, v); }},
      {"adam.beta1", [](Settings& s, const auto& k, const auto& v) { s.train.adam.beta1 = to_double(k, v); }},
      {"adam.beta2", [](Settings& s, const auto& k, const auto& v) { s.train.adam.beta2 = to_double(k, v); }},
      {"adam.eps", [](Settings& s, const auto& k, const auto& v) { s.train.adam.eps = to_double(k, v); }},
      {"train.train_path", [](Settings& s, const auto&, const auto& v) { s.train.train_path = v; }},
      {"train.val_path", [](Settings& s, const auto&, const auto& v) { s.train.val_path = v; }},
      {"train.batch_size", [](Settings& s, const auto& k, const auto& v) { s.train.batch_size = to_uint(k, v); }},
      {"train.truncation", [](Settings& s, const auto& k, const auto& v) { s.train.truncation = to_uint(k, v); }},
      {"train.epochs", [](Settings& s, const auto& k, const auto& v) { s.train.epochs = to_uint(k, v); }},
      {"train.seed", [](Settings& s, const auto& k, const auto& v) { s.train.seed = to_uint(k, v); }},
      {"train.checkpoint", [](Settings& s, const auto&, const auto& v) { s.train.checkpoint_path = v; }},
      {"train.log", [](Settings& s, const auto&, const auto& v) { s.train.log_path = v; }},
      {"train.eval_every", [](Settings& s, const auto& k, const auto& v) { s.train.eval_every = to_uint(k, v); }},
      {"train.threads", [](Settings& s, const auto& k, const auto& v) { s.train.threads = static_cast<int>(to_uint(k, v)); }},
      {"metrics.gate_deg", [](Settings& s, const auto& k, const auto& v) { s.metrics.gate_deg = to_double(k, v); }},
      {"metrics.activity_threshold", [](Settings& s, const auto& k, const auto& v) { s.metrics.activity_threshold = to_double(k, v); }},
      {"metrics.det_thresholds", [](Settings& s, const auto& k, const auto& v) { s.metrics.det_thresholds = to_list(k, v); }},
  };
  return t;
}

}  // namespace

const std::vector<std::string>& setting_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : table()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  for (const auto& [name, setter] : table()) {
    if (name == key) {
      setter(s, key, value);
      s.train.metrics = s.metrics;
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key = value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  for (const auto& [k, v] : parse_key_values(buf.str(), path)) apply_setting(s, k, v);
}

void apply_override(Settings& s, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(s, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace pirnn
