#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pirnn/metrics.hpp"
#include "pirnn/scene.hpp"
#include "pirnn/training.hpp"

namespace pirnn {

/// Everything a run can be configured with, addressed by flat dotted keys.
struct Settings {
  SimConfig sim;
  std::size_t scenes = 100;  // sim.scenes: dataset size for gen-data
  TrainConfig train;
  MetricsConfig metrics;
};

// Documented keys, in display order.
const std::vector<std::string>& setting_keys();

// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(Settings& s, const std::string& key, const std::string& value);

// Parses "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text, const std::string& source);
void apply_config_file(Settings& s, const std::string& path);

// "key=value" override from the command line.
void apply_override(Settings& s, const std::string& assignment);

}  // namespace pirnn
