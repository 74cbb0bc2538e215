#include "pirnn/param_store.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pirnn/errors.hpp"
#include "pirnn/rng.hpp"

namespace pirnn {

using nlohmann::json;

std::size_t schema_parameter_count(const ParamSchema& schema) {
  std::size_t n = 0;
  for (const auto& spec : schema) {
    std::size_t k = 1;
    for (auto d : spec.shape) k *= d;
    n += k;
  }
  return n;
}

json schema_to_json(const ParamSchema& schema) {
  json out = json::array();
  for (const auto& spec : schema) out.push_back({{"name", spec.name}, {"shape", spec.shape}});
  return out;
}

std::size_t ParamStore::add(std::string name, Tensor value) {
  if (lookup_.contains(name)) throw UsageError("duplicate parameter name '" + name + "'");
  const std::size_t i = values_.size();
  lookup_.emplace(name, i);
  names_.push_back(std::move(name));
  grads_.push_back(Tensor::zeros(value.shape()));
  values_.push_back(std::move(value));
  return i;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParamStore::index(std::string_view name) const {
  auto i = find(name);
  if (!i) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return *i;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& g : grads_) std::fill(g.values().begin(), g.values().end(), 0.0);
}

std::optional<std::string> ParamStore::first_non_finite() const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!values_[i].all_finite()) return names_[i];
  }
  return std::nullopt;
}

void ParamStore::check_schema(const ParamSchema& schema) const {
  std::vector<std::string> problems;
  std::set<std::string> expected;
  for (const auto& spec : schema) {
    expected.insert(spec.name);
    auto i = find(spec.name);
    if (!i) {
      problems.push_back("missing " + spec.name);
    } else if (values_[*i].shape() != spec.shape) {
      problems.push_back("shape of " + spec.name + " is " + shape_string(values_[*i].shape()) + ", expected " +
                         shape_string(spec.shape));
    }
  }
  for (const auto& n : names_) {
    if (!expected.contains(n)) problems.push_back("unexpected " + n);
  }
  if (problems.empty()) return;
  std::string msg = "parameter schema mismatch:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw SchemaError(msg);
}

std::string ParamStore::to_json(const json& meta) const {
  json doc = json::object();
  doc["format_version"] = kCheckpointFormatVersion;
  doc["meta"] = meta;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const auto vals = values_[i].values();
    doc[names_[i]] = {{"shape", values_[i].shape()}, {"values", std::vector<double>(vals.begin(), vals.end())}};
  }
  return doc.dump();
}

ParamStore ParamStore::from_json(std::string_view text, const ParamSchema* schema, json* meta_out) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) throw ParseError("checkpoint lacks format_version");
  if (doc["format_version"] != kCheckpointFormatVersion) {
    throw SchemaError("unsupported checkpoint format_version " + doc["format_version"].dump());
  }
  if (meta_out) *meta_out = doc.value("meta", json::object());

  ParamStore loaded;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (it.key() == "format_version" || it.key() == "meta") continue;
    const json& entry = it.value();
    try {
      auto shape = entry.at("shape").get<Tensor::Shape>();
      std::vector<double> values;
      for (const auto& v : entry.at("values")) {
        values.push_back(v.is_string() ? std::stod(v.get<std::string>()) : v.get<double>());
      }
      loaded.add(it.key(), Tensor(std::move(shape), std::move(values)));
    } catch (const json::exception& e) {
      throw ParseError("checkpoint entry '" + it.key() + "': " + e.what());
    } catch (const DimensionError& e) {
      throw ParseError("checkpoint entry '" + it.key() + "': " + e.what());
    }
  }
  if (!schema) return loaded;

  loaded.check_schema(*schema);
  ParamStore ordered;
  for (const auto& spec : *schema) ordered.add(spec.name, loaded.value(spec.name));
  return ordered;
}

ParamStore make_params(const ParamSchema& schema, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore store;
  for (const auto& spec : schema) {
    Tensor t = Tensor::zeros(spec.shape);
    if (spec.init == ParamInit::fan_in_uniform) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
      for (auto& v : t.values()) v = rng.uniform(-bound, bound);
    }
    store.add(spec.name, std::move(t));
  }
  return store;
}

ParamStore load_checkpoint(const std::string& path, const ParamSchema& schema, json* meta_out) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open checkpoint '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return ParamStore::from_json(buf.str(), &schema, meta_out);
}

void save_checkpoint(const std::string& path, const ParamStore& params, const json& meta) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out << params.to_json(meta) << '\n';
}

}  // namespace pirnn
