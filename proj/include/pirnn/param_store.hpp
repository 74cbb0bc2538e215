#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pirnn/tensor.hpp"

namespace pirnn {

enum class ParamInit {
  fan_in_uniform,  // U[-1/sqrt(fan_in), +1/sqrt(fan_in)]
  zeros,
};

struct ParamSpec {
  std::string name;
  Tensor::Shape shape;
  ParamInit init = ParamInit::fan_in_uniform;
  std::size_t fan_in = 1;
};

using ParamSchema = std::vector<ParamSpec>;

std::size_t schema_parameter_count(const ParamSchema& schema);
nlohmann::json schema_to_json(const ParamSchema& schema);

/// Named trainable tensors, each paired with a gradient of the same shape.
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const { return values_.size(); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::string_view name) const { return values_[index(name)]; }
  Tensor& value(std::string_view name) { return values_[index(name)]; }
  const Tensor& grad(std::size_t i) const { return grads_[i]; }
  Tensor& grad(std::size_t i) { return grads_[i]; }
  const Tensor& grad(std::string_view name) const { return grads_[index(name)]; }

  std::size_t parameter_count() const;
  void zero_grad();
  // First name whose value is non-finite, if any.
  std::optional<std::string> first_non_finite() const;

  // Throws SchemaError listing every missing, unexpected or mis-shaped name.
  void check_schema(const ParamSchema& schema) const;

  // Checkpoint JSON: {"format_version": 1, "meta": {...}, name: {"shape", "values"}, ...}.
  std::string to_json(const nlohmann::json& meta = nlohmann::json::object()) const;
  // Parses a checkpoint; with a schema, validates it and orders entries like the schema.
  static ParamStore from_json(std::string_view text, const ParamSchema* schema = nullptr,
                              nlohmann::json* meta_out = nullptr);

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

// Fresh parameters for a schema; weights fan-in uniform, biases zero.
ParamStore make_params(const ParamSchema& schema, std::uint64_t seed);

inline constexpr int kCheckpointFormatVersion = 1;

ParamStore load_checkpoint(const std::string& path, const ParamSchema& schema, nlohmann::json* meta_out = nullptr);
void save_checkpoint(const std::string& path, const ParamStore& params, const nlohmann::json& meta);

}  // namespace pirnn
