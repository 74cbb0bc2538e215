#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pirnn/attention.hpp"
#include "pirnn/autodiff.hpp"

namespace pirnn {

struct ModelConfig {
  std::size_t M = 10;           // output slots (state set size)
  std::size_t d = 128;          // embedding width of input and state sets
  std::size_t n_heads = 4;
  std::size_t d_g = 128;        // per-slot GRU width
  std::size_t mlp_hidden = 128;
  double reset_threshold = 0.5;
  bool gate_candidate = false;     // h = (1-z) h + z * h~ instead of the ungated candidate
  bool output_projection = false;  // d x d projection after the head concatenation

  void validate() const;
  // d = 32 widths used for the desk-scale experiments.
  static ModelConfig desk();
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct GruParams {
  Var w_r, w_u, w_n;  // d_in x d_g
  Var u_r, u_u, u_n;  // d_g x d_g
  Var b_r, b_u, b_n;  // 1 x d_g
};

struct EmbedParams {
  Var w1, b1;  // 3 x hidden, 1 x hidden
  Var w2, b2;  // hidden x d, 1 x d
};

// z = sigmoid(c Wz), h~ = tanh(c Wh), h = (1 - z) * h_prev + h~, row by row.
Var gated_update(Var c_set, Var h_prev, Var wz, Var wh, bool gate_candidate = false);

// Standard GRU applied to every row independently.
Var gru_cell(Var x, Var g_prev, const GruParams& p);

// Shared two-layer MLP (tanh between layers) applied to every detection row.
Var embed_inputs(Var detections, const EmbedParams& p);

/// Recurrent state handed from one unrolled chunk to the next as plain values.
struct Carry {
  bool fresh = true;
  std::vector<Tensor> state;
  std::vector<bool> at_init;  // slots whose state is the learned initial embedding
};

/// Anything that maps a sequence of M x 3 detection frames to M x 3 outputs.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t slots() const = 0;
  virtual ParamSchema schema() const = 0;
  virtual nlohmann::json describe() const = 0;

  // Records `frames` on the tape starting from `carry`. On return `carry` holds the
  // final state values; gradients do not flow through it into later chunks.
  virtual std::vector<Var> unroll(Tape& tape, const ParamStore& params, std::span<const Tensor> frames, Carry& carry,
                                  std::vector<AttentionWeights>* attention = nullptr) const = 0;

  std::size_t parameter_count() const { return schema_parameter_count(schema()); }
};

/// Embed MLP -> set-valued attention cell -> per-slot GRU -> linear head.
class PirnnModel final : public SequenceModel {
 public:
  explicit PirnnModel(ModelConfig config);

  struct Params {
    EmbedParams embed;
    MultiHeadParams attn;
    Var wz, wh;
    GruParams gru;
    Var head_w, head_b;
    Var h_init;  // M x d learned initial state set
  };
  struct State {
    Var h;
    Var g;
  };
  struct StepResult {
    Var outputs;
    State next;
    AttentionWeights attention;
    std::vector<bool> reset;
  };

  const ModelConfig& config() const { return config_; }
  std::string kind() const override { return "pirnn"; }
  std::size_t slots() const override { return config_.M; }
  ParamSchema schema() const override;
  nlohmann::json describe() const override;

  Params bind(Tape& tape, const ParamStore& params) const;
  State initial_state(Tape& tape, const Params& p) const;
  StepResult step(const Params& p, Var detections, const State& state) const;

  std::vector<Var> unroll(Tape& tape, const ParamStore& params, std::span<const Tensor> frames, Carry& carry,
                          std::vector<AttentionWeights>* attention = nullptr) const override;

 private:
  ModelConfig config_;
};

/// Concatenated detections -> two stacked GRUs -> linear head back to 3M.
class BaselineModel final : public SequenceModel {
 public:
  BaselineModel(std::size_t M, std::size_t hidden);

  std::size_t hidden() const { return hidden_; }
  std::string kind() const override { return "baseline"; }
  std::size_t slots() const override { return M_; }
  ParamSchema schema() const override;
  nlohmann::json describe() const override;

  std::vector<Var> unroll(Tape& tape, const ParamStore& params, std::span<const Tensor> frames, Carry& carry,
                          std::vector<AttentionWeights>* attention = nullptr) const override;

  static std::size_t count_for(std::size_t M, std::size_t hidden);

 private:
  std::size_t M_;
  std::size_t hidden_;
};

// Smallest baseline width whose parameter count is within [0.95, 1.10] of the PI-RNN model;
// the width with the closest count when the band holds no width.
std::size_t param_match(const ModelConfig& config);

// Parameter totals grouped by submodule ("pirnn.attn", "baseline.gru1", ...).
std::vector<std::pair<std::string, std::size_t>> parameter_ledger(const ParamSchema& schema);

// Rebuilds a model from checkpoint metadata written by describe().
std::unique_ptr<SequenceModel> model_from_description(const nlohmann::json& meta);

// Forward-only run over a whole sequence; values only.
std::vector<Tensor> track_sequence(const SequenceModel& model, const ParamStore& params,
                                   std::span<const Tensor> frames, std::vector<AttentionWeights>* attention = nullptr);

}  // namespace pirnn
