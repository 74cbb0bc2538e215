#include "pirnn/recurrent.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "pirnn/errors.hpp"

namespace pirnn {

using nlohmann::json;

namespace {

void add_gru_schema(ParamSchema& s, const std::string& prefix, std::size_t d_in, std::size_t d_g) {
  for (const char* gate : {"r", "u", "n"}) s.push_back({prefix + ".w_" + gate, {d_in, d_g}, ParamInit::fan_in_uniform, d_in});
  for (const char* gate : {"r", "u", "n"}) s.push_back({prefix + ".u_" + gate, {d_g, d_g}, ParamInit::fan_in_uniform, d_g});
  for (const char* gate : {"r", "u", "n"}) s.push_back({prefix + ".b_" + gate, {1, d_g}, ParamInit::zeros, 1});
}

GruParams bind_gru(Tape& t, const ParamStore& ps, const std::string& prefix) {
  return {t.param(ps, prefix + ".w_r"), t.param(ps, prefix + ".w_u"), t.param(ps, prefix + ".w_n"),
          t.param(ps, prefix + ".u_r"), t.param(ps, prefix + ".u_u"), t.param(ps, prefix + ".u_n"),
          t.param(ps, prefix + ".b_r"), t.param(ps, prefix + ".b_u"), t.param(ps, prefix + ".b_n")};
}

std::vector<bool> inactive_rows(const Tensor& outputs, double threshold) {
  std::vector<bool> mask(outputs.rows());
  for (std::size_t i = 0; i < outputs.rows(); ++i) {
    double n2 = 0.0;
    for (double v : outputs.row(i)) n2 += v * v;
    mask[i] = std::sqrt(n2) < threshold;
  }
  return mask;
}

}  // namespace

void ModelConfig::validate() const {
  if (M == 0 || d == 0 || d_g == 0 || mlp_hidden == 0) throw ConfigError("model widths and slot count must be positive");
  check_head_config(d, n_heads);
  if (!(reset_threshold > 0.0 && reset_threshold < 1.0)) throw ConfigError("model.reset_threshold must lie in (0, 1)");
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.d = 32;
  c.d_g = 32;
  c.mlp_hidden = 32;
  return c;
}

json to_json(const ModelConfig& c) {
  return {{"M", c.M},
          {"d", c.d},
          {"n_heads", c.n_heads},
          {"d_g", c.d_g},
          {"mlp_hidden", c.mlp_hidden},
          {"reset_threshold", c.reset_threshold},
          {"gate_candidate", c.gate_candidate},
          {"output_projection", c.output_projection}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.M = j.at("M").get<std::size_t>();
  c.d = j.at("d").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.d_g = j.at("d_g").get<std::size_t>();
  c.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
  c.reset_threshold = j.at("reset_threshold").get<double>();
  c.gate_candidate = j.value("gate_candidate", false);
  c.output_projection = j.value("output_projection", false);
  c.validate();
  return c;
}

Var gated_update(Var c_set, Var h_prev, Var wz, Var wh, bool gate_candidate) {
  if (c_set.value().rows() != h_prev.value().rows() || wz.value().cols() != h_prev.value().cols()) {
    throw DimensionError("gated_update: context " + shape_string(c_set.value().shape()) + ", state " +
                         shape_string(h_prev.value().shape()) + ", Wz " + shape_string(wz.value().shape()));
  }
  Var z = sigmoid(matmul(c_set, wz));
  Var candidate = tanh_op(matmul(c_set, wh));
  if (gate_candidate) candidate = mul(z, candidate);
  return add(mul(one_minus(z), h_prev), candidate);
}

Var gru_cell(Var x, Var g_prev, const GruParams& p) {
  Var r = sigmoid(add_row(add(matmul(x, p.w_r), matmul(g_prev, p.u_r)), p.b_r));
  Var u = sigmoid(add_row(add(matmul(x, p.w_u), matmul(g_prev, p.u_u)), p.b_u));
  Var n = tanh_op(add_row(add(matmul(x, p.w_n), matmul(mul(r, g_prev), p.u_n)), p.b_n));
  return add(mul(one_minus(u), n), mul(u, g_prev));
}

Var embed_inputs(Var detections, const EmbedParams& p) {
  Var hidden = tanh_op(add_row(matmul(detections, p.w1), p.b1));
  return add_row(matmul(hidden, p.w2), p.b2);
}

// PI-RNN --------------------------------------------------------------------

PirnnModel::PirnnModel(ModelConfig config) : config_(config) { config_.validate(); }

ParamSchema PirnnModel::schema() const {
  const auto& c = config_;
  ParamSchema s;
  s.push_back({"pirnn.embed.w1", {3, c.mlp_hidden}, ParamInit::fan_in_uniform, 3});
  s.push_back({"pirnn.embed.b1", {1, c.mlp_hidden}, ParamInit::zeros, 1});
  s.push_back({"pirnn.embed.w2", {c.mlp_hidden, c.d}, ParamInit::fan_in_uniform, c.mlp_hidden});
  s.push_back({"pirnn.embed.b2", {1, c.d}, ParamInit::zeros, 1});
  s.push_back({"pirnn.attn.wq", {c.d, c.d}, ParamInit::fan_in_uniform, c.d});
  s.push_back({"pirnn.attn.wk", {c.d, c.d}, ParamInit::fan_in_uniform, c.d});
  s.push_back({"pirnn.attn.wv", {c.d, c.d}, ParamInit::fan_in_uniform, c.d});
  if (c.output_projection) s.push_back({"pirnn.attn.wo", {c.d, c.d}, ParamInit::fan_in_uniform, c.d});
  s.push_back({"pirnn.cell.wz", {c.d, c.d}, ParamInit::fan_in_uniform, c.d});
  s.push_back({"pirnn.cell.wh", {c.d, c.d}, ParamInit::fan_in_uniform, c.d});
  add_gru_schema(s, "pirnn.gru", c.d, c.d_g);
  s.push_back({"pirnn.head.w", {c.d_g, 3}, ParamInit::fan_in_uniform, c.d_g});
  s.push_back({"pirnn.head.b", {1, 3}, ParamInit::zeros, 1});
  // Per-slot initial embeddings, drawn independently.
  s.push_back({"pirnn.h_init", {c.M, c.d}, ParamInit::fan_in_uniform, 1});
  return s;
}

json PirnnModel::describe() const { return {{"kind", kind()}, {"config", to_json(config_)}}; }

PirnnModel::Params PirnnModel::bind(Tape& t, const ParamStore& ps) const {
  Params p;
  p.embed = {t.param(ps, "pirnn.embed.w1"), t.param(ps, "pirnn.embed.b1"), t.param(ps, "pirnn.embed.w2"),
             t.param(ps, "pirnn.embed.b2")};
  p.attn.wq = t.param(ps, "pirnn.attn.wq");
  p.attn.wk = t.param(ps, "pirnn.attn.wk");
  p.attn.wv = t.param(ps, "pirnn.attn.wv");
  p.attn.n_heads = config_.n_heads;
  if (config_.output_projection) p.attn.wo = t.param(ps, "pirnn.attn.wo");
  p.wz = t.param(ps, "pirnn.cell.wz");
  p.wh = t.param(ps, "pirnn.cell.wh");
  p.gru = bind_gru(t, ps, "pirnn.gru");
  p.head_w = t.param(ps, "pirnn.head.w");
  p.head_b = t.param(ps, "pirnn.head.b");
  p.h_init = t.param(ps, "pirnn.h_init");
  return p;
}

PirnnModel::State PirnnModel::initial_state(Tape& t, const Params& p) const {
  return {p.h_init, t.constant(Tensor::zeros({config_.M, config_.d_g}))};
}

PirnnModel::StepResult PirnnModel::step(const Params& p, Var detections, const State& state) const {
  if (detections.value().rows() != config_.M || detections.value().cols() != 3) {
    throw DimensionError("pirnn step: detections must be " + std::to_string(config_.M) + "x3, got " +
                         shape_string(detections.value().shape()));
  }
  Tape& t = *detections.tape;
  Var x_set = embed_inputs(detections, p.embed);
  AttentionResult ctx = assignment_context(x_set, state.h, p.attn);
  Var h_new = gated_update(ctx.output, state.h, p.wz, p.wh, config_.gate_candidate);
  Var g_new = gru_cell(h_new, state.g, p.gru);
  Var out = add_row(matmul(g_new, p.head_w), p.head_b);

  StepResult r;
  r.outputs = out;
  r.reset = inactive_rows(out.value(), config_.reset_threshold);
  r.next.h = select_rows(h_new, p.h_init, r.reset);
  r.next.g = select_rows(g_new, t.constant(Tensor::zeros({config_.M, config_.d_g})), r.reset);
  r.attention = std::move(ctx.weights);
  return r;
}

std::vector<Var> PirnnModel::unroll(Tape& tape, const ParamStore& params, std::span<const Tensor> frames,
                                    Carry& carry, std::vector<AttentionWeights>* attention) const {
  const Params p = bind(tape, params);
  State state = initial_state(tape, p);
  if (!carry.fresh) {
    state.h = select_rows(tape.constant(carry.state.at(0)), p.h_init, carry.at_init);
    state.g = tape.constant(carry.state.at(1));
  }
  std::vector<Var> outputs;
  outputs.reserve(frames.size());
  std::vector<bool> at_init = carry.fresh ? std::vector<bool>(config_.M, true) : carry.at_init;
  for (const Tensor& frame : frames) {
    StepResult r = step(p, tape.constant(frame), state);
    outputs.push_back(r.outputs);
    if (attention) attention->push_back(std::move(r.attention));
    state = r.next;
    at_init = std::move(r.reset);
  }
  carry.fresh = false;
  carry.state = {state.h.value(), state.g.value()};
  carry.at_init = std::move(at_init);
  return outputs;
}

// Baseline ------------------------------------------------------------------

BaselineModel::BaselineModel(std::size_t M, std::size_t hidden) : M_(M), hidden_(hidden) {
  if (M == 0 || hidden == 0) throw ConfigError("baseline slot count and width must be positive");
}

ParamSchema BaselineModel::schema() const {
  ParamSchema s;
  add_gru_schema(s, "baseline.gru1", 3 * M_, hidden_);
  add_gru_schema(s, "baseline.gru2", hidden_, hidden_);
  s.push_back({"baseline.head.w", {hidden_, 3 * M_}, ParamInit::fan_in_uniform, hidden_});
  s.push_back({"baseline.head.b", {1, 3 * M_}, ParamInit::zeros, 1});
  return s;
}

std::size_t BaselineModel::count_for(std::size_t M, std::size_t hidden) {
  return schema_parameter_count(BaselineModel(M, hidden).schema());
}

json BaselineModel::describe() const { return {{"kind", kind()}, {"M", M_}, {"hidden", hidden_}}; }

std::vector<Var> BaselineModel::unroll(Tape& tape, const ParamStore& params, std::span<const Tensor> frames,
                                       Carry& carry, std::vector<AttentionWeights>* attention) const {
  (void)attention;
  const GruParams l1 = bind_gru(tape, params, "baseline.gru1");
  const GruParams l2 = bind_gru(tape, params, "baseline.gru2");
  Var hw = tape.param(params, "baseline.head.w");
  Var hb = tape.param(params, "baseline.head.b");
  Var g1 = tape.constant(carry.fresh ? Tensor::zeros({1, hidden_}) : carry.state.at(0));
  Var g2 = tape.constant(carry.fresh ? Tensor::zeros({1, hidden_}) : carry.state.at(1));
  std::vector<Var> outputs;
  outputs.reserve(frames.size());
  for (const Tensor& frame : frames) {
    if (frame.size() != 3 * M_) throw DimensionError("baseline: frame must hold " + std::to_string(M_) + " ACCDOAs");
    Var x = tape.constant(Tensor({1, 3 * M_}, std::vector<double>(frame.values().begin(), frame.values().end())));
    g1 = gru_cell(x, g1, l1);
    g2 = gru_cell(g1, g2, l2);
    outputs.push_back(reshape(add_row(matmul(g2, hw), hb), {M_, 3}));
  }
  carry.fresh = false;
  carry.state = {g1.value(), g2.value()};
  carry.at_init.clear();
  return outputs;
}

std::size_t param_match(const ModelConfig& config) {
  const double target = static_cast<double>(PirnnModel(config).parameter_count());
  std::size_t nearest = 4;
  double nearest_gap = std::numeric_limits<double>::infinity();
  for (std::size_t h = 4; h <= 4096; ++h) {
    const double n = static_cast<double>(BaselineModel::count_for(config.M, h));
    if (n >= 0.95 * target && n <= 1.10 * target) return h;
    const double gap = std::abs(std::log(n / target));
    if (gap < nearest_gap) {
      nearest_gap = gap;
      nearest = h;
    }
    if (n > 1.10 * target) break;
  }
  return nearest;
}

std::vector<std::pair<std::string, std::size_t>> parameter_ledger(const ParamSchema& schema) {
  std::vector<std::pair<std::string, std::size_t>> ledger;
  for (const auto& spec : schema) {
    const auto first = spec.name.find('.');
    const auto second = spec.name.find('.', first + 1);
    const std::string group = second == std::string::npos ? spec.name : spec.name.substr(0, second);
    std::size_t n = 1;
    for (auto d : spec.shape) n *= d;
    if (ledger.empty() || ledger.back().first != group) {
      ledger.emplace_back(group, n);
    } else {
      ledger.back().second += n;
    }
  }
  return ledger;
}

std::unique_ptr<SequenceModel> model_from_description(const json& meta) {
  try {
    const std::string kind = meta.at("kind").get<std::string>();
    if (kind == "pirnn") return std::make_unique<PirnnModel>(model_config_from_json(meta.at("config")));
    if (kind == "baseline") {
      return std::make_unique<BaselineModel>(meta.at("M").get<std::size_t>(), meta.at("hidden").get<std::size_t>());
    }
    throw SchemaError("unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model description: ") + e.what());
  }
}

std::vector<Tensor> track_sequence(const SequenceModel& model, const ParamStore& params,
                                   std::span<const Tensor> frames, std::vector<AttentionWeights>* attention) {
  if (frames.empty()) throw UsageError("track_sequence: at least one frame required");
  constexpr std::size_t kChunk = 32;
  std::vector<Tensor> out;
  out.reserve(frames.size());
  Carry carry;
  for (std::size_t b = 0; b < frames.size(); b += kChunk) {
    Tape tape(false);
    const auto chunk = frames.subspan(b, std::min(kChunk, frames.size() - b));
    for (Var v : model.unroll(tape, params, chunk, carry, attention)) out.push_back(v.value());
  }
  return out;
}

}  // namespace pirnn
