#include "pirnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "pirnn/errors.hpp"

namespace pirnn {

Adam::Adam(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("adam.lr must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Tensor::zeros(params.value(i).shape()));
    v_.push_back(Tensor::zeros(params.value(i).shape()));
  }
}

void Adam::step(ParamStore& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.grad(i).all_finite()) throw NumericError("non-finite gradient in parameter '" + params.name(i) + "'");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto x = params.value(i).values();
    const auto g = params.grad(i).values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      x[k] -= cfg_.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
    }
  }
}

void TrainConfig::validate() const {
  model.validate();
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (truncation == 0) throw ConfigError("train.truncation must be positive");
  if (eval_every == 0) throw ConfigError("train.eval_every must be positive");
  if (loss.window == 0 || loss.window % 2 == 0) throw ConfigError("loss.window must be odd and positive");
  if (!(adam.lr > 0.0)) throw ConfigError("adam.lr must be positive");
}

std::unique_ptr<SequenceModel> make_model(ModelKind kind, const ModelConfig& cfg) {
  if (kind == ModelKind::pirnn) return std::make_unique<PirnnModel>(cfg);
  return std::make_unique<BaselineModel>(cfg.M, param_match(cfg));
}

const char* arm_name(Arm arm) {
  switch (arm) {
    case Arm::pirnn: return "pirnn";
    case Arm::baseline: return "baseline";
    case Arm::raw: return "raw";
  }
  return "?";
}

void check_dataset(const std::vector<Scene>& scenes, std::size_t slots, const std::string& what) {
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].M != slots) {
      throw ConfigError(what + " scene " + std::to_string(i) + " has " + std::to_string(scenes[i].M) +
                        " slots, model expects " + std::to_string(slots));
    }
  }
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  std::ostringstream out;
  out.precision(10);
  out << "epoch,step,train_loss,val_loss,val_ids_rate,val_mean_error_deg\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << r.step << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_ids_rate << ','
        << r.val_mean_error_deg << '\n';
  }
  return out.str();
}

double sequence_loss(std::span<const Tensor> outputs, std::span<const FrameTruth> truth, std::size_t truncation,
                     const LossConfig& loss) {
  double total = 0.0;
  for (std::size_t b = 0; b < outputs.size(); b += truncation) {
    const std::size_t n = std::min(truncation, outputs.size() - b);
    const double chunk = spit_loss(outputs.subspan(b, n), truth.subspan(b, n), loss.window, loss.unassigned_weight);
    double aux = 0.0;
    if (loss.aux_fpit_weight > 0.0) aux = loss.aux_fpit_weight * spit_loss(outputs.subspan(b, n), truth.subspan(b, n), 1, loss.unassigned_weight);
    total += (chunk + aux) * static_cast<double>(n);
  }
  return total / static_cast<double>(outputs.size());
}

namespace {

struct PreparedScene {
  const std::vector<Tensor>* frames;
  std::vector<FrameTruth> truth;
};

std::vector<PreparedScene> prepare(const std::vector<Scene>& scenes) {
  std::vector<PreparedScene> out;
  out.reserve(scenes.size());
  for (const auto& s : scenes) out.push_back({&s.detections, s.truth()});
  return out;
}

struct Validation {
  double loss = 0.0;
  TrackReport report;
};

Validation validate_model(const SequenceModel& model, const ParamStore& params, const std::vector<Scene>& val,
                          const std::vector<PreparedScene>& prepared, const TrainConfig& cfg,
                          parallel::Execution exec) {
  Validation v;
  if (val.empty()) return v;
  const auto outputs = parallel::run_scenes(model, params, val, exec);
  std::vector<TrackReport> reports;
  double loss = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    loss += sequence_loss(outputs[i], prepared[i].truth, cfg.truncation, cfg.loss);
    reports.push_back(evaluate_tracks(outputs[i], prepared[i].truth, val[i].frame_period, cfg.metrics));
  }
  v.loss = loss / static_cast<double>(val.size());
  v.report = aggregate(reports);
  return v;
}

}  // namespace

TrainResult train(const SequenceModel& model, const TrainConfig& cfg, const std::vector<Scene>& train_set,
                  const std::vector<Scene>& val_set, std::optional<ParamStore> init) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  check_dataset(train_set, model.slots(), "training");
  check_dataset(val_set, model.slots(), "validation");
  for (const auto& s : train_set) {
    if (cfg.truncation > s.T) throw ConfigError("train.truncation exceeds the scene length");
  }
  const auto exec = cfg.threads == 1 ? parallel::Execution::serial : parallel::Execution::openmp;
  if (cfg.threads > 1) parallel::set_threads(cfg.threads);

  ParamStore params = init ? std::move(*init) : make_params(model.schema(), cfg.seed);
  params.check_schema(model.schema());
  Adam adam(params, cfg.adam);
  Rng order_rng = Rng::stream(cfg.seed, 0x6f72646572ULL);

  const auto train_prep = prepare(train_set);
  const auto val_prep = prepare(val_set);

  TrainResult result;
  result.best = params;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[order_rng.below(i + 1)]);

    double epoch_loss = 0.0;
    std::size_t epoch_terms = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t nb = std::min(cfg.batch_size, order.size() - b0);
      std::vector<Carry> carries(nb);
      std::size_t longest = 0;
      for (std::size_t k = 0; k < nb; ++k) longest = std::max(longest, train_set[order[b0 + k]].T);
      for (std::size_t c0 = 0; c0 < longest; c0 += cfg.truncation) {
        std::vector<parallel::ChunkJob> jobs;
        for (std::size_t k = 0; k < nb; ++k) {
          const auto& sc = train_prep[order[b0 + k]];
          const std::size_t T = sc.frames->size();
          if (c0 >= T) continue;
          const std::size_t n = std::min(cfg.truncation, T - c0);
          jobs.push_back({std::span<const Tensor>(*sc.frames).subspan(c0, n),
                          std::span<const FrameTruth>(sc.truth).subspan(c0, n), &carries[k]});
        }
        parallel::BatchGradient bg = parallel::batch_gradient(model, params, jobs, cfg.loss, exec);
        if (!std::isfinite(bg.loss_sum)) {
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        }
        const double inv = 1.0 / static_cast<double>(bg.jobs);
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto g = params.grad(i).values();
          const auto src = bg.grads[i].values();
          for (std::size_t k = 0; k < g.size(); ++k) g[k] = src[k] * inv;
        }
        adam.step(params);
        if (auto bad = params.first_non_finite()) {
          throw NumericError("parameter '" + *bad + "' became non-finite at step " + std::to_string(adam.steps()));
        }
        epoch_loss += bg.loss_sum;
        epoch_terms += bg.jobs;
      }
    }

    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
      const Validation v = validate_model(model, params, val_set, val_prep, cfg, exec);
      TrainLogRow row{epoch, adam.steps(), epoch_loss / static_cast<double>(epoch_terms), v.loss,
                      v.report.ids_per_active_minute(), v.report.mean_error_deg};
      result.log.push_back(row);
      if (val_set.empty() || v.loss < result.best_val_loss) {
        result.best_val_loss = v.loss;
        result.best_epoch = epoch;
        result.best = params;
      }
    }
  }
  result.last = std::move(params);
  result.steps = adam.steps();
  return result;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const auto model = make_model(cfg.kind, cfg.model);
  const auto train_set = read_dataset(cfg.train_path);
  const auto val_set = cfg.val_path.empty() ? std::vector<Scene>{} : read_dataset(cfg.val_path);
  TrainResult r = train(*model, cfg, train_set, val_set);
  nlohmann::json meta = model->describe();
  meta["best_epoch"] = r.best_epoch;
  meta["seed"] = cfg.seed;
  save_checkpoint(cfg.checkpoint_path, r.best, meta);
  std::ofstream log(cfg.log_path);
  if (!log) throw ConfigError("cannot write training log '" + cfg.log_path + "'");
  log << train_log_csv(r.log);
  return r;
}

EvalResult evaluate(const SequenceModel* model, const ParamStore* params, const std::vector<Scene>& scenes,
                    const MetricsConfig& metrics, parallel::Execution exec) {
  EvalResult r;
  std::vector<std::vector<Tensor>> outputs;
  if (model) {
    if (!params) throw UsageError("evaluate: model without parameters");
    params->check_schema(model->schema());
    check_dataset(scenes, model->slots(), "evaluation");
    outputs = parallel::run_scenes(*model, *params, scenes, exec);
  } else {
    for (const auto& s : scenes) outputs.push_back(s.detections);
  }
  DetAccumulator det(metrics.det_thresholds);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto truth = scenes[i].truth();
    r.scenes.push_back(evaluate_tracks(outputs[i], truth, scenes[i].frame_period, metrics));
    det.add(outputs[i], truth, metrics.gate_deg);
  }
  r.total = aggregate(r.scenes);
  r.det = det.points();
  return r;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  std::ifstream in(checkpoint_path);
  if (!in) throw SchemaError("cannot open checkpoint '" + checkpoint_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  LoadedModel lm;
  ParamStore::from_json(buf.str(), nullptr, &lm.meta);
  lm.model = model_from_description(lm.meta);
  const ParamSchema schema = lm.model->schema();
  lm.params = ParamStore::from_json(buf.str(), &schema);
  return lm;
}

}  // namespace pirnn
