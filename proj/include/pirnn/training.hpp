#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pirnn/metrics.hpp"
#include "pirnn/parallel.hpp"
#include "pirnn/pit_loss.hpp"
#include "pirnn/recurrent.hpp"
#include "pirnn/scene.hpp"

namespace pirnn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias correction; moments live beside the store.
class Adam {
 public:
  Adam(const ParamStore& params, AdamConfig cfg);

  // Applies the gradients held in `params`. Throws NumericError naming the first
  // parameter with a non-finite gradient, before anything is modified.
  void step(ParamStore& params);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

enum class ModelKind { pirnn, baseline };

struct TrainConfig {
  std::string train_path;
  std::string val_path;
  ModelKind kind = ModelKind::pirnn;
  ModelConfig model = ModelConfig::desk();
  LossConfig loss;
  AdamConfig adam;
  std::size_t batch_size = 8;
  std::size_t truncation = 50;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  std::string checkpoint_path = "checkpoint.json";
  std::string log_path = "train_log.csv";
  std::size_t eval_every = 1;  // epochs between validation passes
  int threads = 1;             // 1 = strict single-thread; 0 = runtime default
  MetricsConfig metrics;

  void validate() const;
};

std::unique_ptr<SequenceModel> make_model(ModelKind kind, const ModelConfig& cfg);

struct TrainLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_ids_rate = 0.0;
  double val_mean_error_deg = 0.0;
};

struct TrainResult {
  ParamStore best;
  ParamStore last;
  std::vector<TrainLogRow> log;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

std::string train_log_csv(const std::vector<TrainLogRow>& log);

// Mean chunked sPIT loss of already computed outputs (chunks of `truncation` frames).
double sequence_loss(std::span<const Tensor> outputs, std::span<const FrameTruth> truth, std::size_t truncation,
                     const LossConfig& loss);

// Full training run on in-memory datasets. Deterministic for a fixed config.
TrainResult train(const SequenceModel& model, const TrainConfig& cfg, const std::vector<Scene>& train_set,
                  const std::vector<Scene>& val_set, std::optional<ParamStore> init = std::nullopt);

// The file-driven variant: reads datasets, checks them against the model before any
// step, writes the best checkpoint and the log CSV.
TrainResult train(const TrainConfig& cfg);

enum class Arm { pirnn, baseline, raw };
const char* arm_name(Arm arm);

struct EvalResult {
  std::vector<TrackReport> scenes;
  TrackReport total;
  std::vector<DetPoint> det;
};

// Raw arm: `model` null, detections scored directly.
EvalResult evaluate(const SequenceModel* model, const ParamStore* params, const std::vector<Scene>& scenes,
                    const MetricsConfig& metrics, parallel::Execution exec = parallel::Execution::serial);

struct LoadedModel {
  std::unique_ptr<SequenceModel> model;
  ParamStore params;
  nlohmann::json meta;
};

// Rebuilds the model described in a checkpoint's metadata and loads its parameters.
LoadedModel load_model(const std::string& checkpoint_path);

// Checks that every scene matches the model slot count.
void check_dataset(const std::vector<Scene>& scenes, std::size_t slots, const std::string& what);

}  // namespace pirnn
