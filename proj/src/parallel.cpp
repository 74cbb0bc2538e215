#include "pirnn/parallel.hpp"

#include <omp.h>

#include <cstdint>

namespace pirnn::parallel {

namespace {

struct JobResult {
  std::vector<Tensor> grads;
  double loss = 0.0;
};

JobResult run_job(const SequenceModel& model, const ParamStore& params, ChunkJob& job, const LossConfig& loss_cfg) {
  Tape tape;
  std::vector<Var> outputs = model.unroll(tape, params, job.frames, *job.carry);
  Var loss = training_loss(outputs, job.truth, loss_cfg);
  tape.backward(loss);
  JobResult r;
  r.loss = loss.value()[0];
  r.grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) r.grads.push_back(Tensor::zeros(params.value(i).shape()));
  tape.accumulate_param_grads(r.grads);
  return r;
}

}  // namespace

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

BatchGradient batch_gradient(const SequenceModel& model, const ParamStore& params, std::span<ChunkJob> jobs,
                             const LossConfig& loss, Execution exec) {
  std::vector<JobResult> results(jobs.size());
  const auto n = static_cast<std::int64_t>(jobs.size());
  if (exec == Execution::openmp) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t j = 0; j < n; ++j) results[j] = run_job(model, params, jobs[j], loss);
  } else {
    for (std::int64_t j = 0; j < n; ++j) results[j] = run_job(model, params, jobs[j], loss);
  }

  BatchGradient out;
  out.jobs = jobs.size();
  for (std::size_t i = 0; i < params.size(); ++i) out.grads.push_back(Tensor::zeros(params.value(i).shape()));
  for (const auto& r : results) {
    out.loss_sum += r.loss;
    for (std::size_t i = 0; i < out.grads.size(); ++i) {
      auto dst = out.grads[i].values();
      const auto src = r.grads[i].values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
  return out;
}

std::vector<Scene> generate_dataset(const SimConfig& cfg, std::size_t count, Execution exec,
                                    std::uint64_t first_index) {
  cfg.validate();
  std::vector<Scene> scenes(count);
  const auto n = static_cast<std::int64_t>(count);
  if (exec == Execution::openmp) {
#pragma omp parallel for schedule(dynamic, 4)
    for (std::int64_t i = 0; i < n; ++i) scenes[i] = make_scene(cfg, first_index + static_cast<std::uint64_t>(i));
  } else {
    for (std::int64_t i = 0; i < n; ++i) scenes[i] = make_scene(cfg, first_index + static_cast<std::uint64_t>(i));
  }
  return scenes;
}

std::vector<std::vector<Tensor>> run_scenes(const SequenceModel& model, const ParamStore& params,
                                            std::span<const Scene> scenes, Execution exec) {
  std::vector<std::vector<Tensor>> out(scenes.size());
  const auto n = static_cast<std::int64_t>(scenes.size());
  if (exec == Execution::openmp) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < n; ++i) out[i] = track_sequence(model, params, scenes[i].detections);
  } else {
    for (std::int64_t i = 0; i < n; ++i) out[i] = track_sequence(model, params, scenes[i].detections);
  }
  return out;
}

}  // namespace pirnn::parallel
