#pragma once

#include <span>
#include <vector>

#include "pirnn/pit_loss.hpp"
#include "pirnn/recurrent.hpp"
#include "pirnn/scene.hpp"

// Scene-level data parallelism.
//
// Each routine has a serial reference and an OpenMP version. Work items write
// into their own output slot and any reduction runs afterwards in item order,
// so both versions return bitwise-identical results for every thread count.
namespace pirnn::parallel {

enum class Execution { serial, openmp };

// Sets the OpenMP thread count; 0 keeps the runtime default.
void set_threads(int threads);
int max_threads();

struct ChunkJob {
  std::span<const Tensor> frames;
  std::span<const FrameTruth> truth;
  Carry* carry = nullptr;
};

struct BatchGradient {
  std::vector<Tensor> grads;  // summed over jobs, indexed like the ParamStore
  double loss_sum = 0.0;
  std::size_t jobs = 0;
};

// Unrolls every job's chunk, takes the training loss and its gradient, and sums them.
BatchGradient batch_gradient(const SequenceModel& model, const ParamStore& params, std::span<ChunkJob> jobs,
                             const LossConfig& loss, Execution exec);

std::vector<Scene> generate_dataset(const SimConfig& cfg, std::size_t count, Execution exec,
                                    std::uint64_t first_index = 0);

// Forward outputs for every scene.
std::vector<std::vector<Tensor>> run_scenes(const SequenceModel& model, const ParamStore& params,
                                            std::span<const Scene> scenes, Execution exec);

}  // namespace pirnn::parallel
