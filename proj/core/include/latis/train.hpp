// Optimization loop: Adam with bias correction, per-step CSV logging, NaN
// abort, and bit-exact checkpointing (parameters, optimizer moments, and the
// sampling counters all persist, so a resumed run retraces the original).
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "latis/dataio.hpp"
#include "latis/losses.hpp"
#include "latis/model.hpp"

namespace latis {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments parallel to the parameter list. Stored as float32 so
// a checkpoint round trip is lossless and a resumed run is bit-identical.
struct AdamState {
  int64_t t = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  static AdamState init(const Parameters<float>& params);
};

// One Adam update over every parameter (element math in double, storage in
// float32). Throws UsageError if any parameter is missing its gradient.
// Gradients are left untouched; the caller clears them.
void adam_step(Parameters<float>& params, AdamState& state,
               const AdamConfig& cfg);

struct Checkpoint {
  ModelConfig config;
  Parameters<float> params;
  bool has_adam = false;
  AdamState adam;
  int epoch = 0;     // next epoch to run when resuming
  uint64_t seed = 0;
  int64_t step = 0;  // global steps completed
};

// Binary format (all integers little-endian):
//   "LATC" | u32 version | u32 json_len, config JSON | u64 FNV-1a of JSON |
//   u32 tensor count | per tensor: u32 name_len, name, u32 rank, u32 dims[],
//   f32 values[] | u8 has_adam | (u64 t, m tensors, v tensors as raw f32) |
//   i32 epoch | u64 seed | i64 step
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct FitOptions {
  int epochs = 200;
  int steps_per_epoch = 100;
  int batch = 64;
  uint64_t seed = 0;
  AdamConfig adam;
  LossSchedule schedule;
  HistogramConfig hist;
  // Receives one "epoch,step,loss_c,loss_p,lr" line per step.
  std::function<void(const std::string&)> log_line;
};

// Train from scratch, or continue from `resume` (which must carry optimizer
// state for exact reproduction). Sampling is keyed on the global step, so
// epochs [resume->epoch, epochs) see the same batches an uninterrupted run
// would. Throws DivergenceError naming the first non-finite op if the loss
// leaves the reals.
Checkpoint fit(const Dataset& ds, const ModelConfig& config,
               const FitOptions& opt, const Checkpoint* resume = nullptr);

}  // namespace latis
