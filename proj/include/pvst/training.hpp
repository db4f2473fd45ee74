#pragma once

#include "pvst/adam.hpp"
#include "pvst/data.hpp"
#include "pvst/model.hpp"

#include <array>
#include <functional>
#include <map>
#include <string>

namespace pvst {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;  // clouds per step, one view each
  int views_per_cloud = 8;
  Scalar learning_rate = 1e-3;
  std::uint64_t seed = 7;
  int image_size = 128;  // one of 64, 128, 256
  PoolingVariant variant = PoolingVariant::kAvs;
  LossWeights weights;
  std::string out_dir;  // loss log + checkpoint when non-empty
  ModelDims dims;       // image_size is applied on top of these widths
};

void validate(const TrainConfig& c);

struct EpochLoss {
  Scalar total = 0, vis = 0, depth = 0, sil = 0, cont = 0;
};

struct Checkpoint {
  PretextParams params;
  std::map<std::string, AdamState> adam;
  std::array<std::uint64_t, 4> rng_state{};
  long epochs_done = 0;
  TrainConfig config;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Bit-exact binary round trip: magic "PVST", version, config echo, named
// 64-bit-float tensor table, optimizer state, RNG state, epoch counter.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Throws ArchitectureMismatchError unless the checkpoint's tensor table
// matches the shapes implied by `dims`.
void validate_architecture(const Checkpoint& ckpt, const ModelDims& dims);

// Called after every epoch with (epoch index, losses, elapsed seconds);
// returning false stops training before the configured epoch count.
using EpochHook = std::function<bool(int, const EpochLoss&, double)>;

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLoss> log;  // epochs run in this call
  bool aborted = false;        // an epoch hook returned false
};

// Deterministic pre-training over precomputed render targets. Every epoch
// visits each (cloud, view) pair exactly once: per round, shuffled clouds
// contribute one view from a per-epoch view permutation. Resuming from a
// checkpoint reproduces the uninterrupted run bit-exactly.
TrainResult pretrain(const DatasetManifest& manifest, const std::string& data_dir,
                     const RenderCache& cache, const std::string& cache_dir,
                     const TrainConfig& config, const Checkpoint* resume = nullptr,
                     const EpochHook& hook = {});

// One loss-log line per epoch: "epoch total C_v L_d L_s L_c", six decimals.
void append_loss_log(const std::string& path, int epoch, const EpochLoss& loss);

}  // namespace pvst
