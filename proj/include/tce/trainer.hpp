#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "tce/checkpoint.hpp"
#include "tce/core.hpp"
#include "tce/data.hpp"
#include "tce/losses.hpp"
#include "tce/memory_bank.hpp"
#include "tce/mining.hpp"
#include "tce/nn.hpp"

namespace tce {

struct TrainConfig {
  double lr = 0.03;
  double momentum = 0.9;
  int batch_size = 100;
  int epochs = 9;
  int decay_epoch = 5;          // lr drops to lr/10 from this epoch index on
  AnchorMode anchor_mode = AnchorMode::EveryFrame;
  BankMode bank_mode = BankMode::PerFrame;
  double bank_update_rate = 1.0;
  bool mining_enabled = true;
  double mining_r0 = -1.0;
  double mining_r_end = 1.0;
  LossConfig loss;
  double heldout_fraction = 0.2;  // videos kept out of pretraining for the coherency metrics
  uint64_t seed = 0;
  int workers = 1;                // >1 parallelizes the augmentation stage (output unchanged)

  void validate() const;
  MiningSchedule schedule() const {
    return {mining_r0, mining_r_end, double(epochs), mining_enabled};
  }
};

struct EpochMetrics {
  int epoch = 0;       // 0 = random initialization (frozen evaluation pass)
  double mean_loss = 0.0;
  double lr = 0.0;
  double r_t = 0.0;
  double mean_tac = 0.0;
  double mean_mac = 0.0;
};

// Test instrumentation points. The trainer guarantees that all bank reads of
// a step happen against the state left by the previous step; these hooks let
// tests assert that ordering from outside.
struct PretrainHooks {
  std::function<void(int epoch, int step, const MemoryBank&)> on_step_begin;
  // keys and the exact embedding vectors handed to the losses this step
  std::function<void(int epoch, int step, const std::vector<BankKey>&, const std::vector<Vec>&)>
      on_negatives;
  // after the SGD update, before any bank write
  std::function<void(int epoch, int step, const MemoryBank&)> before_bank_update;
  std::function<void(int epoch, int step, const MemoryBank&, const std::vector<BankKey>&)>
      on_step_end;
};

struct PretrainResult {
  std::vector<EpochMetrics> metrics;
  std::filesystem::path metrics_path;
  std::vector<std::filesystem::path> epoch_checkpoints;  // [0] = random init
  std::filesystem::path final_checkpoint;
};

// Self-supervised pretraining loop: per step, embed augmented anchor and
// positive views (anchor rotated for the auxiliary head), fetch negatives
// from the bank (mined or uniform), take one SGD step on the combined
// objective, then write the fresh anchor embeddings back to the bank.
// Writes per-epoch checkpoints and metrics.tsv into out_dir. Byte-reproducible
// for a fixed seed.
PretrainResult pretrain(const DatasetIndex& index, const VideoStore& store,
                        const nn::EncoderConfig& encoder_config, const TrainConfig& train_config,
                        const AugmentationConfig& augmentation,
                        const std::filesystem::path& out_dir,
                        const PretrainHooks* hooks = nullptr);

// --- checkpoint composition -------------------------------------------------

Checkpoint make_encoder_checkpoint(nn::Encoder<float>& encoder, const nn::Sgd<float>* optimizer,
                                   const MemoryBank* bank, nlohmann::json meta);

struct LoadedEncoder {
  nn::Encoder<float> encoder;
  nlohmann::json meta;
  std::optional<MemoryBank> bank;
  std::map<std::string, std::vector<float>> velocity;
};

LoadedEncoder load_encoder_checkpoint(const std::filesystem::path& path);

void write_metrics_tsv(const std::vector<EpochMetrics>& rows, const std::filesystem::path& path);

}  // namespace tce
