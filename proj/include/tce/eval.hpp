#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tce/checkpoint.hpp"
#include "tce/data.hpp"
#include "tce/nn.hpp"

namespace tce {

enum class EvalMode { LinearProbe, FineTune };
enum class InputMode { SingleFrameRgb, StackOfDifferences };

const char* to_string(EvalMode m);
const char* to_string(InputMode m);
EvalMode eval_mode_from_string(const std::string& s);
InputMode input_mode_from_string(const std::string& s);

struct EvalConfig {
  EvalMode mode = EvalMode::LinearProbe;
  InputMode input_mode = InputMode::SingleFrameRgb;
  int epochs = 30;
  double lr = 0.05;
  double momentum = 0.9;
  int decay_epoch = 375;    // lr scales by 0.1 from this epoch index on
  double dropout = 0.0;     // on the classifier layer input
  int sample_count = 19;    // evenly spaced inference samples per video
  int batch_size = 16;      // videos per SGD step
  double heldout_fraction = 0.2;
  uint64_t seed = 0;

  void validate() const;
};

// Encoder trunk from a pretraining checkpoint plus a fresh head. In
// stack-of-differences mode the first convolution is inflated from 3 to 15
// input channels by tiling the RGB kernels across the five difference blocks
// and scaling by 1/5, so five identical blocks reproduce the RGB response.
nn::Classifier<float> build_classifier(const Checkpoint& checkpoint, int num_classes,
                                       const EvalConfig& config);

struct EvalPrediction {
  int predicted = 0;
  Vec distribution;  // softmax averaged over the samples, sums to 1
};

// Samples floor(i * (T-1) / (S-1)) for i = 0..S-1 (index 0 when S = 1); in
// stack mode each index anchors a 6-frame block clamped to fit (T >= 6
// required). Softmax outputs are averaged; argmax with lowest-class-id
// tie-break is the prediction.
EvalPrediction evaluate_video(const nn::Classifier<float>& classifier,
                              const std::vector<Image>& frames, const EvalConfig& config);

std::vector<int> sample_indices(int total_frames, int sample_count);

struct FinetuneEpoch {
  int epoch = 0;
  double train_loss = 0.0;
  double val_top1 = 0.0;
};

struct FinetuneResult {
  double best_top1 = 0.0;
  int best_epoch = 0;
  std::vector<FinetuneEpoch> log;
  std::vector<uint32_t> train_videos;
  std::vector<uint32_t> val_videos;
};

// Trains with 3-segment random frame sampling and averaged logits; reports
// per-epoch validation top-1 and leaves the classifier at its best epoch.
// Linear-probe mode never touches the trunk weights.
FinetuneResult finetune(nn::Classifier<float>& classifier, const DatasetIndex& index,
                        const VideoStore& store, const EvalConfig& config);

// Fraction of videos whose prediction matches the label.
double top1_accuracy(const nn::Classifier<float>& classifier, const DatasetIndex& index,
                     const VideoStore& store, const std::vector<uint32_t>& video_ids,
                     const EvalConfig& config);

// One row per frame (frame_index then D values, tab-separated) plus a binary
// twin with extension .tceb: magic "TCEB", u32 rank, rank u32 dims, row-major
// little-endian float32.
void export_embeddings(const nn::Encoder<float>& encoder, const std::vector<Image>& frames,
                       const std::filesystem::path& out_path);

// TCEB reader (rank 2) for round-trip checks and external tooling.
std::pair<std::vector<uint32_t>, std::vector<float>> read_tceb(const std::filesystem::path& path);

Checkpoint make_classifier_checkpoint(nn::Classifier<float>& classifier, nlohmann::json meta);
nn::Classifier<float> load_classifier_checkpoint(const Checkpoint& ckpt);

}  // namespace tce
