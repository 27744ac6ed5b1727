#include "tce/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tce/errors.hpp"
#include "tce/serialize.hpp"
#include "tce/text.hpp"

namespace tce {

const char* to_string(EvalMode m) { return m == EvalMode::LinearProbe ? "linear-probe" : "fine-tune"; }
const char* to_string(InputMode m) {
  return m == InputMode::SingleFrameRgb ? "rgb" : "stack-of-differences";
}

EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "linear-probe") return EvalMode::LinearProbe;
  if (s == "fine-tune") return EvalMode::FineTune;
  throw std::invalid_argument("unknown eval mode: " + s + " (expected linear-probe|fine-tune)");
}

InputMode input_mode_from_string(const std::string& s) {
  if (s == "rgb") return InputMode::SingleFrameRgb;
  if (s == "stack-of-differences" || s == "stack") return InputMode::StackOfDifferences;
  throw std::invalid_argument("unknown input mode: " + s + " (expected rgb|stack-of-differences)");
}

void EvalConfig::validate() const {
  if (epochs < 1) throw ConfigError("eval: epochs must be >= 1");
  if (lr <= 0) throw ConfigError("eval: lr must be > 0");
  if (momentum < 0 || momentum >= 1) throw ConfigError("eval: momentum must be in [0, 1)");
  if (decay_epoch < 1) throw ConfigError("eval: decay_epoch must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ConfigError("eval: dropout must be in [0, 1)");
  if (sample_count < 1) throw ConfigError("eval: sample_count must be >= 1");
  if (batch_size < 1) throw ConfigError("eval: batch_size must be >= 1");
  if (heldout_fraction < 0 || heldout_fraction >= 1) {
    throw ConfigError("eval: heldout_fraction must be in [0, 1)");
  }
}

nn::Classifier<float> build_classifier(const Checkpoint& checkpoint, int num_classes,
                                       const EvalConfig& config) {
  config.validate();
  if (num_classes < 2) throw std::invalid_argument("build_classifier: num_classes must be >= 2");
  const auto enc_cfg = checkpoint.meta.at("encoder").get<nn::EncoderConfig>();

  nn::Classifier<float> cls;
  cls.num_classes = num_classes;
  cls.dropout = config.dropout;

  // trunk skeleton; weights come from the checkpoint
  Rng scratch(0);
  cls.trunk = nn::ConvStack<float>(enc_cfg.in_channels, enc_cfg.widths, enc_cfg.kernel, scratch);
  for (size_t s = 0; s < cls.trunk.stages.size(); ++s) {
    auto& st = cls.trunk.stages[s];
    const std::string base = "enc.stage" + std::to_string(s);
    const auto wit = checkpoint.arrays.find(base + ".weight");
    const auto bit = checkpoint.arrays.find(base + ".bias");
    if (wit == checkpoint.arrays.end() || bit == checkpoint.arrays.end()) {
      throw CheckpointError("build_classifier: checkpoint missing " + base);
    }
    if (wit->second.data.size() != st.weight.size() || bit->second.data.size() != st.bias.size()) {
      throw CheckpointError("build_classifier: shape mismatch at " + base);
    }
    st.weight = wit->second.data;
    st.bias = bit->second.data;
  }

  if (config.input_mode == InputMode::StackOfDifferences) {
    if (enc_cfg.in_channels != 3) {
      throw ConfigError("build_classifier: kernel inflation needs an RGB-pretrained trunk");
    }
    // tile the RGB kernels across the 5 difference blocks, scaled by 1/5, so
    // five identical blocks reproduce the original RGB response
    auto& st = cls.trunk.stages[0];
    const int co = st.out_ch;
    const int k = st.kernel;
    std::vector<float> inflated(size_t(co) * 15 * k * k);
    for (int oc = 0; oc < co; ++oc) {
      for (int block = 0; block < 5; ++block) {
        for (int c = 0; c < 3; ++c) {
          for (int p = 0; p < k * k; ++p) {
            inflated[((size_t(oc) * 15 + size_t(block * 3 + c)) * k * k) + size_t(p)] =
                st.weight[((size_t(oc) * 3 + size_t(c)) * k * k) + size_t(p)] / 5.0f;
          }
        }
      }
    }
    st.weight = std::move(inflated);
    st.in_ch = 15;
    st.grad_weight.assign(st.weight.size(), 0.0f);
    cls.trunk.in_channels = 15;
  }

  cls.trunk_cfg = enc_cfg;
  cls.trunk_cfg.in_channels = cls.trunk.in_channels;
  Rng head_rng = Rng::child(config.seed, "head");
  cls.head.init(cls.trunk.pooled_dim(), num_classes, head_rng);
  return cls;
}

std::vector<int> sample_indices(int total_frames, int sample_count) {
  if (total_frames < 1) throw std::invalid_argument("sample_indices: empty video");
  if (sample_count < 1) throw std::invalid_argument("sample_indices: sample_count must be >= 1");
  std::vector<int> idx(size_t(sample_count), 0);
  if (sample_count == 1) return idx;
  for (int i = 0; i < sample_count; ++i) {
    idx[size_t(i)] = int(int64_t(i) * (total_frames - 1) / (sample_count - 1));
  }
  return idx;
}

namespace {

// builds the network input for one sample of one video
void append_sample(std::vector<float>& dst, const std::vector<Image>& frames, int idx,
                   InputMode mode) {
  if (mode == InputMode::SingleFrameRgb) {
    nn::append_input(dst, frames[size_t(idx)]);
  } else {
    const int start = std::min(idx, int(frames.size()) - 6);
    nn::append_input(dst, stack_of_differences({frames.data() + start, 6}));
  }
}

std::pair<int, int> sample_shape(const std::vector<Image>& frames) {
  return {frames[0].height, frames[0].width};
}

void softmax_rows(const std::vector<float>& logits, int n, int classes,
                  std::vector<double>& probs) {
  probs.assign(size_t(n) * classes, 0.0);
  for (int i = 0; i < n; ++i) {
    const float* row = logits.data() + size_t(i) * classes;
    double m = row[0];
    for (int c = 1; c < classes; ++c) m = std::max(m, double(row[c]));
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) {
      probs[size_t(i) * classes + size_t(c)] = std::exp(double(row[c]) - m);
      denom += probs[size_t(i) * classes + size_t(c)];
    }
    for (int c = 0; c < classes; ++c) probs[size_t(i) * classes + size_t(c)] /= denom;
  }
}

// snapshot of every trainable array, for best-epoch restoration
std::vector<std::vector<float>> snapshot_params(nn::Classifier<float>& cls) {
  std::vector<std::vector<float>> out;
  for (const auto& p : cls.params(true)) out.push_back(*p.value);
  return out;
}

void restore_params(nn::Classifier<float>& cls, const std::vector<std::vector<float>>& snap) {
  auto params = cls.params(true);
  for (size_t i = 0; i < params.size(); ++i) *params[i].value = snap[i];
}

}  // namespace

EvalPrediction evaluate_video(const nn::Classifier<float>& classifier,
                              const std::vector<Image>& frames, const EvalConfig& config) {
  if (frames.empty()) throw std::invalid_argument("evaluate_video: empty video");
  if (config.input_mode == InputMode::StackOfDifferences && frames.size() < 6) {
    throw std::invalid_argument("evaluate_video: stack mode needs >= 6 frames, got " +
                                std::to_string(frames.size()));
  }
  const auto idx = sample_indices(int(frames.size()), config.sample_count);
  std::vector<float> input;
  for (int i : idx) append_sample(input, frames, i, config.input_mode);
  const auto [h, w] = sample_shape(frames);

  nn::Classifier<float>::Trace tr;
  classifier.forward(input.data(), int(idx.size()), h, w, tr, /*training=*/false, nullptr);

  std::vector<double> probs;
  softmax_rows(tr.logits, int(idx.size()), classifier.num_classes, probs);

  EvalPrediction pred;
  pred.distribution.assign(size_t(classifier.num_classes), 0.0);
  for (size_t i = 0; i < idx.size(); ++i) {
    for (int c = 0; c < classifier.num_classes; ++c) {
      pred.distribution[size_t(c)] += probs[i * size_t(classifier.num_classes) + size_t(c)];
    }
  }
  for (auto& v : pred.distribution) v /= double(idx.size());
  pred.predicted = 0;
  for (int c = 1; c < classifier.num_classes; ++c) {
    if (pred.distribution[size_t(c)] > pred.distribution[size_t(pred.predicted)]) {
      pred.predicted = c;  // strict > keeps the lowest class id on ties
    }
  }
  return pred;
}

double top1_accuracy(const nn::Classifier<float>& classifier, const DatasetIndex& index,
                     const VideoStore& store, const std::vector<uint32_t>& video_ids,
                     const EvalConfig& config) {
  if (video_ids.empty()) throw std::invalid_argument("top1_accuracy: no videos");
  int hits = 0;
  for (uint32_t v : video_ids) {
    const auto pred = evaluate_video(classifier, store.video(v), config);
    if (pred.predicted == index.videos[v].label) ++hits;
  }
  return double(hits) / double(video_ids.size());
}

FinetuneResult finetune(nn::Classifier<float>& classifier, const DatasetIndex& index,
                        const VideoStore& store, const EvalConfig& config) {
  config.validate();
  if (!index.has_labels()) throw DatasetError("finetune: dataset has no labels");
  const int classes = index.num_classes();
  if (classes < 2) throw DatasetError("finetune: need at least 2 classes");
  if (classes > classifier.num_classes) {
    throw ConfigError("finetune: classifier head smaller than the label range");
  }
  std::vector<int> per_class(size_t(classes), 0);
  for (const auto& v : index.videos) ++per_class[size_t(v.label)];
  for (int c = 0; c < classes; ++c) {
    if (per_class[size_t(c)] == 0) {
      throw DatasetError("finetune: class " + std::to_string(c) + " has no videos");
    }
  }
  const int min_frames = config.input_mode == InputMode::SingleFrameRgb ? 3 : 6;
  for (const auto& v : index.videos) {
    if (v.length < min_frames) {
      throw DatasetError("finetune: video " + std::to_string(v.id) + " shorter than " +
                         std::to_string(min_frames) + " frames");
    }
  }

  auto [train_ids, val_ids] = stratified_split(index, config.heldout_fraction,
                                               Rng::child(config.seed, "split").next_u64());
  if (val_ids.empty()) val_ids = train_ids;  // tiny datasets: validate on the training split

  const bool trunk_grads = config.mode == EvalMode::FineTune;
  nn::Sgd<float> opt(config.lr, config.momentum);

  FinetuneResult result;
  result.train_videos = train_ids;
  result.val_videos = val_ids;
  double best = -1.0;
  std::vector<std::vector<float>> best_snap;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    opt.set_lr(epoch >= config.decay_epoch ? config.lr * 0.1 : config.lr);
    std::vector<uint32_t> order = train_ids;
    Rng shuffler = Rng::child(config.seed, "order", uint64_t(epoch));
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    int step = 0;
    for (size_t begin = 0; begin < order.size(); begin += size_t(config.batch_size)) {
      const size_t end = std::min(begin + size_t(config.batch_size), order.size());
      const int vids = int(end - begin);

      // three random segment samples per video, logits averaged
      std::vector<float> input;
      std::vector<int> labels(size_t(vids), 0);
      int h = 0, w = 0;
      for (int b = 0; b < vids; ++b) {
        const uint32_t v = order[begin + size_t(b)];
        const auto& frames = store.video(v);
        labels[size_t(b)] = index.videos[v].label;
        const int t_len = int(frames.size());
        for (int s = 0; s < 3; ++s) {
          const int lo = s * t_len / 3;
          const int hi = std::max(lo, (s + 1) * t_len / 3 - 1);
          Rng srng = Rng::child(config.seed, "segment", uint64_t(epoch), uint64_t(v), uint64_t(s));
          const int idx = lo + int(srng.uniform_int(uint64_t(hi - lo) + 1));
          append_sample(input, frames, idx, config.input_mode);
        }
        h = frames[0].height;
        w = frames[0].width;
      }

      const int samples = vids * 3;
      nn::Classifier<float>::Trace tr;
      Rng drop_rng = Rng::child(config.seed, "dropout", uint64_t(epoch), uint64_t(step));
      classifier.forward(input.data(), samples, h, w, tr, /*training=*/true, &drop_rng);

      // cross-entropy on the per-video averaged logits
      std::vector<float> d_logits(size_t(samples) * classifier.num_classes, 0.0f);
      for (int b = 0; b < vids; ++b) {
        std::vector<double> avg(size_t(classifier.num_classes), 0.0);
        for (int s = 0; s < 3; ++s) {
          const float* row = tr.logits.data() + (size_t(b) * 3 + size_t(s)) * classifier.num_classes;
          for (int c = 0; c < classifier.num_classes; ++c) avg[size_t(c)] += double(row[c]) / 3.0;
        }
        double m = avg[0];
        for (double v : avg) m = std::max(m, v);
        double denom = 0.0;
        std::vector<double> soft(size_t(classifier.num_classes));
        for (int c = 0; c < classifier.num_classes; ++c) {
          soft[size_t(c)] = std::exp(avg[size_t(c)] - m);
          denom += soft[size_t(c)];
        }
        loss_sum += -(avg[size_t(labels[size_t(b)])] - m) + std::log(denom);
        for (int c = 0; c < classifier.num_classes; ++c) {
          const double g = (soft[size_t(c)] / denom - (c == labels[size_t(b)] ? 1.0 : 0.0)) /
                           (3.0 * double(vids));
          for (int s = 0; s < 3; ++s) {
            d_logits[(size_t(b) * 3 + size_t(s)) * classifier.num_classes + size_t(c)] = float(g);
          }
        }
      }

      classifier.zero_grad();
      classifier.backward(tr, d_logits, trunk_grads);
      auto params = classifier.params(trunk_grads);
      opt.step(params);
      ++step;
    }

    const double val_top1 = top1_accuracy(classifier, index, store, val_ids, config);
    result.log.push_back({epoch + 1, loss_sum / double(train_ids.size()), val_top1});
    if (val_top1 > best) {
      best = val_top1;
      result.best_top1 = val_top1;
      result.best_epoch = epoch + 1;
      best_snap = snapshot_params(classifier);
    }
  }
  if (!best_snap.empty()) restore_params(classifier, best_snap);
  return result;
}

void export_embeddings(const nn::Encoder<float>& encoder, const std::vector<Image>& frames,
                       const std::filesystem::path& out_path) {
  if (frames.empty()) throw std::invalid_argument("export_embeddings: empty video");
  const int d = encoder.cfg.embedding_dim;

  std::vector<float> values;
  values.reserve(frames.size() * size_t(d));
  for (const auto& img : frames) {
    const Vec emb = encoder.embed(img);
    for (double v : emb) values.push_back(float(v));
  }

  std::ofstream text(out_path, std::ios::binary);
  if (!text) throw std::runtime_error("export_embeddings: cannot open " + out_path.string());
  for (size_t t = 0; t < frames.size(); ++t) {
    text << t;
    for (int j = 0; j < d; ++j) text << '\t' << format_float(values[t * size_t(d) + size_t(j)]);
    text << '\n';
  }
  if (!text) throw std::runtime_error("export_embeddings: write failed " + out_path.string());

  std::filesystem::path bin_path = out_path;
  bin_path.replace_extension(".tceb");
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("export_embeddings: cannot open " + bin_path.string());
  bin.write("TCEB", 4);
  const uint32_t rank = 2;
  const uint32_t dims[2] = {uint32_t(frames.size()), uint32_t(d)};
  bin.write(reinterpret_cast<const char*>(&rank), 4);
  bin.write(reinterpret_cast<const char*>(dims), 8);
  bin.write(reinterpret_cast<const char*>(values.data()), std::streamsize(values.size() * 4));
  if (!bin) throw std::runtime_error("export_embeddings: write failed " + bin_path.string());
}

std::pair<std::vector<uint32_t>, std::vector<float>> read_tceb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("read_tceb: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "TCEB", 4) != 0) {
    throw LoadError("read_tceb: bad magic in " + path.string());
  }
  uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), 4);
  if (!in || rank == 0 || rank > 8) throw LoadError("read_tceb: bad rank");
  std::vector<uint32_t> dims(rank);
  in.read(reinterpret_cast<char*>(dims.data()), std::streamsize(rank * 4));
  size_t count = 1;
  for (uint32_t v : dims) count *= v;
  std::vector<float> data(count);
  in.read(reinterpret_cast<char*>(data.data()), std::streamsize(count * 4));
  if (in.gcount() != std::streamsize(count * 4)) throw LoadError("read_tceb: truncated payload");
  return {dims, data};
}

Checkpoint make_classifier_checkpoint(nn::Classifier<float>& classifier, nlohmann::json meta) {
  Checkpoint ckpt;
  meta["kind"] = "classifier";
  meta["trunk"] = classifier.trunk_cfg;
  meta["num_classes"] = classifier.num_classes;
  meta["dropout"] = classifier.dropout;
  ckpt.meta = std::move(meta);
  for (const auto& p : classifier.params(true)) {
    ckpt.arrays[p.name] = NamedArray{p.shape, *p.value};
  }
  return ckpt;
}

nn::Classifier<float> load_classifier_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "classifier") {
    throw CheckpointError("load_classifier_checkpoint: not a classifier checkpoint");
  }
  const auto cfg = ckpt.meta.at("trunk").get<nn::EncoderConfig>();
  nn::Classifier<float> cls;
  cls.trunk_cfg = cfg;
  cls.num_classes = ckpt.meta.at("num_classes").get<int>();
  cls.dropout = ckpt.meta.at("dropout").get<double>();
  Rng scratch(0);
  cls.trunk = nn::ConvStack<float>(cfg.in_channels, cfg.widths, cfg.kernel, scratch);
  cls.head.init(cls.trunk.pooled_dim(), cls.num_classes, scratch);
  for (auto& p : cls.params(true)) {
    const auto it = ckpt.arrays.find(p.name);
    if (it == ckpt.arrays.end()) throw CheckpointError("classifier checkpoint missing " + p.name);
    if (it->second.data.size() != p.value->size()) {
      throw CheckpointError("classifier checkpoint shape mismatch at " + p.name);
    }
    *p.value = it->second.data;
  }
  return cls;
}

}  // namespace tce
