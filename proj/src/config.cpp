#include "tce/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>

#include "tce/errors.hpp"
#include "tce/text.hpp"

namespace tce {

namespace {

int parse_int(const std::string& v) {
  size_t used = 0;
  const long long x = std::stoll(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return int(x);
}

uint64_t parse_u64(const std::string& v) {
  size_t used = 0;
  const unsigned long long x = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return uint64_t(x);
}

double parse_real(const std::string& v) {
  size_t used = 0;
  const double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected a boolean");
}

std::vector<int> parse_int_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

struct KeyEntry {
  const char* key;
  const char* fallback;  // default shown in help
  const char* help;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> keys = {
      {"synth.num_classes", "4", "motion-pattern classes (1..4)",
       [](RunConfig& c, const std::string& v) { c.synth.num_classes = parse_int(v); }},
      {"synth.videos_per_class", "10", "videos generated per class",
       [](RunConfig& c, const std::string& v) { c.synth.videos_per_class = parse_int(v); }},
      {"synth.frames_per_video", "30", "frames per video (>= 6)",
       [](RunConfig& c, const std::string& v) { c.synth.frames_per_video = parse_int(v); }},
      {"synth.image_size", "32", "square frame size in pixels (>= 8)",
       [](RunConfig& c, const std::string& v) { c.synth.image_size = parse_int(v); }},
      {"synth.noise_sigma", "0.01", "per-pixel Gaussian noise",
       [](RunConfig& c, const std::string& v) { c.synth.noise_sigma = parse_real(v); }},
      {"synth.seed", "derived", "generator seed (default: derived from --seed)",
       [](RunConfig& c, const std::string& v) {
         c.synth.seed = parse_u64(v);
         c.synth_seed_set = true;
       }},

      {"aug.crop_enabled", "true", "random crop on/off",
       [](RunConfig& c, const std::string& v) { c.aug.crop_enabled = parse_bool(v); }},
      {"aug.crop_size", "0", "crop window (0 = frame size)",
       [](RunConfig& c, const std::string& v) { c.aug.crop_size = parse_int(v); }},
      {"aug.crop_padding", "2", "zero padding before cropping",
       [](RunConfig& c, const std::string& v) { c.aug.crop_padding = parse_int(v); }},
      {"aug.flip_enabled", "true", "random horizontal flip on/off",
       [](RunConfig& c, const std::string& v) { c.aug.flip_enabled = parse_bool(v); }},
      {"aug.flip_prob", "0.5", "flip probability",
       [](RunConfig& c, const std::string& v) { c.aug.flip_prob = parse_real(v); }},
      {"aug.grey_enabled", "true", "random greyscale on/off",
       [](RunConfig& c, const std::string& v) { c.aug.grey_enabled = parse_bool(v); }},
      {"aug.grey_prob", "0.2", "greyscale probability",
       [](RunConfig& c, const std::string& v) { c.aug.grey_prob = parse_real(v); }},
      {"aug.jitter_enabled", "true", "color jitter on/off",
       [](RunConfig& c, const std::string& v) { c.aug.jitter_enabled = parse_bool(v); }},
      {"aug.brightness", "0.4", "brightness jitter strength",
       [](RunConfig& c, const std::string& v) { c.aug.brightness = parse_real(v); }},
      {"aug.contrast", "0.4", "contrast jitter strength",
       [](RunConfig& c, const std::string& v) { c.aug.contrast = parse_real(v); }},
      {"aug.saturation", "0.4", "saturation jitter strength",
       [](RunConfig& c, const std::string& v) { c.aug.saturation = parse_real(v); }},

      {"encoder.widths", "16,32,64", "conv stage widths (comma list)",
       [](RunConfig& c, const std::string& v) { c.encoder.widths = parse_int_list(v); }},
      {"encoder.kernel", "3", "conv kernel size (odd)",
       [](RunConfig& c, const std::string& v) { c.encoder.kernel = parse_int(v); }},
      {"encoder.embedding_dim", "128", "embedding dimension D",
       [](RunConfig& c, const std::string& v) { c.encoder.embedding_dim = parse_int(v); }},
      {"encoder.rotation_head", "true", "4-way rotation head on/off",
       [](RunConfig& c, const std::string& v) { c.encoder.rotation_head = parse_bool(v); }},

      {"loss.temperature", "1", "similarity temperature",
       [](RunConfig& c, const std::string& v) { c.train.loss.temperature = parse_real(v); }},
      {"loss.n1", "8192", "cross-video negatives (clipped to bank size)",
       [](RunConfig& c, const std::string& v) { c.train.loss.n1 = parse_int(v); }},
      {"loss.n2", "100", "within-video negatives for the second order",
       [](RunConfig& c, const std::string& v) { c.train.loss.n2 = parse_int(v); }},
      {"loss.first_order_weight", "5", "weight of the first-order term",
       [](RunConfig& c, const std::string& v) { c.train.loss.first_order_weight = parse_real(v); }},
      {"loss.second_order_weight", "1", "weight of the second-order term (0 disables)",
       [](RunConfig& c, const std::string& v) { c.train.loss.second_order_weight = parse_real(v); }},
      {"loss.aux_weight", "1", "weight of the rotation task",
       [](RunConfig& c, const std::string& v) { c.train.loss.aux_weight = parse_real(v); }},
      {"loss.nce_mode", "exact-softmax", "exact-softmax | nce",
       [](RunConfig& c, const std::string& v) { c.train.loss.nce_mode = nce_mode_from_string(v); }},
      {"loss.z_estimate", "auto", "NCE partition constant, or 'auto'",
       [](RunConfig& c, const std::string& v) {
         c.train.loss.z_estimate = v == "auto" ? 0.0 : parse_real(v);
       }},

      {"mining.enabled", "true", "semi-hard negative mining on/off",
       [](RunConfig& c, const std::string& v) { c.train.mining_enabled = parse_bool(v); }},
      {"mining.r0", "-1", "similarity cap at epoch 0",
       [](RunConfig& c, const std::string& v) { c.train.mining_r0 = parse_real(v); }},
      {"mining.r_end", "1", "similarity cap approached at the final epoch",
       [](RunConfig& c, const std::string& v) { c.train.mining_r_end = parse_real(v); }},

      {"train.lr", "0.03", "pretraining learning rate",
       [](RunConfig& c, const std::string& v) { c.train.lr = parse_real(v); }},
      {"train.momentum", "0.9", "SGD momentum",
       [](RunConfig& c, const std::string& v) { c.train.momentum = parse_real(v); }},
      {"train.batch_size", "100", "anchor pairs per step",
       [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_int(v); }},
      {"train.epochs", "9", "pretraining epochs",
       [](RunConfig& c, const std::string& v) { c.train.epochs = parse_int(v); }},
      {"train.decay_epoch", "5", "epoch index where lr drops x10",
       [](RunConfig& c, const std::string& v) { c.train.decay_epoch = parse_int(v); }},
      {"train.anchor_mode", "every-frame", "every-frame | one-per-video",
       [](RunConfig& c, const std::string& v) { c.train.anchor_mode = anchor_mode_from_string(v); }},
      {"train.bank_mode", "per-frame", "per-frame | per-video",
       [](RunConfig& c, const std::string& v) { c.train.bank_mode = bank_mode_from_string(v); }},
      {"train.bank_update_rate", "1", "bank blend rate (1 = replace)",
       [](RunConfig& c, const std::string& v) { c.train.bank_update_rate = parse_real(v); }},
      {"train.heldout_fraction", "0.2", "videos held out for coherency metrics",
       [](RunConfig& c, const std::string& v) { c.train.heldout_fraction = parse_real(v); }},
      {"train.workers", "1", "parallel augmentation workers",
       [](RunConfig& c, const std::string& v) { c.train.workers = parse_int(v); }},
      {"train.seed", "derived", "training seed (default: derived from --seed)",
       [](RunConfig& c, const std::string& v) {
         c.train.seed = parse_u64(v);
         c.train_seed_set = true;
       }},

      {"eval.mode", "linear-probe", "linear-probe | fine-tune",
       [](RunConfig& c, const std::string& v) { c.eval.mode = eval_mode_from_string(v); }},
      {"eval.input_mode", "rgb", "rgb | stack-of-differences",
       [](RunConfig& c, const std::string& v) { c.eval.input_mode = input_mode_from_string(v); }},
      {"eval.epochs", "30", "classifier training epochs",
       [](RunConfig& c, const std::string& v) { c.eval.epochs = parse_int(v); }},
      {"eval.lr", "0.05", "classifier learning rate",
       [](RunConfig& c, const std::string& v) { c.eval.lr = parse_real(v); }},
      {"eval.momentum", "0.9", "classifier SGD momentum",
       [](RunConfig& c, const std::string& v) { c.eval.momentum = parse_real(v); }},
      {"eval.decay_epoch", "375", "epoch index where classifier lr drops x10",
       [](RunConfig& c, const std::string& v) { c.eval.decay_epoch = parse_int(v); }},
      {"eval.dropout", "0", "dropout on the classifier layer input",
       [](RunConfig& c, const std::string& v) { c.eval.dropout = parse_real(v); }},
      {"eval.sample_count", "19", "evenly spaced samples at inference",
       [](RunConfig& c, const std::string& v) { c.eval.sample_count = parse_int(v); }},
      {"eval.batch_size", "16", "videos per classifier step",
       [](RunConfig& c, const std::string& v) { c.eval.batch_size = parse_int(v); }},
      {"eval.heldout_fraction", "0.2", "validation fraction of the labeled split",
       [](RunConfig& c, const std::string& v) { c.eval.heldout_fraction = parse_real(v); }},
      {"eval.seed", "derived", "evaluation seed (default: derived from --seed)",
       [](RunConfig& c, const std::string& v) {
         c.eval.seed = parse_u64(v);
         c.eval_seed_set = true;
       }},

      {"metrics.sample_count", "375", "videos sampled by the metrics command",
       [](RunConfig& c, const std::string& v) { c.metrics_sample_count = parse_int(v); }},
  };
  return keys;
}

}  // namespace

void RunConfig::finalize() {
  if (!synth_seed_set) synth.seed = Rng::child(seed, "synth").next_u64();
  if (!train_seed_set) train.seed = Rng::child(seed, "train").next_u64();
  if (!eval_seed_set) eval.seed = Rng::child(seed, "eval").next_u64();
}

void apply_kv(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& entry : registry()) {
    if (key == entry.key) {
      try {
        entry.set(config, value);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + value + " (" + e.what() + ")");
      }
      return;
    }
  }
  throw ConfigError("unknown config key: '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  size_t lineno = 0;
  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return pairs;
}

void apply_all(RunConfig& config,
               const std::vector<std::pair<std::string, std::string>>& pairs) {
  for (const auto& [k, v] : pairs) apply_kv(config, k, v);
}

std::pair<std::string, std::string> split_kv(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

std::string config_help() {
  std::string out = "Config keys (config file or --set key=value):\n";
  for (const auto& entry : registry()) {
    std::string line = "  ";
    line += entry.key;
    if (line.size() < 28) line.resize(28, ' ');
    line += "default ";
    line += entry.fallback;
    if (line.size() < 48) line.resize(48, ' ');
    line += entry.help;
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace tce
