#include "tce/serialize.hpp"

namespace tce {

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = {{"temperature", c.temperature},
       {"n1", c.n1},
       {"n2", c.n2},
       {"first_order_weight", c.first_order_weight},
       {"second_order_weight", c.second_order_weight},
       {"aux_weight", c.aux_weight},
       {"nce_mode", to_string(c.nce_mode)},
       {"z_estimate", c.z_estimate}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  j.at("temperature").get_to(c.temperature);
  j.at("n1").get_to(c.n1);
  j.at("n2").get_to(c.n2);
  j.at("first_order_weight").get_to(c.first_order_weight);
  j.at("second_order_weight").get_to(c.second_order_weight);
  j.at("aux_weight").get_to(c.aux_weight);
  c.nce_mode = nce_mode_from_string(j.at("nce_mode").get<std::string>());
  j.at("z_estimate").get_to(c.z_estimate);
}

void to_json(nlohmann::json& j, const AugmentationConfig& c) {
  j = {{"crop_enabled", c.crop_enabled},   {"crop_size", c.crop_size},
       {"crop_padding", c.crop_padding},   {"flip_enabled", c.flip_enabled},
       {"flip_prob", c.flip_prob},         {"grey_enabled", c.grey_enabled},
       {"grey_prob", c.grey_prob},         {"jitter_enabled", c.jitter_enabled},
       {"brightness", c.brightness},       {"contrast", c.contrast},
       {"saturation", c.saturation}};
}

void from_json(const nlohmann::json& j, AugmentationConfig& c) {
  j.at("crop_enabled").get_to(c.crop_enabled);
  j.at("crop_size").get_to(c.crop_size);
  j.at("crop_padding").get_to(c.crop_padding);
  j.at("flip_enabled").get_to(c.flip_enabled);
  j.at("flip_prob").get_to(c.flip_prob);
  j.at("grey_enabled").get_to(c.grey_enabled);
  j.at("grey_prob").get_to(c.grey_prob);
  j.at("jitter_enabled").get_to(c.jitter_enabled);
  j.at("brightness").get_to(c.brightness);
  j.at("contrast").get_to(c.contrast);
  j.at("saturation").get_to(c.saturation);
}

void to_json(nlohmann::json& j, const SyntheticSpec& c) {
  j = {{"num_classes", c.num_classes},
       {"videos_per_class", c.videos_per_class},
       {"frames_per_video", c.frames_per_video},
       {"image_size", c.image_size},
       {"noise_sigma", c.noise_sigma},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& c) {
  j.at("num_classes").get_to(c.num_classes);
  j.at("videos_per_class").get_to(c.videos_per_class);
  j.at("frames_per_video").get_to(c.frames_per_video);
  j.at("image_size").get_to(c.image_size);
  j.at("noise_sigma").get_to(c.noise_sigma);
  j.at("seed").get_to(c.seed);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"momentum", c.momentum},
       {"batch_size", c.batch_size},
       {"epochs", c.epochs},
       {"decay_epoch", c.decay_epoch},
       {"anchor_mode", to_string(c.anchor_mode)},
       {"bank_mode", to_string(c.bank_mode)},
       {"bank_update_rate", c.bank_update_rate},
       {"mining_enabled", c.mining_enabled},
       {"mining_r0", c.mining_r0},
       {"mining_r_end", c.mining_r_end},
       {"loss", c.loss},
       {"heldout_fraction", c.heldout_fraction},
       {"seed", c.seed},
       {"workers", c.workers}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("lr").get_to(c.lr);
  j.at("momentum").get_to(c.momentum);
  j.at("batch_size").get_to(c.batch_size);
  j.at("epochs").get_to(c.epochs);
  j.at("decay_epoch").get_to(c.decay_epoch);
  c.anchor_mode = anchor_mode_from_string(j.at("anchor_mode").get<std::string>());
  c.bank_mode = bank_mode_from_string(j.at("bank_mode").get<std::string>());
  j.at("bank_update_rate").get_to(c.bank_update_rate);
  j.at("mining_enabled").get_to(c.mining_enabled);
  j.at("mining_r0").get_to(c.mining_r0);
  j.at("mining_r_end").get_to(c.mining_r_end);
  j.at("loss").get_to(c.loss);
  j.at("heldout_fraction").get_to(c.heldout_fraction);
  j.at("seed").get_to(c.seed);
  j.at("workers").get_to(c.workers);
}

void to_json(nlohmann::json& j, const EvalConfig& c) {
  j = {{"mode", to_string(c.mode)},
       {"input_mode", to_string(c.input_mode)},
       {"epochs", c.epochs},
       {"lr", c.lr},
       {"momentum", c.momentum},
       {"decay_epoch", c.decay_epoch},
       {"dropout", c.dropout},
       {"sample_count", c.sample_count},
       {"batch_size", c.batch_size},
       {"heldout_fraction", c.heldout_fraction},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, EvalConfig& c) {
  c.mode = eval_mode_from_string(j.at("mode").get<std::string>());
  c.input_mode = input_mode_from_string(j.at("input_mode").get<std::string>());
  j.at("epochs").get_to(c.epochs);
  j.at("lr").get_to(c.lr);
  j.at("momentum").get_to(c.momentum);
  j.at("decay_epoch").get_to(c.decay_epoch);
  j.at("dropout").get_to(c.dropout);
  j.at("sample_count").get_to(c.sample_count);
  j.at("batch_size").get_to(c.batch_size);
  j.at("heldout_fraction").get_to(c.heldout_fraction);
  j.at("seed").get_to(c.seed);
}

namespace nn {

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"in_channels", c.in_channels},
       {"widths", c.widths},
       {"kernel", c.kernel},
       {"embedding_dim", c.embedding_dim},
       {"rotation_head", c.rotation_head}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("in_channels").get_to(c.in_channels);
  j.at("widths").get_to(c.widths);
  j.at("kernel").get_to(c.kernel);
  j.at("embedding_dim").get_to(c.embedding_dim);
  j.at("rotation_head").get_to(c.rotation_head);
}

}  // namespace nn

}  // namespace tce
