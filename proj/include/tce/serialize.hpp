#pragma once

#include <json.hpp>

#include "tce/data.hpp"
#include "tce/eval.hpp"
#include "tce/losses.hpp"
#include "tce/nn.hpp"
#include "tce/trainer.hpp"

// JSON round trips for the config structs, used by checkpoints.

namespace tce {

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

void to_json(nlohmann::json& j, const AugmentationConfig& c);
void from_json(const nlohmann::json& j, AugmentationConfig& c);

void to_json(nlohmann::json& j, const SyntheticSpec& c);
void from_json(const nlohmann::json& j, SyntheticSpec& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);

namespace nn {
void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
}  // namespace nn

}  // namespace tce
