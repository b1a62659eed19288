#pragma once

#include "json.hpp"
#include "tempora/rnn_rsm.hpp"
#include "tempora/trainer.hpp"

namespace tempora {

/// Every persisted TrainConfig field; `threads` is deliberately absent.
nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

/// {"dims": {K, F, U}, "activation", "scale_visible_sum", "blocks": {name: rows}}
/// with matrices as row-major nested arrays.
nlohmann::json params_to_json(const RnnRsmParams& params);
RnnRsmParams params_from_json(const nlohmann::json& j);

}  // namespace tempora
