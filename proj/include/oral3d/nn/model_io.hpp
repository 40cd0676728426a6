#pragma once

#include <filesystem>
#include <optional>

#include "oral3d/nn/network.hpp"
#include "oral3d/nn/train.hpp"

namespace oral3d::nn {

// A model is <stem>.json (descriptor, tensor names and shapes in blob order,
// optional training config) plus <stem>.bin (little-endian f32 blob).
void save_model(const std::filesystem::path& stem, const NetParams<float>& params,
                const std::optional<TrainConfig>& cfg = std::nullopt);
NetParams<float> load_model(const std::filesystem::path& stem);

}  // namespace oral3d::nn
