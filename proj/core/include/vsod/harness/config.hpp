#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "vsod/model.hpp"

namespace vsod::harness {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Every knob of a training run. Defaults are the desk-scale settings.
struct TrainConfig {
    double learning_rate = 1e-5;
    int batch_size = 4;
    int input_size = 64;
    int max_steps = 1000;
    std::uint64_t seed = 0;
    FusionMode fusion_mode = FusionMode::CagDde;

    int base_channels = 16;
    std::array<int, kPyramidLevels> width_multipliers{1, 2, 4, 8, 8};
    std::array<int, kPyramidLevels> blocks_per_stage{1, 1, 1, 1, 1};
    int norm_groups = 4;
    bool gate_supervises_encoder = true;

    bool loss_bce = true;
    bool loss_ssim = true;
    bool loss_iou = true;
    bool loss_gates = true;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;

    bool augment = true;
    int checkpoint_interval = 0;  // 0: only the final checkpoint
    int log_interval = 1;

    std::string train_data;
    std::string eval_data;
    std::string out_dir = "runs/default";

    void validate() const;
    [[nodiscard]] ModelConfig model_config() const;
    [[nodiscard]] losses::FinalLossTerms final_terms() const { return {loss_bce, loss_ssim, loss_iou}; }
};

/// Flat JSON object with every field, keys sorted.
std::string to_json(const TrainConfig& cfg, int indent = -1);
/// Starts from `base` and overrides the keys present in text. Unknown keys and
/// type mismatches throw ConfigError.
TrainConfig config_from_json(const std::string& text, const TrainConfig& base = {});
TrainConfig load_config(const std::filesystem::path& path, const TrainConfig& base = {});

}  // namespace vsod::harness
