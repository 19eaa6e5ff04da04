#pragma once

#include <array>
#include <string>
#include <vector>

#include "vsod/params.hpp"

namespace vsod {

inline constexpr int kPyramidLevels = 5;

struct EncoderConfig {
    int base_channels = 16;
    std::array<int, kPyramidLevels> width_multipliers{1, 2, 4, 8, 8};
    std::array<int, kPyramidLevels> blocks_per_stage{1, 1, 1, 1, 1};
    int norm_groups = 4;

    /// Channel width C_i of level i (0-based).
    [[nodiscard]] int width(int level) const { return base_channels * width_multipliers.at(level); }
    /// Throws std::invalid_argument when the configuration violates its invariants.
    void validate() const;
};

/// Five feature maps E_1..E_5 at strides 2,4,8,16,32.
struct PyramidFeatures {
    std::array<Var, kPyramidLevels> levels;

    const Var& operator[](int i) const { return levels.at(i); }
};

/// Throws ShapeError unless x is a valid (N,3,H,W) image batch in [0,1] with
/// H and W multiples of 32.
void validate_image(const Tensor& x, const char* what = "image");

/// Shared-weight strided-convolution pyramid. Each stage is a stride-2 3x3
/// convolution followed by residual blocks; every convolution is followed by
/// group normalization so that batch size does not affect the statistics.
class Encoder {
public:
    Encoder(ParameterStore& store, Initializer& init, const EncoderConfig& cfg, const std::string& prefix = "encoder");

    [[nodiscard]] PyramidFeatures encode(const Var& image) const;
    [[nodiscard]] std::pair<PyramidFeatures, PyramidFeatures> encode_pair(const Var& rgb, const Var& flow_image) const;

    [[nodiscard]] const EncoderConfig& config() const { return cfg_; }

private:
    struct Block {
        Conv conv1, conv2;
        GroupNorm norm1, norm2;
    };
    struct Stage {
        Conv down;
        GroupNorm down_norm;
        std::vector<Block> blocks;
    };

    EncoderConfig cfg_;
    std::array<Stage, kPyramidLevels> stages_;
};

}  // namespace vsod
