#pragma once

#include <array>
#include <string>

#include "vsod/encoder.hpp"

namespace vsod {

/// Atrous spatial pyramid pooling over the coarsest fused feature: a 1x1
/// branch, three dilated 3x3 branches and an image-level pooling branch, each
/// followed by ReLU, concatenated and projected back to `channels` by 1x1 conv + ReLU.
class Aspp {
public:
    Aspp(ParameterStore& store, Initializer& init, int channels, const std::string& prefix);

    [[nodiscard]] Var operator()(const Var& x) const;

    /// {6,12,18} for maps at least 7x7, {1,2,3} below that.
    static std::array<int, 3> rates_for(int h, int w);

private:
    Conv point_;
    std::array<Conv, 3> atrous_;
    Conv pool_;
    Conv project_;
};

/// Top-down decoder: D5' = conv(D5 ++ ASPP(D5)), Di' = conv(Di ++ up(D(i+1)')),
/// P_f = sigmoid(up(conv1x1(D1'))).
class Decoder {
public:
    Decoder(ParameterStore& store, Initializer& init, const std::array<int, kPyramidLevels>& widths,
            const std::string& prefix = "decoder");

    [[nodiscard]] const Aspp& aspp() const { return aspp_; }

    /// level is 0-based. For the last level `next` is ignored and ASPP is applied to `fused`.
    [[nodiscard]] Var decode_level(int level, const Var& fused, const Var& next) const;
    [[nodiscard]] Var predict_final(const Var& decoded_top, int out_h, int out_w) const;
    /// Full chain over D1..D5; returns P_f at (out_h, out_w).
    [[nodiscard]] Var forward(const std::array<Var, kPyramidLevels>& fused, int out_h, int out_w) const;

private:
    Aspp aspp_;
    std::array<Conv, kPyramidLevels> level_convs_;
    Conv head_;
};

}  // namespace vsod
