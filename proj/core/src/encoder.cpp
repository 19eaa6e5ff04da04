#include "vsod/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace vsod {

void EncoderConfig::validate() const {
    if (base_channels < 1) throw std::invalid_argument("encoder: base_channels must be >= 1");
    for (int i = 0; i < kPyramidLevels; ++i) {
        if (width_multipliers[i] < 1) throw std::invalid_argument("encoder: width multipliers must be >= 1");
        if (blocks_per_stage[i] < 1) throw std::invalid_argument("encoder: blocks_per_stage entries must be >= 1");
        if (i > 0 && width_multipliers[i] < width_multipliers[i - 1]) {
            throw std::invalid_argument("encoder: channel widths must be non-decreasing");
        }
    }
    if (width(kPyramidLevels - 1) > 1024) throw std::invalid_argument("encoder: level-5 width exceeds 1024");
    if (norm_groups < 1) throw std::invalid_argument("encoder: norm_groups must be >= 1");
}

void validate_image(const Tensor& x, const char* what) {
    const Shape& s = x.shape();
    if (s.n < 1 || s.c != 3) throw ShapeError(std::string(what) + ": expected (N,3,H,W), got " + s.str());
    if (s.h < 32 || s.h % 32 != 0) {
        throw ShapeError(std::string(what) + ": height " + std::to_string(s.h) + " is not a positive multiple of 32");
    }
    if (s.w < 32 || s.w % 32 != 0) {
        throw ShapeError(std::string(what) + ": width " + std::to_string(s.w) + " is not a positive multiple of 32");
    }
    for (double v : x.values()) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw std::domain_error(std::string(what) + ": values must be finite and within [0,1]");
        }
    }
}

Encoder::Encoder(ParameterStore& store, Initializer& init, const EncoderConfig& cfg, const std::string& prefix)
    : cfg_(cfg) {
    cfg_.validate();
    int cin = 3;
    for (int i = 0; i < kPyramidLevels; ++i) {
        const int c = cfg_.width(i);
        const std::string sp = prefix + ".stage" + std::to_string(i + 1);
        Stage& st = stages_[i];
        // Followed by GroupNorm, so no bias.
        st.down = Conv::make(store, init, sp + ".down", cin, c, 3, same3x3(2), false);
        st.down_norm = GroupNorm::make(store, sp + ".down_norm", c, cfg_.norm_groups);
        for (int b = 0; b < cfg_.blocks_per_stage[i]; ++b) {
            const std::string bp = sp + ".block" + std::to_string(b + 1);
            st.blocks.push_back({Conv::make(store, init, bp + ".conv1", c, c, 3, same3x3(), false),
                                 Conv::make(store, init, bp + ".conv2", c, c, 3, same3x3(), false),
                                 GroupNorm::make(store, bp + ".norm1", c, cfg_.norm_groups),
                                 GroupNorm::make(store, bp + ".norm2", c, cfg_.norm_groups)});
        }
        cin = c;
    }
}

PyramidFeatures Encoder::encode(const Var& image) const {
    validate_image(image.value());
    PyramidFeatures out;
    Var x = image;
    for (int i = 0; i < kPyramidLevels; ++i) {
        const Stage& st = stages_[i];
        x = ops::relu(st.down_norm(st.down(x)));
        for (const Block& b : st.blocks) {
            Var h = ops::relu(b.norm1(b.conv1(x)));
            h = b.norm2(b.conv2(h));
            x = ops::relu(ops::add(x, h));
        }
        out.levels[i] = x;
    }
    return out;
}

std::pair<PyramidFeatures, PyramidFeatures> Encoder::encode_pair(const Var& rgb, const Var& flow_image) const {
    if (rgb.shape() != flow_image.shape()) {
        throw ShapeError("encode_pair: rgb " + rgb.shape().str() + " vs flow image " + flow_image.shape().str());
    }
    return {encode(rgb), encode(flow_image)};
}

}  // namespace vsod
