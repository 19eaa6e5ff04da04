#include "vsod/decoder.hpp"

#include <vector>

namespace vsod {

Aspp::Aspp(ParameterStore& store, Initializer& init, int channels, const std::string& prefix)
    : point_(Conv::make(store, init, prefix + ".branch1x1", channels, channels, 1, {})),
      atrous_{Conv::make(store, init, prefix + ".atrous1", channels, channels, 3, same3x3()),
              Conv::make(store, init, prefix + ".atrous2", channels, channels, 3, same3x3()),
              Conv::make(store, init, prefix + ".atrous3", channels, channels, 3, same3x3())},
      pool_(Conv::make(store, init, prefix + ".image_pool", channels, channels, 1, {})),
      project_(Conv::make(store, init, prefix + ".project", 5 * channels, channels, 1, {})) {}

std::array<int, 3> Aspp::rates_for(int h, int w) {
    if (h < 7 || w < 7) return {1, 2, 3};
    return {6, 12, 18};
}

Var Aspp::operator()(const Var& x) const {
    const Shape s = x.shape();
    if (s.c != point_.weight.shape().c) {
        throw ShapeError("aspp: expected " + std::to_string(point_.weight.shape().c) + " channels, got " + s.str());
    }
    const auto rates = rates_for(s.h, s.w);
    std::vector<Var> branches;
    branches.push_back(ops::relu(point_(x)));
    for (int i = 0; i < 3; ++i) {
        branches.push_back(ops::relu(ops::conv2d(x, atrous_[i].weight, atrous_[i].bias, same3x3(1, rates[i]))));
    }
    branches.push_back(ops::broadcast_spatial(ops::relu(pool_(ops::global_avg_pool(x))), s.h, s.w));
    return ops::relu(project_(ops::concat_channels(branches)));
}

Decoder::Decoder(ParameterStore& store, Initializer& init, const std::array<int, kPyramidLevels>& widths,
                 const std::string& prefix)
    : aspp_(store, init, widths[kPyramidLevels - 1], prefix + ".aspp") {
    for (int i = 0; i < kPyramidLevels; ++i) {
        const int next = i + 1 < kPyramidLevels ? widths[i + 1] : widths[i];
        level_convs_[i] = Conv::make(store, init, prefix + ".level" + std::to_string(i + 1), widths[i] + next,
                                     widths[i], 3, same3x3());
    }
    head_ = Conv::make(store, init, prefix + ".head", widths[0], 1, 1, {});
}

Var Decoder::decode_level(int level, const Var& fused, const Var& next) const {
    if (level < 0 || level >= kPyramidLevels) throw std::out_of_range("decode_level: level out of range");
    const Shape fs = fused.shape();
    Var context;
    if (level == kPyramidLevels - 1) {
        context = aspp_(fused);
    } else {
        const Shape ns = next.shape();
        if (ns.n != fs.n || ns.h * 2 != fs.h || ns.w * 2 != fs.w) {
            throw ShapeError("decode_level: coarser feature " + ns.str() + " is not half the size of " + fs.str());
        }
        context = ops::upsample_bilinear(next, fs.h, fs.w);
    }
    const std::array<Var, 2> parts{fused, context};
    return ops::relu(level_convs_[level](ops::concat_channels(parts)));
}

Var Decoder::predict_final(const Var& decoded_top, int out_h, int out_w) const {
    Var logits = head_(decoded_top);
    return ops::sigmoid(ops::upsample_bilinear(logits, out_h, out_w));
}

Var Decoder::forward(const std::array<Var, kPyramidLevels>& fused, int out_h, int out_w) const {
    Var d = decode_level(kPyramidLevels - 1, fused[kPyramidLevels - 1], Var());
    for (int i = kPyramidLevels - 2; i >= 0; --i) d = decode_level(i, fused[i], d);
    return predict_final(d, out_h, out_w);
}

}  // namespace vsod
