#include "vsod/cag.hpp"

#include <algorithm>
#include <array>

#include "vsod/losses.hpp"

namespace vsod::cag {

ConfidenceGate::ConfidenceGate(ParameterStore& store, Initializer& init, int channels, const std::string& prefix)
    : channels_(channels) {
    if (channels < 1) throw std::invalid_argument("ConfidenceGate: channels must be >= 1");
    const int half = std::max(1, channels / 2);
    const int quarter = std::max(1, channels / 4);
    seg1_ = Conv::make(store, init, prefix + ".seg.conv1", channels, half, 3, same3x3());
    seg2_ = Conv::make(store, init, prefix + ".seg.conv2", half, quarter, 3, same3x3());
    seg3_ = Conv::make(store, init, prefix + ".seg.conv3", quarter, 1, 3, same3x3());
    conf1_ = Conv::make(store, init, prefix + ".conf.conv1", channels + 1, half, 3, same3x3());
    conf2_ = Conv::make(store, init, prefix + ".conf.conv2", half, quarter, 3, same3x3());
    conf3_ = Conv::make(store, init, prefix + ".conf.conv3", quarter, quarter, 3, same3x3());
    conf_proj_ = Conv::make(store, init, prefix + ".conf.proj", quarter, 1, 1, {});
}

Var ConfidenceGate::segment(const Var& features) const {
    if (features.shape().c != channels_) {
        throw ShapeError("segment: expected " + std::to_string(channels_) + " channels, got " + features.shape().str());
    }
    Var h = ops::relu(seg1_(features));
    h = ops::relu(seg2_(h));
    return ops::sigmoid(seg3_(h));
}

Var ConfidenceGate::predict_confidence(const Var& features, const Var& saliency) const {
    const Shape fs = features.shape(), ps = saliency.shape();
    if (ps.n != fs.n || ps.c != 1 || ps.h != fs.h || ps.w != fs.w) {
        throw ShapeError("predict_confidence: saliency " + ps.str() + " does not match features " + fs.str());
    }
    const std::array<Var, 2> parts{saliency, features};
    Var h = ops::relu(conf1_(ops::concat_channels(parts)));
    h = ops::relu(conf2_(h));
    h = ops::relu(conf3_(h));
    return ops::sigmoid(conf_proj_(ops::global_avg_pool(h)));
}

GateOutput ConfidenceGate::forward(const Var& features, bool supervise_input) const {
    const Var seg_input = supervise_input ? features : Var(features.value());
    GateOutput out;
    out.saliency = segment(seg_input);
    out.confidence = predict_confidence(features, out.saliency);
    out.gated = gate(features, out.confidence);
    return out;
}

Var gate(const Var& features, const Var& confidence) {
    if (confidence.shape().n != features.shape().n) {
        throw ShapeError("gate: batch mismatch between features " + features.shape().str() + " and confidence " +
                         confidence.shape().str());
    }
    return ops::scale_per_sample(features, confidence);
}

Tensor iou_target(const Tensor& saliency, const Tensor& mask) {
    require_same_shape(saliency.shape(), mask.shape(), "iou_target");
    const Shape s = mask.shape();
    const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
    Tensor out({s.n, 1, 1, 1});
    for (int n = 0; n < s.n; ++n) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < per; ++i) {
            const bool p = saliency[n * per + i] >= 0.5;
            const bool g = mask[n * per + i] >= 0.5;
            inter += static_cast<std::size_t>(p && g);
            uni += static_cast<std::size_t>(p || g);
        }
        out[n] = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    return out;
}

Var cag_loss(const Var& saliency, const Var& confidence, const Tensor& mask) {
    require_same_shape(saliency.shape(), mask.shape(), "cag_loss");
    if (confidence.shape() != Shape{mask.shape().n, 1, 1, 1}) {
        throw ShapeError("cag_loss: confidence shape " + confidence.shape().str());
    }
    const Tensor target = iou_target(saliency.value(), mask);
    const std::array<Var, 2> parts{losses::bce_loss(saliency, mask), losses::l1_to_target(confidence, target)};
    return ops::add_scalars(parts);
}

}  // namespace vsod::cag
