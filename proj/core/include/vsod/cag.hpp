#pragma once

#include <string>

#include "vsod/params.hpp"

namespace vsod::cag {

/// Gated features R = E * s, the auxiliary map P and the confidence s.
struct GateOutput {
    Var gated;
    Var saliency;
    Var confidence;
};

/// Confidence-guided adaptive gate for one pyramid level of one stream.
///
/// segmentation:  3x3 conv C->C/2, ReLU, 3x3 conv C/2->C/4, ReLU, 3x3 conv C/4->1, sigmoid
/// confidence:    concat(P, E) -> three 3x3 conv+ReLU (C/2, C/4, C/4) -> global average
///                pool -> 1x1 projection -> sigmoid
class ConfidenceGate {
public:
    ConfidenceGate(ParameterStore& store, Initializer& init, int channels, const std::string& prefix);

    [[nodiscard]] Var segment(const Var& features) const;
    [[nodiscard]] Var predict_confidence(const Var& features, const Var& saliency) const;
    /// When supervise_input is false the segmentation branch sees a detached
    /// copy of the features, so its BCE term cannot reach the encoder.
    [[nodiscard]] GateOutput forward(const Var& features, bool supervise_input = true) const;

    [[nodiscard]] int channels() const { return channels_; }

private:
    int channels_;
    Conv seg1_, seg2_, seg3_;
    Conv conf1_, conf2_, conf3_, conf_proj_;
};

/// out[b] = features[b] * s[b]; s is (N,1,1,1).
Var gate(const Var& features, const Var& confidence);

/// Per-sample IoU of the maps binarized at 0.5, as a constant (N,1,1,1)
/// tensor. Two empty maps score 1.
Tensor iou_target(const Tensor& saliency, const Tensor& mask);

/// BCE(P, G) + mean |s - IoU(P, G)|, with the IoU held constant.
Var cag_loss(const Var& saliency, const Var& confidence, const Tensor& mask);

}  // namespace vsod::cag
