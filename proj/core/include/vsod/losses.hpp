#pragma once

#include <span>
#include <vector>

#include "vsod/autograd.hpp"

// Hybrid segmentation objective: BCE + SSIM + soft IoU on the final map, plus
// the per-level confidence-gate terms summed over both streams.
namespace vsod::losses {

inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kIouEpsilon = 1e-7;

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Mean binary cross entropy with probabilities clipped to [eps, 1-eps].
Var bce_loss(const Var& prediction, const Tensor& target);

/// 1 - mean SSIM over all fully-contained Gaussian windows of every (n,c) plane.
Var ssim_loss(const Var& prediction, const Tensor& target, const SsimParams& params = {});

/// Separable Gaussian window used by ssim_loss (sums to one).
std::vector<double> gaussian_window(int size, double sigma);

/// 1 - (I + eps) / (U + eps) with soft intersection and union, averaged over the batch.
Var iou_loss(const Var& prediction, const Tensor& target);

/// Soft 1 - TP / (TN + TP + FP), the printed variant with true negatives in the
/// denominator. Diagnostic only; never used for training.
double iou_loss_with_true_negatives(const Tensor& prediction, const Tensor& target);

/// Mean |s - target| over the batch; target is held constant.
Var l1_to_target(const Var& values, const Tensor& target);

struct FinalLossTerms {
    bool bce = true;
    bool ssim = true;
    bool iou = true;
};

/// L_f = BCE + SSIM + IoU on the full-resolution prediction.
Var final_loss(const Var& prediction, const Tensor& target, const FinalLossTerms& terms = {});

enum class Stream { Rgb, Flow };

/// Auxiliary outputs of one confidence gate: P_i and s_i at pyramid level `level` (0-based).
struct AuxPrediction {
    int level = 0;
    Stream stream = Stream::Rgb;
    Var saliency;
    Var confidence;
};

struct TotalLoss {
    Var total;
    double final_term = 0.0;
    double gate_term = 0.0;
    int gate_terms = 0;
};

/// L_total = L_f + sum of gate losses. Ground truth for each gate is the
/// full-resolution mask area-downsampled to the gate's map size. When
/// expect_gates is true exactly 2 x 5 auxiliary predictions are required.
TotalLoss total_loss(const Var& prediction, const Tensor& target, std::span<const AuxPrediction> aux,
                     bool expect_gates, const FinalLossTerms& terms = {});

}  // namespace vsod::losses
