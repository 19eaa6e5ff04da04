#pragma once

#include <span>
#include <string>
#include <vector>

#include "vsod/tensor.hpp"

// Saliency evaluation: max F-measure over a threshold sweep, S-measure and MAE.
// Frames are (1,1,H,W) tensors (or (N,1,H,W) batches, one frame per sample).
namespace vsod::metrics {

inline constexpr int kDefaultThresholds = 256;
inline constexpr double kBetaSquared = 0.3;
inline constexpr double kStructureAlpha = 0.5;

/// k / (count - 1) for k = 0..count-1. A pixel is foreground at threshold t iff p > t.
std::vector<double> threshold_grid(int count = kDefaultThresholds);

/// F_beta from precision and recall; 0 when the denominator vanishes.
double f_beta(double precision, double recall, double beta_sq = kBetaSquared);

struct FMeasureCurve {
    double max_f = 0.0;
    std::vector<double> per_threshold;
};

/// Per-threshold precision and recall of one frame. Precision is 0 when nothing
/// is predicted; recall is 0 when the ground truth is empty.
struct PrecisionRecall {
    std::vector<double> precision;
    std::vector<double> recall;
};
PrecisionRecall precision_recall(const Tensor& prediction, const Tensor& mask, int thresholds = kDefaultThresholds);

/// Per-frame precision/recall averaged over the batch, then F per threshold.
FMeasureCurve max_f_measure(const Tensor& prediction, const Tensor& mask, int thresholds = kDefaultThresholds);

/// Structure measure (object-aware + region-aware) of a single (1,1,H,W) frame.
double s_measure(const Tensor& prediction, const Tensor& mask, double alpha = kStructureAlpha);

/// Mean absolute error over all elements.
double mae(const Tensor& prediction, const Tensor& mask);

/// Throws std::invalid_argument unless every value is exactly 0 or 1.
void require_binary(const Tensor& mask, const char* what);

struct MetricReport {
    double max_f_beta = 0.0;
    double s_measure = 0.0;
    double mae = 0.0;
    std::vector<double> per_threshold_f;
    int frame_count = 0;
};

std::string to_json(const MetricReport& report, int indent = 2);
MetricReport report_from_json(const std::string& text);

/// Streaming accumulator. Per-frame statistics are kept and reduced in a
/// canonical order at finalize(), so the report does not depend on the order
/// in which frames were added.
class DatasetEvaluator {
public:
    explicit DatasetEvaluator(int thresholds = kDefaultThresholds);

    /// Adds one frame, or every sample of an (N,1,H,W) batch.
    void add(const Tensor& prediction, const Tensor& mask);
    [[nodiscard]] MetricReport finalize() const;
    [[nodiscard]] int frame_count() const { return static_cast<int>(frames_.size()); }

private:
    struct FrameRecord {
        PrecisionRecall pr;
        double mae;
        double s;
    };
    int thresholds_;
    std::vector<FrameRecord> frames_;
};

MetricReport evaluate_dataset(std::span<const Tensor> predictions, std::span<const Tensor> masks,
                              int thresholds = kDefaultThresholds);

/// Sum of values in ascending order; used for every dataset-level reduction.
double canonical_sum(std::vector<double> values);

}  // namespace vsod::metrics
