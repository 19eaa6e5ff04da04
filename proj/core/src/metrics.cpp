#include "vsod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <stdexcept>

namespace vsod::metrics {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Object score of the values inside one region: 2x / (x^2 + 1 + sigma + eps),
// sigma the sample standard deviation.
double object_score(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    if (values.size() > 1) {
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size() - 1);
    }
    return 2.0 * mean / (mean * mean + 1.0 + std::sqrt(var) + kEps);
}

double object_similarity(const double* p, const double* g, std::size_t count, double fg_ratio) {
    std::vector<double> fg, bg;
    for (std::size_t i = 0; i < count; ++i) {
        if (g[i] > 0.5) {
            fg.push_back(p[i]);
        } else {
            bg.push_back(1.0 - p[i]);
        }
    }
    return fg_ratio * object_score(fg) + (1.0 - fg_ratio) * object_score(bg);
}

// Structural similarity of one rectangular block [y0,y1) x [x0,x1).
double block_ssim(const double* p, const double* g, int width, int y0, int y1, int x0, int x1) {
    const double n = static_cast<double>(y1 - y0) * (x1 - x0);
    double mx = 0.0, my = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            mx += p[y * width + x];
            my += g[y * width + x];
        }
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double dx = p[y * width + x] - mx, dy = g[y * width + x] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    sxx /= (n - 1.0 + kEps);
    syy /= (n - 1.0 + kEps);
    sxy /= (n - 1.0 + kEps);
    const double alpha = 4.0 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sxx + syy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    if (beta == 0.0) return 1.0;
    return 0.0;
}

double region_similarity(const double* p, const double* g, int h, int w) {
    // Quadrants split at the ground-truth centroid (column count X, row count Y).
    double total = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double v = g[y * w + x];
            total += v;
            sx += v * (x + 1);
            sy += v * (y + 1);
        }
    }
    int cx, cy;
    if (total == 0.0) {
        cx = static_cast<int>(std::round(w / 2.0));
        cy = static_cast<int>(std::round(h / 2.0));
    } else {
        cx = static_cast<int>(std::round(sx / total));
        cy = static_cast<int>(std::round(sy / total));
    }
    const double area = static_cast<double>(w) * h;
    const double w1 = static_cast<double>(cx) * cy / area;
    const double w2 = static_cast<double>(w - cx) * cy / area;
    const double w3 = static_cast<double>(cx) * (h - cy) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    auto part = [&](double weight, int y0, int y1, int x0, int x1) {
        if (y1 <= y0 || x1 <= x0) return 0.0;
        return weight * block_ssim(p, g, w, y0, y1, x0, x1);
    };
    return part(w1, 0, cy, 0, cx) + part(w2, 0, cy, cx, w) + part(w3, cy, h, 0, cx) + part(w4, cy, h, cx, w);
}

void require_frame_pair(const Tensor& prediction, const Tensor& mask, const char* what) {
    require_same_shape(prediction.shape(), mask.shape(), what);
    if (prediction.shape().c != 1) throw ShapeError(std::string(what) + ": expected single-channel maps");
}

}  // namespace

std::vector<double> threshold_grid(int count) {
    if (count < 2) throw std::invalid_argument("threshold_grid: need at least two thresholds");
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) t[k] = static_cast<double>(k) / (count - 1);
    return t;
}

double f_beta(double precision, double recall, double beta_sq) {
    const double denom = beta_sq * precision + recall;
    if (denom <= 0.0) return 0.0;
    return (1.0 + beta_sq) * precision * recall / denom;
}

void require_binary(const Tensor& mask, const char* what) {
    for (double v : mask.values()) {
        if (v != 0.0 && v != 1.0) throw std::invalid_argument(std::string(what) + ": ground truth is not binary");
    }
}

PrecisionRecall precision_recall(const Tensor& prediction, const Tensor& mask, int thresholds) {
    require_frame_pair(prediction, mask, "precision_recall");
    require_binary(mask, "precision_recall");
    const auto grid = threshold_grid(thresholds);
    // For each pixel, the number of thresholds strictly below its value; the
    // pixel is foreground at threshold k iff k < that count.
    std::vector<std::size_t> fg_hist(grid.size() + 1, 0), bg_hist(grid.size() + 1, 0);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const double p = prediction[i];
        const auto below = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), p) - grid.begin());
        if (mask[i] == 1.0) {
            ++fg_hist[below];
            ++positives;
        } else {
            ++bg_hist[below];
        }
    }
    PrecisionRecall pr;
    pr.precision.assign(grid.size(), 0.0);
    pr.recall.assign(grid.size(), 0.0);
    std::size_t tp = 0, fp = 0;
    // Walk thresholds from the top: at threshold k, pixels with count > k are foreground.
    for (std::size_t k = grid.size(); k-- > 0;) {
        tp += fg_hist[k + 1];
        fp += bg_hist[k + 1];
        pr.precision[k] = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        pr.recall[k] = positives == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(positives);
    }
    return pr;
}

FMeasureCurve max_f_measure(const Tensor& prediction, const Tensor& mask, int thresholds) {
    DatasetEvaluator ev(thresholds);
    ev.add(prediction, mask);
    const MetricReport r = ev.finalize();
    return {r.max_f_beta, r.per_threshold_f};
}

double s_measure(const Tensor& prediction, const Tensor& mask, double alpha) {
    require_frame_pair(prediction, mask, "s_measure");
    require_binary(mask, "s_measure");
    if (prediction.shape().n != 1) throw ShapeError("s_measure: expects a single frame");
    const Shape s = mask.shape();
    const double* p = prediction.data();
    const double* g = mask.data();
    const double fg_ratio = mask.sum() / static_cast<double>(mask.size());
    double q;
    if (fg_ratio == 0.0) {
        q = 1.0 - prediction.sum() / static_cast<double>(prediction.size());
    } else if (fg_ratio == 1.0) {
        q = prediction.sum() / static_cast<double>(prediction.size());
    } else {
        q = alpha * object_similarity(p, g, mask.size(), fg_ratio) + (1.0 - alpha) * region_similarity(p, g, s.h, s.w);
        q = std::max(q, 0.0);
    }
    return q;
}

double mae(const Tensor& prediction, const Tensor& mask) {
    require_same_shape(prediction.shape(), mask.shape(), "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) acc += std::abs(prediction[i] - mask[i]);
    return acc / static_cast<double>(mask.size());
}

double canonical_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
}

DatasetEvaluator::DatasetEvaluator(int thresholds) : thresholds_(thresholds) { (void)threshold_grid(thresholds); }

void DatasetEvaluator::add(const Tensor& prediction, const Tensor& mask) {
    require_frame_pair(prediction, mask, "DatasetEvaluator::add");
    require_binary(mask, "DatasetEvaluator::add");
    for (int n = 0; n < mask.shape().n; ++n) {
        const Tensor p = prediction.shape().n == 1 ? prediction : prediction.sample(n);
        const Tensor g = mask.shape().n == 1 ? mask : mask.sample(n);
        frames_.push_back({precision_recall(p, g, thresholds_), mae(p, g), s_measure(p, g)});
    }
}

MetricReport DatasetEvaluator::finalize() const {
    MetricReport r;
    r.frame_count = frame_count();
    r.per_threshold_f.assign(static_cast<std::size_t>(thresholds_), 0.0);
    if (frames_.empty()) return r;
    const double count = static_cast<double>(frames_.size());
    std::vector<double> column(frames_.size());
    for (int k = 0; k < thresholds_; ++k) {
        for (std::size_t f = 0; f < frames_.size(); ++f) column[f] = frames_[f].pr.precision[k];
        const double precision = canonical_sum(column) / count;
        for (std::size_t f = 0; f < frames_.size(); ++f) column[f] = frames_[f].pr.recall[k];
        const double recall = canonical_sum(column) / count;
        r.per_threshold_f[k] = f_beta(precision, recall);
    }
    r.max_f_beta = *std::max_element(r.per_threshold_f.begin(), r.per_threshold_f.end());
    for (std::size_t f = 0; f < frames_.size(); ++f) column[f] = frames_[f].mae;
    r.mae = canonical_sum(column) / count;
    for (std::size_t f = 0; f < frames_.size(); ++f) column[f] = frames_[f].s;
    r.s_measure = canonical_sum(column) / count;
    return r;
}

MetricReport evaluate_dataset(std::span<const Tensor> predictions, std::span<const Tensor> masks, int thresholds) {
    if (predictions.size() != masks.size()) {
        throw std::invalid_argument("evaluate_dataset: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(masks.size()) + " masks");
    }
    DatasetEvaluator ev(thresholds);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (predictions[i].shape() != masks[i].shape()) {
            throw ShapeError("evaluate_dataset: frame " + std::to_string(i) + " resolution mismatch " +
                             predictions[i].shape().str() + " vs " + masks[i].shape().str());
        }
        ev.add(predictions[i], masks[i]);
    }
    return ev.finalize();
}

std::string to_json(const MetricReport& report, int indent) {
    nlohmann::json j;
    j["max_f_beta"] = report.max_f_beta;
    j["s_measure"] = report.s_measure;
    j["mae"] = report.mae;
    j["per_threshold_f"] = report.per_threshold_f;
    j["frame_count"] = report.frame_count;
    return j.dump(indent);
}

MetricReport report_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    MetricReport r;
    r.max_f_beta = j.at("max_f_beta").get<double>();
    r.s_measure = j.at("s_measure").get<double>();
    r.mae = j.at("mae").get<double>();
    r.per_threshold_f = j.at("per_threshold_f").get<std::vector<double>>();
    r.frame_count = j.at("frame_count").get<int>();
    return r;
}

}  // namespace vsod::metrics
