#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vsod::testing {

namespace {

double sorted_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

}  // namespace

void brute_force_frame_pr(const Tensor& prediction, const Tensor& mask, int k, double& precision, double& recall) {
    const double t = k / 255.0;
    long tp = 0, fp = 0, fn = 0;
    for (int y = 0; y < mask.shape().h; ++y) {
        for (int x = 0; x < mask.shape().w; ++x) {
            const bool p = prediction.at(0, 0, y, x) > t;
            const bool g = mask.at(0, 0, y, x) == 1.0;
            if (p && g) ++tp;
            if (p && !g) ++fp;
            if (!p && g) ++fn;
        }
    }
    precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

OracleCurve brute_force_f_measure(std::span<const Tensor> predictions, std::span<const Tensor> masks) {
    OracleCurve c;
    const double n = static_cast<double>(predictions.size());
    for (int k = 0; k < 256; ++k) {
        std::vector<double> ps, rs;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            double p, r;
            brute_force_frame_pr(predictions[i], masks[i], k, p, r);
            ps.push_back(p);
            rs.push_back(r);
        }
        const double p = sorted_sum(ps) / n;
        const double r = sorted_sum(rs) / n;
        const double denom = 0.3 * p + r;
        const double f = denom > 0.0 ? 1.3 * p * r / denom : 0.0;
        c.precision.push_back(p);
        c.recall.push_back(r);
        c.f.push_back(f);
        c.max_f = std::max(c.max_f, f);
    }
    return c;
}

std::vector<double> brute_force_iou(const Tensor& prediction, const Tensor& mask) {
    std::vector<double> out;
    const Shape s = mask.shape();
    for (int n = 0; n < s.n; ++n) {
        long inter = 0, uni = 0;
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int x = 0; x < s.w; ++x) {
                    const bool p = prediction.at(n, c, y, x) >= 0.5;
                    const bool g = mask.at(n, c, y, x) >= 0.5;
                    if (p && g) ++inter;
                    if (p || g) ++uni;
                }
            }
        }
        out.push_back(uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni));
    }
    return out;
}

double brute_force_mae(std::span<const Tensor> predictions, std::span<const Tensor> masks) {
    std::vector<double> per_frame;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < masks[i].size(); ++j) acc += std::abs(predictions[i][j] - masks[i][j]);
        per_frame.push_back(acc / static_cast<double>(masks[i].size()));
    }
    return sorted_sum(per_frame) / static_cast<double>(per_frame.size());
}

Tensor random_mask(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor m({1, 1, h, w});
    const int mode = static_cast<int>(rng() % 20);
    if (mode == 0) return m;  // empty
    if (mode == 1) {
        m.fill(1.0);
        return m;
    }
    const int rects = 1 + static_cast<int>(rng() % 3);
    for (int r = 0; r < rects; ++r) {
        const int y0 = static_cast<int>(rng() % h), x0 = static_cast<int>(rng() % w);
        const int y1 = std::min(h, y0 + 1 + static_cast<int>(rng() % (h / 2))),
                  x1 = std::min(w, x0 + 1 + static_cast<int>(rng() % (w / 2)));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) m.at(0, 0, y, x) = 1.0;
        }
    }
    return m;
}

Tensor random_prediction(const Tensor& mask, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor p(mask.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
        double v = std::clamp(0.6 * mask[i] + 0.5 * u(rng) - 0.05, 0.0, 1.0);
        if (rng() % 2 == 0) v = std::round(v * 255.0) / 255.0;
        p[i] = v;
    }
    return p;
}

}  // namespace vsod::testing
