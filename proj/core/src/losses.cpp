#include "vsod/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vsod/cag.hpp"
#include "vsod/encoder.hpp"
#include "vsod/ops.hpp"

namespace vsod::losses {

namespace {

double clip_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

// Valid-mode separable filtering of one plane: (h, w) -> (h-k+1, w-k+1).
void filter_valid(const double* in, int h, int w, const std::vector<double>& g, double* tmp, double* out) {
    const int k = static_cast<int>(g.size());
    const int wo = w - k + 1, ho = h - k + 1;
    for (int y = 0; y < h; ++y) {
        const double* row = in + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int j = 0; j < k; ++j) acc += g[j] * row[x + j];
            tmp[y * wo + x] = acc;
        }
    }
    for (int y = 0; y < ho; ++y) {
        for (int x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i) acc += g[i] * tmp[(y + i) * wo + x];
            out[y * wo + x] = acc;
        }
    }
}

// Adjoint of filter_valid; accumulates into in_grad (h, w).
void filter_valid_adjoint(const double* out_grad, int h, int w, const std::vector<double>& g, double* tmp,
                          double* in_grad) {
    const int k = static_cast<int>(g.size());
    const int wo = w - k + 1, ho = h - k + 1;
    std::fill(tmp, tmp + static_cast<std::size_t>(h) * wo, 0.0);
    for (int y = 0; y < ho; ++y) {
        for (int x = 0; x < wo; ++x) {
            const double v = out_grad[y * wo + x];
            for (int i = 0; i < k; ++i) tmp[(y + i) * wo + x] += g[i] * v;
        }
    }
    for (int y = 0; y < h; ++y) {
        double* row = in_grad + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < wo; ++x) {
            const double v = tmp[y * wo + x];
            for (int j = 0; j < k; ++j) row[x + j] += g[j] * v;
        }
    }
}

void require_target(const Var& p, const Tensor& g, const char* what) {
    require_same_shape(p.shape(), g.shape(), what);
}

}  // namespace

Var bce_loss(const Var& prediction, const Tensor& target) {
    require_target(prediction, target, "bce_loss");
    const std::size_t n = target.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = clip_prob(prediction.value()[i]);
        const double g = target[i];
        acc -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    }
    return make_result(Tensor::scalar(acc / static_cast<double>(n)), {prediction}, [target, n](Node& self) {
        Node& pn = *self.inputs[0];
        double* dp = pn.grad_buffer().data();
        const double scale = self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = pn.value[i];
            if (p <= kProbEpsilon || p >= 1.0 - kProbEpsilon) continue;
            const double g = target[i];
            dp[i] += scale * (-g / p + (1.0 - g) / (1.0 - p));
        }
    });
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(size));
    const double centre = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i) {
        g[i] = std::exp(-(i - centre) * (i - centre) / (2.0 * sigma * sigma));
        total += g[i];
    }
    for (auto& v : g) v /= total;
    return g;
}

Var ssim_loss(const Var& prediction, const Tensor& target, const SsimParams& params) {
    require_target(prediction, target, "ssim_loss");
    const Shape s = target.shape();
    const int k = params.window;
    if (s.h < k || s.w < k) {
        throw ShapeError("ssim_loss: map " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " is smaller than the " + std::to_string(k) + "x" + std::to_string(k) + " window");
    }
    const auto g = gaussian_window(k, params.sigma);
    const int ho = s.h - k + 1, wo = s.w - k + 1;
    const std::size_t win = static_cast<std::size_t>(ho) * wo;
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    const double count = static_cast<double>(win * planes);

    // Per-window partial derivatives of SSIM w.r.t. (mu_p, E[p^2], E[pg]).
    std::vector<double> d_mu(win * planes), d_pp(win * planes), d_pg(win * planes);
    std::vector<double> tmp(static_cast<std::size_t>(s.h) * wo);
    std::vector<double> mu_p(win), mu_g(win), e_pp(win), e_gg(win), e_pg(win);
    std::vector<double> sq(s.plane()), prod(s.plane()), gsq(s.plane());
    double ssim_sum = 0.0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const double* p = prediction.value().plane(n, c);
            const double* t = target.plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) {
                sq[i] = p[i] * p[i];
                gsq[i] = t[i] * t[i];
                prod[i] = p[i] * t[i];
            }
            filter_valid(p, s.h, s.w, g, tmp.data(), mu_p.data());
            filter_valid(t, s.h, s.w, g, tmp.data(), mu_g.data());
            filter_valid(sq.data(), s.h, s.w, g, tmp.data(), e_pp.data());
            filter_valid(gsq.data(), s.h, s.w, g, tmp.data(), e_gg.data());
            filter_valid(prod.data(), s.h, s.w, g, tmp.data(), e_pg.data());
            const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * win;
            for (std::size_t i = 0; i < win; ++i) {
                const double mp = mu_p[i], mg = mu_g[i];
                const double a1 = 2.0 * mp * mg + params.c1;
                const double a2 = 2.0 * (e_pg[i] - mp * mg) + params.c2;
                const double b1 = mp * mp + mg * mg + params.c1;
                const double b2 = (e_pp[i] - mp * mp) + (e_gg[i] - mg * mg) + params.c2;
                const double denom = b1 * b2;
                const double ssim = a1 * a2 / denom;
                ssim_sum += ssim;
                d_mu[base + i] = (2.0 * mg * a2 - 2.0 * mg * a1) / denom - ssim * (2.0 * mp / b1 - 2.0 * mp / b2);
                d_pp[base + i] = -ssim / b2;
                d_pg[base + i] = 2.0 * a1 / denom;
            }
        }
    }
    const double loss = 1.0 - ssim_sum / count;
    return make_result(
        Tensor::scalar(loss), {prediction},
        [target, g, s, ho, wo, win, count, d_mu = std::move(d_mu), d_pp = std::move(d_pp),
         d_pg = std::move(d_pg)](Node& self) {
            Node& pn = *self.inputs[0];
            const double scale = -self.grad[0] / count;
            std::vector<double> tmp(static_cast<std::size_t>(s.h) * wo);
            std::vector<double> ga(win), gb(win), gc(win);
            std::vector<double> adj_a(s.plane()), adj_b(s.plane()), adj_c(s.plane());
            for (int n = 0; n < s.n; ++n) {
                for (int c = 0; c < s.c; ++c) {
                    const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * win;
                    for (std::size_t i = 0; i < win; ++i) {
                        ga[i] = scale * d_mu[base + i];
                        gb[i] = scale * d_pp[base + i];
                        gc[i] = scale * d_pg[base + i];
                    }
                    std::fill(adj_a.begin(), adj_a.end(), 0.0);
                    std::fill(adj_b.begin(), adj_b.end(), 0.0);
                    std::fill(adj_c.begin(), adj_c.end(), 0.0);
                    filter_valid_adjoint(ga.data(), s.h, s.w, g, tmp.data(), adj_a.data());
                    filter_valid_adjoint(gb.data(), s.h, s.w, g, tmp.data(), adj_b.data());
                    filter_valid_adjoint(gc.data(), s.h, s.w, g, tmp.data(), adj_c.data());
                    const double* p = pn.value.plane(n, c);
                    const double* t = target.plane(n, c);
                    double* dp = pn.grad_buffer().plane(n, c);
                    for (std::size_t i = 0; i < s.plane(); ++i) {
                        dp[i] += adj_a[i] + 2.0 * p[i] * adj_b[i] + t[i] * adj_c[i];
                    }
                }
            }
            (void)ho;
        });
}

Var iou_loss(const Var& prediction, const Tensor& target) {
    require_target(prediction, target, "iou_loss");
    const Shape s = target.shape();
    const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
    std::vector<double> inter(s.n), uni(s.n);
    double acc = 0.0;
    for (int n = 0; n < s.n; ++n) {
        const double* p = prediction.value().data() + n * per;
        const double* t = target.data() + n * per;
        double i_sum = 0.0, u_sum = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            i_sum += p[i] * t[i];
            u_sum += p[i] + t[i] - p[i] * t[i];
        }
        inter[n] = i_sum + kIouEpsilon;  // smoothed: two empty maps give zero loss
        uni[n] = u_sum + kIouEpsilon;
        acc += 1.0 - inter[n] / uni[n];
    }
    const double batch = s.n;
    return make_result(Tensor::scalar(acc / batch), {prediction},
                       [target, per, batch, inter = std::move(inter), uni = std::move(uni)](Node& self) {
                           Node& pn = *self.inputs[0];
                           const double scale = self.grad[0] / batch;
                           for (std::size_t n = 0; n < inter.size(); ++n) {
                               const double* t = target.data() + n * per;
                               double* dp = pn.grad_buffer().data() + n * per;
                               const double u2 = uni[n] * uni[n];
                               for (std::size_t i = 0; i < per; ++i) {
                                   dp[i] -= scale * (t[i] * uni[n] - inter[n] * (1.0 - t[i])) / u2;
                               }
                           }
                       });
}

double iou_loss_with_true_negatives(const Tensor& prediction, const Tensor& target) {
    require_same_shape(prediction.shape(), target.shape(), "iou_loss_with_true_negatives");
    const Shape s = target.shape();
    const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
    double acc = 0.0;
    for (int n = 0; n < s.n; ++n) {
        double tp = 0.0, tn = 0.0, fp = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            const double p = prediction[n * per + i], t = target[n * per + i];
            tp += p * t;
            tn += (1.0 - p) * (1.0 - t);
            fp += p * (1.0 - t);
        }
        acc += 1.0 - tp / (tn + tp + fp + kIouEpsilon);
    }
    return acc / s.n;
}

Var l1_to_target(const Var& values, const Tensor& target) {
    require_target(values, target, "l1_to_target");
    const std::size_t n = target.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::abs(values.value()[i] - target[i]);
    return make_result(Tensor::scalar(acc / static_cast<double>(n)), {values}, [target, n](Node& self) {
        Node& vn = *self.inputs[0];
        const double scale = self.grad[0] / static_cast<double>(n);
        double* dv = vn.grad_buffer().data();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = vn.value[i] - target[i];
            dv[i] += scale * static_cast<double>((d > 0.0) - (d < 0.0));
        }
    });
}

Var final_loss(const Var& prediction, const Tensor& target, const FinalLossTerms& terms) {
    std::vector<Var> parts;
    if (terms.bce) parts.push_back(bce_loss(prediction, target));
    if (terms.ssim) parts.push_back(ssim_loss(prediction, target));
    if (terms.iou) parts.push_back(iou_loss(prediction, target));
    if (parts.empty()) throw std::invalid_argument("final_loss: all terms disabled");
    return ops::add_scalars(parts);
}

TotalLoss total_loss(const Var& prediction, const Tensor& target, std::span<const AuxPrediction> aux,
                     bool expect_gates, const FinalLossTerms& terms) {
    const std::size_t expected = 2 * kPyramidLevels;
    if (expect_gates && aux.size() != expected) {
        throw std::invalid_argument("total_loss: expected " + std::to_string(expected) +
                                    " gate outputs, got " + std::to_string(aux.size()));
    }
    if (!expect_gates && !aux.empty()) {
        throw std::invalid_argument("total_loss: gate outputs supplied for a mode without gates");
    }
    TotalLoss out;
    Var lf = final_loss(prediction, target, terms);
    out.final_term = lf.value().item();
    std::vector<Var> parts{lf};
    const int full_h = target.shape().h;
    for (const auto& a : aux) {
        const int factor = full_h / a.saliency.shape().h;
        const Tensor gi = area_downsample(target, factor);
        Var term = cag::cag_loss(a.saliency, a.confidence, gi);
        out.gate_term += term.value().item();
        ++out.gate_terms;
        parts.push_back(term);
    }
    out.total = ops::add_scalars(parts);
    return out;
}

}  // namespace vsod::losses
