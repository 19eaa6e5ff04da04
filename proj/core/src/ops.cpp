#include "vsod/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace vsod::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeometry {
    int cin, h, w;
    int k;
    int ho, wo;
    ConvSpec spec;

    [[nodiscard]] bool is_pointwise() const {
        return k == 1 && spec.stride == 1 && spec.pad == 0;
    }
    [[nodiscard]] int rows() const { return cin * k * k; }
    [[nodiscard]] int cols() const { return ho * wo; }
};

void im2col(const double* img, const ConvGeometry& g, double* col) {
    const int s = g.spec.stride, p = g.spec.pad, d = g.spec.dilation;
    for (int ci = 0; ci < g.cin; ++ci) {
        const double* plane = img + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                double* out = col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.cols();
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * s - p + ky * d;
                    double* row = out + static_cast<std::size_t>(oy) * g.wo;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(row, row + g.wo, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * s - p + kx * d;
                        row[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, const ConvGeometry& g, double* img) {
    const int s = g.spec.stride, p = g.spec.pad, d = g.spec.dilation;
    for (int ci = 0; ci < g.cin; ++ci) {
        double* plane = img + static_cast<std::size_t>(ci) * g.h * g.w;
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const double* in = col + static_cast<std::size_t>((ci * g.k + ky) * g.k + kx) * g.cols();
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * s - p + ky * d;
                    if (iy < 0 || iy >= g.h) continue;
                    const double* row = in + static_cast<std::size_t>(oy) * g.wo;
                    double* dst = plane + static_cast<std::size_t>(iy) * g.w;
                    for (int ox = 0; ox < g.wo; ++ox) {
                        const int ix = ox * s - p + kx * d;
                        if (ix >= 0 && ix < g.w) dst[ix] += row[ox];
                    }
                }
            }
        }
    }
}

void accumulate(Node& node, const Tensor& delta) {
    Tensor& g = node.grad_buffer();
    double* dst = g.data();
    const double* src = delta.data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

}  // namespace

int conv_out_extent(int in, int kernel, ConvSpec spec) {
    return (in + 2 * spec.pad - spec.dilation * (kernel - 1) - 1) / spec.stride + 1;
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, ConvSpec spec) {
    const Shape xs = x.shape();
    const Shape ws = weight.shape();
    if (ws.h != ws.w) throw ShapeError("conv2d: non-square kernel " + ws.str());
    if (ws.c != xs.c) {
        throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                         std::to_string(ws.c));
    }
    if (bias.defined() && bias.shape() != Shape{1, ws.n, 1, 1}) {
        throw ShapeError("conv2d: bias shape " + bias.shape().str());
    }
    ConvGeometry g{xs.c, xs.h, xs.w, ws.h, 0, 0, spec};
    g.ho = conv_out_extent(xs.h, g.k, spec);
    g.wo = conv_out_extent(xs.w, g.k, spec);
    if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: input " + xs.str() + " too small for kernel");

    const int cout = ws.n;
    Tensor out({xs.n, cout, g.ho, g.wo});
    ConstMapMat wmat(weight.value().data(), cout, g.rows());
    std::vector<double> col(g.is_pointwise() ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
    const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    const std::size_t out_stride = static_cast<std::size_t>(cout) * g.cols();
    for (int n = 0; n < xs.n; ++n) {
        const double* img = x.value().data() + n * in_stride;
        const double* colp = img;
        if (!g.is_pointwise()) {
            im2col(img, g, col.data());
            colp = col.data();
        }
        MapMat y(out.data() + n * out_stride, cout, g.cols());
        y.noalias() = wmat * ConstMapMat(colp, g.rows(), g.cols());
        if (bias.defined()) {
            const double* b = bias.value().data();
            for (int co = 0; co < cout; ++co) y.row(co).array() += b[co];
        }
    }

    return make_result(std::move(out), {x, weight, bias}, [g, cout, in_stride, out_stride](Node& self) {
        Node& xn = *self.inputs[0];
        Node& wn = *self.inputs[1];
        Node* bn = self.inputs[2] ? self.inputs[2].get() : nullptr;
        const int batch = self.value.shape().n;
        ConstMapMat wmat(wn.value.data(), cout, g.rows());
        std::vector<double> col(static_cast<std::size_t>(g.rows()) * g.cols());
        for (int n = 0; n < batch; ++n) {
            ConstMapMat dy(self.grad.data() + n * out_stride, cout, g.cols());
            const double* img = xn.value.data() + n * in_stride;
            if (wn.requires_grad) {
                MapMat dw(wn.grad_buffer().data(), cout, g.rows());
                if (g.is_pointwise()) {
                    dw.noalias() += dy * ConstMapMat(img, g.rows(), g.cols()).transpose();
                } else {
                    im2col(img, g, col.data());
                    dw.noalias() += dy * ConstMapMat(col.data(), g.rows(), g.cols()).transpose();
                }
            }
            if (bn && bn->requires_grad) {
                double* db = bn->grad_buffer().data();
                // Plain loop: Eigen's vectorized sum peels by address alignment, so
                // its rounding would depend on where the buffer was allocated.
                for (int co = 0; co < cout; ++co) {
                    const double* row = self.grad.data() + n * out_stride + static_cast<std::size_t>(co) * g.cols();
                    double acc = 0.0;
                    for (int i = 0; i < g.cols(); ++i) acc += row[i];
                    db[co] += acc;
                }
            }
            if (xn.requires_grad) {
                double* dimg = xn.grad_buffer().data() + n * in_stride;
                if (g.is_pointwise()) {
                    MapMat(dimg, g.rows(), g.cols()).noalias() += wmat.transpose() * dy;
                } else {
                    MapMat(col.data(), g.rows(), g.cols()).noalias() = wmat.transpose() * dy;
                    col2im_add(col.data(), g, dimg);
                }
            }
        }
    });
}

Var relu(const Var& x) {
    Tensor out = x.value();
    for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
    return make_result(std::move(out), {x}, [](Node& self) {
        Node& xn = *self.inputs[0];
        double* dx = xn.grad_buffer().data();
        const double* xv = xn.value.data();
        const double* dy = self.grad.data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (xv[i] > 0.0) dx[i] += dy[i];
        }
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x.value();
    for (auto& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
    return make_result(std::move(out), {x}, [](Node& self) {
        Node& xn = *self.inputs[0];
        double* dx = xn.grad_buffer().data();
        const double* y = self.value.data();
        const double* dy = self.grad.data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor out = a.value();
    const double* bv = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        for (auto& in : self.inputs) {
            if (in->requires_grad) accumulate(*in, self.grad);
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.shape(), b.shape(), "sub");
    Tensor out = a.value();
    const double* bv = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        if (self.inputs[0]->requires_grad) accumulate(*self.inputs[0], self.grad);
        if (self.inputs[1]->requires_grad) {
            double* db = self.inputs[1]->grad_buffer().data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.shape(), b.shape(), "mul");
    Tensor out = a.value();
    const double* bv = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return make_result(std::move(out), {a, b}, [](Node& self) {
        Node& an = *self.inputs[0];
        Node& bn = *self.inputs[1];
        if (an.requires_grad) {
            double* da = an.grad_buffer().data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i] * bn.value[i];
        }
        if (bn.requires_grad) {
            double* db = bn.grad_buffer().data();
            for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i] * an.value[i];
        }
    });
}

Var scale(const Var& x, double factor) {
    Tensor out = x.value();
    for (auto& v : out.values()) v *= factor;
    return make_result(std::move(out), {x}, [factor](Node& self) {
        double* dx = self.inputs[0]->grad_buffer().data();
        for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += factor * self.grad[i];
    });
}

Var scale_per_sample(const Var& x, const Var& s) {
    const Shape xs = x.shape();
    if (s.shape() != Shape{xs.n, 1, 1, 1}) {
        throw ShapeError("scale_per_sample: scale shape " + s.shape().str() + " for input " + xs.str());
    }
    const std::size_t per = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
    Tensor out = x.value();
    for (int n = 0; n < xs.n; ++n) {
        const double f = s.value()[n];
        double* p = out.data() + n * per;
        for (std::size_t i = 0; i < per; ++i) p[i] *= f;
    }
    return make_result(std::move(out), {x, s}, [per](Node& self) {
        Node& xn = *self.inputs[0];
        Node& sn = *self.inputs[1];
        const int batch = self.value.shape().n;
        for (int n = 0; n < batch; ++n) {
            const double* dy = self.grad.data() + n * per;
            if (xn.requires_grad) {
                double* dx = xn.grad_buffer().data() + n * per;
                const double f = sn.value[n];
                for (std::size_t i = 0; i < per; ++i) dx[i] += f * dy[i];
            }
            if (sn.requires_grad) {
                const double* xv = xn.value.data() + n * per;
                double acc = 0.0;
                for (std::size_t i = 0; i < per; ++i) acc += xv[i] * dy[i];
                sn.grad_buffer()[n] += acc;
            }
        }
    });
}

Var concat_channels(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no inputs");
    Shape s = parts.front().shape();
    int channels = 0;
    for (const auto& p : parts) {
        const Shape& ps = p.shape();
        if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
            throw ShapeError("concat_channels: " + ps.str() + " vs " + s.str());
        }
        channels += ps.c;
    }
    Shape os{s.n, channels, s.h, s.w};
    Tensor out(os);
    const std::size_t plane = s.plane();
    std::vector<int> offsets;
    int off = 0;
    for (const auto& p : parts) {
        offsets.push_back(off);
        for (int n = 0; n < s.n; ++n) {
            const double* src = p.value().data() + static_cast<std::size_t>(n) * p.shape().c * plane;
            std::copy(src, src + p.shape().c * plane, out.plane(n, off));
        }
        off += p.shape().c;
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return make_result(std::move(out), std::move(inputs), [offsets, plane](Node& self) {
        const int batch = self.value.shape().n;
        for (std::size_t k = 0; k < self.inputs.size(); ++k) {
            Node& in = *self.inputs[k];
            if (!in.requires_grad) continue;
            const int c = in.value.shape().c;
            Tensor& g = in.grad_buffer();
            for (int n = 0; n < batch; ++n) {
                const double* src = self.grad.plane(n, offsets[k]);
                double* dst = g.data() + static_cast<std::size_t>(n) * c * plane;
                for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
            }
        }
    });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
    const Shape xs = x.shape();
    if (groups <= 0 || xs.c % groups != 0) {
        throw ShapeError("group_norm: " + std::to_string(xs.c) + " channels not divisible into " +
                         std::to_string(groups) + " groups");
    }
    if (gamma.shape() != Shape{1, xs.c, 1, 1} || beta.shape() != Shape{1, xs.c, 1, 1}) {
        throw ShapeError("group_norm: affine parameter shape mismatch");
    }
    const int cpg = xs.c / groups;
    const std::size_t plane = xs.plane();
    const std::size_t m = cpg * plane;
    Tensor out(xs);
    Tensor xhat(xs);
    std::vector<double> inv_std(static_cast<std::size_t>(xs.n) * groups);
    for (int n = 0; n < xs.n; ++n) {
        for (int g = 0; g < groups; ++g) {
            const double* src = x.value().plane(n, g * cpg);
            double mean = 0.0;
            for (std::size_t i = 0; i < m; ++i) mean += src[i];
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (std::size_t i = 0; i < m; ++i) var += (src[i] - mean) * (src[i] - mean);
            var /= static_cast<double>(m);
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[static_cast<std::size_t>(n) * groups + g] = is;
            double* xh = xhat.plane(n, g * cpg);
            for (std::size_t i = 0; i < m; ++i) xh[i] = (src[i] - mean) * is;
            for (int c = 0; c < cpg; ++c) {
                const int ch = g * cpg + c;
                const double ga = gamma.value()[ch], be = beta.value()[ch];
                const double* xhc = xh + c * plane;
                double* o = out.plane(n, ch);
                for (std::size_t i = 0; i < plane; ++i) o[i] = xhc[i] * ga + be;
            }
        }
    }
    return make_result(
        std::move(out), {x, gamma, beta},
        [xhat = std::move(xhat), inv_std = std::move(inv_std), groups, cpg, plane, m](Node& self) {
            Node& xn = *self.inputs[0];
            Node& gn = *self.inputs[1];
            Node& bn = *self.inputs[2];
            const Shape s = self.value.shape();
            std::vector<double> dxhat(m);
            for (int n = 0; n < s.n; ++n) {
                for (int g = 0; g < groups; ++g) {
                    double sum_d = 0.0, sum_dx = 0.0;
                    for (int c = 0; c < cpg; ++c) {
                        const int ch = g * cpg + c;
                        const double* dy = self.grad.plane(n, ch);
                        const double* xh = xhat.plane(n, ch);
                        const double ga = gn.value[ch];
                        double dga = 0.0, dbe = 0.0;
                        for (std::size_t i = 0; i < plane; ++i) {
                            const double d = dy[i] * ga;
                            dxhat[c * plane + i] = d;
                            sum_d += d;
                            sum_dx += d * xh[i];
                            dga += dy[i] * xh[i];
                            dbe += dy[i];
                        }
                        if (gn.requires_grad) gn.grad_buffer()[ch] += dga;
                        if (bn.requires_grad) bn.grad_buffer()[ch] += dbe;
                    }
                    if (!xn.requires_grad) continue;
                    const double is = inv_std[static_cast<std::size_t>(n) * groups + g];
                    const double mean_d = sum_d / static_cast<double>(m);
                    const double mean_dx = sum_dx / static_cast<double>(m);
                    const double* xh = xhat.plane(n, g * cpg);
                    double* dx = xn.grad_buffer().plane(n, g * cpg);
                    for (std::size_t i = 0; i < m; ++i) dx[i] += is * (dxhat[i] - mean_d - xh[i] * mean_dx);
                }
            }
        });
}

Var global_avg_pool(const Var& x) {
    const Shape xs = x.shape();
    Tensor out({xs.n, xs.c, 1, 1});
    const std::size_t plane = xs.plane();
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const double* p = x.value().plane(n, c);
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            out.at(n, c, 0, 0) = acc / static_cast<double>(plane);
        }
    }
    return make_result(std::move(out), {x}, [plane](Node& self) {
        Node& xn = *self.inputs[0];
        const Shape s = xn.value.shape();
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                const double g = self.grad.at(n, c, 0, 0) / static_cast<double>(plane);
                double* dx = xn.grad_buffer().plane(n, c);
                for (std::size_t i = 0; i < plane; ++i) dx[i] += g;
            }
        }
    });
}

Var broadcast_spatial(const Var& x, int h, int w) {
    const Shape xs = x.shape();
    if (xs.h != 1 || xs.w != 1) throw ShapeError("broadcast_spatial expects 1x1 maps, got " + xs.str());
    Tensor out({xs.n, xs.c, h, w});
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            double* p = out.plane(n, c);
            std::fill(p, p + out.shape().plane(), x.value().at(n, c, 0, 0));
        }
    }
    return make_result(std::move(out), {x}, [](Node& self) {
        Node& xn = *self.inputs[0];
        const Shape s = self.value.shape();
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                const double* g = self.grad.plane(n, c);
                double acc = 0.0;
                for (std::size_t i = 0; i < s.plane(); ++i) acc += g[i];
                xn.grad_buffer().at(n, c, 0, 0) += acc;
            }
        }
    });
}

namespace {

struct Tap {
    int i0, i1;
    double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        if (src < 0.0) src = 0.0;
        int i0 = static_cast<int>(std::floor(src));
        if (i0 > in - 1) i0 = in - 1;
        const int i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, src - i0};
    }
    return taps;
}

void resize_plane(const double* src, int ih, int iw, double* dst, const std::vector<Tap>& ty,
                  const std::vector<Tap>& tx) {
    const int ow = static_cast<int>(tx.size());
    for (std::size_t y = 0; y < ty.size(); ++y) {
        const auto& a = ty[y];
        const double* r0 = src + static_cast<std::size_t>(a.i0) * iw;
        const double* r1 = src + static_cast<std::size_t>(a.i1) * iw;
        for (int x = 0; x < ow; ++x) {
            const auto& b = tx[x];
            const double top = r0[b.i0] * (1.0 - b.frac) + r0[b.i1] * b.frac;
            const double bot = r1[b.i0] * (1.0 - b.frac) + r1[b.i1] * b.frac;
            dst[y * ow + x] = top * (1.0 - a.frac) + bot * a.frac;
        }
    }
    (void)ih;
}

}  // namespace

Var upsample_bilinear(const Var& x, int out_h, int out_w) {
    const Shape xs = x.shape();
    if (out_h <= 0 || out_w <= 0) throw ShapeError("upsample_bilinear: non-positive output size");
    Tensor out = resize_bilinear(x.value(), out_h, out_w);
    return make_result(std::move(out), {x}, [](Node& self) {
        Node& xn = *self.inputs[0];
        const Shape is = xn.value.shape();
        const Shape os = self.value.shape();
        const auto ty = bilinear_taps(is.h, os.h);
        const auto tx = bilinear_taps(is.w, os.w);
        for (int n = 0; n < os.n; ++n) {
            for (int c = 0; c < os.c; ++c) {
                const double* g = self.grad.plane(n, c);
                double* dx = xn.grad_buffer().plane(n, c);
                for (int y = 0; y < os.h; ++y) {
                    const auto& a = ty[y];
                    for (int xx = 0; xx < os.w; ++xx) {
                        const auto& b = tx[xx];
                        const double v = g[y * os.w + xx];
                        dx[a.i0 * is.w + b.i0] += v * (1.0 - a.frac) * (1.0 - b.frac);
                        dx[a.i0 * is.w + b.i1] += v * (1.0 - a.frac) * b.frac;
                        dx[a.i1 * is.w + b.i0] += v * a.frac * (1.0 - b.frac);
                        dx[a.i1 * is.w + b.i1] += v * a.frac * b.frac;
                    }
                }
            }
        }
    });
    (void)xs;
}

Var mean_all(const Var& x) {
    const double n = static_cast<double>(x.value().size());
    return make_result(Tensor::scalar(x.value().sum() / n), {x}, [n](Node& self) {
        const double g = self.grad[0] / n;
        Tensor& dx = self.inputs[0]->grad_buffer();
        for (auto& v : dx.values()) v += g;
    });
}

Var add_scalars(std::span<const Var> terms) {
    double acc = 0.0;
    for (const auto& t : terms) acc += t.value().item();
    std::vector<Var> inputs(terms.begin(), terms.end());
    return make_result(Tensor::scalar(acc), std::move(inputs), [](Node& self) {
        for (auto& in : self.inputs) {
            if (in->requires_grad) in->grad_buffer()[0] += self.grad[0];
        }
    });
}

}  // namespace vsod::ops

namespace vsod {

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    const Shape xs = x.shape();
    Tensor out({xs.n, xs.c, out_h, out_w});
    const auto ty = ops::bilinear_taps(xs.h, out_h);
    const auto tx = ops::bilinear_taps(xs.w, out_w);
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) ops::resize_plane(x.plane(n, c), xs.h, xs.w, out.plane(n, c), ty, tx);
    }
    return out;
}

Tensor area_downsample(const Tensor& x, int factor) {
    const Shape xs = x.shape();
    if (factor < 1 || xs.h % factor != 0 || xs.w % factor != 0) {
        throw ShapeError("area_downsample: " + xs.str() + " not divisible by " + std::to_string(factor));
    }
    const int oh = xs.h / factor, ow = xs.w / factor;
    Tensor out({xs.n, xs.c, oh, ow});
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const double* src = x.plane(n, c);
            double* dst = out.plane(n, c);
            for (int y = 0; y < xs.h; ++y) {
                for (int xx = 0; xx < xs.w; ++xx) dst[(y / factor) * ow + xx / factor] += src[y * xs.w + xx];
            }
            for (int i = 0; i < oh * ow; ++i) dst[i] *= inv;
        }
    }
    return out;
}

}  // namespace vsod
