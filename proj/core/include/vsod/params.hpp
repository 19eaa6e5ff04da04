#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "vsod/autograd.hpp"
#include "vsod/ops.hpp"

namespace vsod {

/// Named, ordered collection of trainable leaves. Names are dotted paths
/// ("cag.rgb.l3.seg.conv1.weight"); iteration order is lexicographic, which
/// makes serialization and optimizer state layout deterministic.
class ParameterStore {
public:
    Var add(const std::string& name, Tensor init);

    [[nodiscard]] const Var& get(const std::string& name) const;
    [[nodiscard]] bool contains(const std::string& name) const { return params_.count(name) != 0; }
    [[nodiscard]] const std::map<std::string, Var>& all() const { return params_; }

    /// Total scalar count, optionally restricted to names starting with prefix.
    [[nodiscard]] std::size_t count(const std::string& prefix = {}) const;
    void zero_grad();

private:
    std::map<std::string, Var> params_;
};

/// Fan-in scaled normal initializer (He), shared by every module.
class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    Tensor conv_kernel(int cout, int cin, int k);
    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

/// A k x k convolution bound to two entries of a ParameterStore.
struct Conv {
    Var weight;
    Var bias;  // undefined for bias-free convolutions
    ops::ConvSpec spec;

    static Conv make(ParameterStore& store, Initializer& init, const std::string& name, int cin, int cout,
                     int k, ops::ConvSpec spec, bool with_bias = true);

    [[nodiscard]] Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, spec); }
    [[nodiscard]] int out_channels() const { return weight.shape().n; }
};

/// "same"-padded 3x3 spec with optional stride and dilation.
inline ops::ConvSpec same3x3(int stride = 1, int dilation = 1) { return {stride, dilation, dilation}; }

struct GroupNorm {
    Var gamma;
    Var beta;
    int groups = 1;

    static GroupNorm make(ParameterStore& store, const std::string& name, int channels, int max_groups);
    [[nodiscard]] Var operator()(const Var& x) const { return ops::group_norm(x, gamma, beta, groups); }
};

}  // namespace vsod
