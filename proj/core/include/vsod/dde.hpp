#pragma once

#include <string>

#include "vsod/params.hpp"

namespace vsod::dde {

/// conv(other - self) + self. The convolution is expected to be bias-free.
Var differential_enhance(const Var& self, const Var& other, const Conv& diff_conv);

/// Dual differential enhancement: each stream is enhanced by a convolution of
/// the cross-stream difference (one bias-free 3x3 kernel per stream), the two
/// results are concatenated and fused by a 3x3 conv + ReLU down to out_channels.
class DualDifferentialEnhancement {
public:
    DualDifferentialEnhancement(ParameterStore& store, Initializer& init, int channels, int out_channels,
                                const std::string& prefix);

    [[nodiscard]] Var fuse(const Var& rgb, const Var& flow) const;

    [[nodiscard]] const Conv& rgb_diff() const { return rgb_diff_; }
    [[nodiscard]] const Conv& flow_diff() const { return flow_diff_; }
    [[nodiscard]] const Conv& fusion() const { return fuse_; }

private:
    Conv rgb_diff_;
    Conv flow_diff_;
    Conv fuse_;
};

}  // namespace vsod::dde
