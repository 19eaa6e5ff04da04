#include "vsod/dde.hpp"

#include <array>

namespace vsod::dde {

Var differential_enhance(const Var& self, const Var& other, const Conv& diff_conv) {
    require_same_shape(self.shape(), other.shape(), "differential_enhance");
    return ops::add(diff_conv(ops::sub(other, self)), self);
}

DualDifferentialEnhancement::DualDifferentialEnhancement(ParameterStore& store, Initializer& init, int channels,
                                                         int out_channels, const std::string& prefix)
    : rgb_diff_(Conv::make(store, init, prefix + ".rgb_diff", channels, channels, 3, same3x3(), false)),
      flow_diff_(Conv::make(store, init, prefix + ".flow_diff", channels, channels, 3, same3x3(), false)),
      fuse_(Conv::make(store, init, prefix + ".fuse", 2 * channels, out_channels, 3, same3x3())) {}

Var DualDifferentialEnhancement::fuse(const Var& rgb, const Var& flow) const {
    require_same_shape(rgb.shape(), flow.shape(), "dde fuse");
    const std::array<Var, 2> branches{differential_enhance(rgb, flow, rgb_diff_),
                                      differential_enhance(flow, rgb, flow_diff_)};
    return ops::relu(fuse_(ops::concat_channels(branches)));
}

}  // namespace vsod::dde
