#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vsod/params.hpp"

namespace vsod::harness {

struct AdamConfig {
    double learning_rate = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction, constant learning rate.
class Adam {
public:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// Applies one update to every parameter that received a gradient.
    void step(ParameterStore& params);

    [[nodiscard]] std::int64_t steps() const { return t_; }
    [[nodiscard]] const AdamConfig& config() const { return cfg_; }
    [[nodiscard]] const std::map<std::string, Moments>& state() const { return state_; }

    void restore(std::int64_t t, std::map<std::string, Moments> state) {
        t_ = t;
        state_ = std::move(state);
    }

private:
    AdamConfig cfg_;
    std::int64_t t_ = 0;
    std::map<std::string, Moments> state_;
};

}  // namespace vsod::harness
