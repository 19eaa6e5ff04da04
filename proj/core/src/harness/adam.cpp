#include "vsod/harness/adam.hpp"

#include <cmath>

namespace vsod::harness {

void Adam::step(ParameterStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (const auto& [name, var] : params.all()) {
        const Tensor& g = var.grad();
        if (g.empty()) continue;
        auto it = state_.find(name);
        if (it == state_.end()) {
            it = state_.emplace(name, Moments{Tensor(g.shape()), Tensor(g.shape())}).first;
        }
        Moments& mom = it->second;
        Var handle = var;
        double* w = handle.mutable_value().data();
        double* m = mom.m.data();
        double* v = mom.v.data();
        const double* gd = g.data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gd[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gd[i] * gd[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

}  // namespace vsod::harness
