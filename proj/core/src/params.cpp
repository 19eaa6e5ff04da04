#include "vsod/params.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vsod {

Var ParameterStore::add(const std::string& name, Tensor init) {
    if (params_.count(name) != 0) throw std::invalid_argument("duplicate parameter name: " + name);
    Var v(std::move(init), true);
    params_.emplace(name, v);
    return v;
}

const Var& ParameterStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

std::size_t ParameterStore::count(const std::string& prefix) const {
    std::size_t total = 0;
    for (const auto& [name, v] : params_) {
        if (name.compare(0, prefix.size(), prefix) == 0) total += v.value().size();
    }
    return total;
}

void ParameterStore::zero_grad() {
    for (auto& [name, v] : params_) {
        Var handle = v;
        handle.zero_grad();
    }
}

Tensor Initializer::conv_kernel(int cout, int cin, int k) {
    Tensor t({cout, cin, k, k});
    const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : t.values()) v = dist(rng_);
    return t;
}

Conv Conv::make(ParameterStore& store, Initializer& init, const std::string& name, int cin, int cout, int k,
                ops::ConvSpec spec, bool with_bias) {
    Conv c;
    c.weight = store.add(name + ".weight", init.conv_kernel(cout, cin, k));
    if (with_bias) c.bias = store.add(name + ".bias", Tensor({1, cout, 1, 1}, 0.0));
    c.spec = spec;
    return c;
}

GroupNorm GroupNorm::make(ParameterStore& store, const std::string& name, int channels, int max_groups) {
    GroupNorm gn;
    gn.groups = std::gcd(channels, max_groups);
    gn.gamma = store.add(name + ".gamma", Tensor({1, channels, 1, 1}, 1.0));
    gn.beta = store.add(name + ".beta", Tensor({1, channels, 1, 1}, 0.0));
    return gn;
}

}  // namespace vsod
