#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "vsod/ops.hpp"

namespace vsod::testing {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(shape);
    for (double& v : t.values()) v = u(rng);
    return t;
}

Var random_projection(const Var& out, std::uint64_t seed) {
    return ops::mean_all(ops::mul(out, Var(random_tensor(out.shape(), seed))));
}

Var project_outputs(const ModelOutput& out, std::uint64_t seed) {
    std::vector<Var> parts{random_projection(out.prediction, seed)};
    for (const auto& a : out.aux) {
        parts.push_back(random_projection(a.saliency, ++seed));
        parts.push_back(random_projection(a.confidence, ++seed));
    }
    return ops::add_scalars(parts);
}

void jitter_biases(ParameterStore& store, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (const auto& [name, v] : store.all()) {
        if (!name.ends_with(".bias")) continue;
        Var p = v;
        for (double& x : p.mutable_value().values()) x += u(rng);
    }
}

GradCheckResult check_gradients(const std::function<Var()>& f, const Leaves& leaves, int samples_per_leaf,
                                const std::vector<double>& steps, std::uint64_t seed, double floor) {
    if (steps.empty()) throw std::invalid_argument("check_gradients: no step sizes");
    for (const auto& [name, v] : leaves) {
        Var leaf = v;
        leaf.zero_grad();
    }
    backward(f());

    std::mt19937_64 rng(seed);
    GradCheckResult result;
    for (const auto& [name, v] : leaves) {
        Var leaf = v;
        const Tensor analytic = leaf.grad().empty() ? Tensor(leaf.shape()) : leaf.grad();
        std::vector<std::size_t> idx(leaf.value().size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (samples_per_leaf >= 0 && idx.size() > static_cast<std::size_t>(samples_per_leaf)) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(samples_per_leaf);
        }
        double diff_sq = 0.0, a_sq = 0.0, n_sq = 0.0;
        for (std::size_t i : idx) {
            double& x = leaf.mutable_value()[i];
            const double saved = x;
            double numeric = 0.0;
            for (std::size_t k = 0; k < steps.size(); ++k) {
                const double h = steps[k];
                x = saved + h;
                const double fp = f().value().item();
                x = saved - h;
                const double fm = f().value().item();
                x = saved;
                const double n = (fp - fm) / (2.0 * h);
                if (k == 0 || std::abs(n - analytic[i]) < std::abs(numeric - analytic[i])) numeric = n;
            }
            diff_sq += (analytic[i] - numeric) * (analytic[i] - numeric);
            a_sq += analytic[i] * analytic[i];
            n_sq += numeric * numeric;
            ++result.checked;
        }
        const double rel = std::sqrt(diff_sq) / std::max({std::sqrt(a_sq), std::sqrt(n_sq), floor});
        if (rel >= result.max_rel_error) {
            result.max_rel_error = rel;
            result.worst_leaf = name;
        }
    }
    return result;
}

}  // namespace vsod::testing
