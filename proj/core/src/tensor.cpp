#include "vsod/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vsod {

std::string Shape::str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
        throw ShapeError("negative tensor extent " + shape.str());
    }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape.numel()) {
        throw ShapeError("buffer of " + std::to_string(data_.size()) + " elements does not match shape " +
                         shape.str());
    }
}

Tensor Tensor::sample(int n) const {
    if (n < 0 || n >= shape_.n) throw ShapeError("sample index out of range");
    Shape s{1, shape_.c, shape_.h, shape_.w};
    const std::size_t len = s.numel();
    std::vector<double> buf(data_.begin() + static_cast<std::ptrdiff_t>(len * n),
                            data_.begin() + static_cast<std::ptrdiff_t>(len * (n + 1)));
    return Tensor(s, std::move(buf));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(Shape s) {
    if (s.numel() != data_.size()) {
        throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
    }
    shape_ = s;
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_.str());
    return data_[0];
}

double Tensor::sum() const {
    double acc = 0.0;
    for (double v : data_) acc += v;
    return acc;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor stack_batch(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("stack_batch of zero tensors");
    Shape s = parts.front().shape();
    int n = 0;
    for (const auto& p : parts) {
        const auto& ps = p.shape();
        if (ps.c != s.c || ps.h != s.h || ps.w != s.w) {
            throw ShapeError("stack_batch: " + ps.str() + " vs " + s.str());
        }
        n += ps.n;
    }
    s.n = n;
    std::vector<double> buf;
    buf.reserve(s.numel());
    for (const auto& p : parts) buf.insert(buf.end(), p.values().begin(), p.values().end());
    return Tensor(s, std::move(buf));
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

}  // namespace vsod
