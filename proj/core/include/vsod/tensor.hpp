#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vsod {

/// Raised when tensor or map shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NCHW extent. Vectors and scalars are carried as (n,1,1,1) and (1,1,1,1).
struct Shape {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    [[nodiscard]] std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    [[nodiscard]] std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    [[nodiscard]] std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense double-precision NCHW tensor with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

    [[nodiscard]] const Shape& shape() const { return shape_; }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] bool empty() const { return data_.empty(); }

    [[nodiscard]] double* data() { return data_.data(); }
    [[nodiscard]] const double* data() const { return data_.data(); }
    [[nodiscard]] std::span<double> values() { return data_; }
    [[nodiscard]] std::span<const double> values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    [[nodiscard]] double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    /// Pointer to the (n, c) plane.
    double* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
    [[nodiscard]] const double* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

    /// Copy of sample n as a (1,C,H,W) tensor.
    [[nodiscard]] Tensor sample(int n) const;

    void fill(double v);
    /// Reinterprets the buffer with a new shape of equal element count.
    void reshape(Shape s);

    [[nodiscard]] double item() const;
    [[nodiscard]] double sum() const;
    [[nodiscard]] double max_abs() const;
    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    [[nodiscard]] std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    Shape shape_{};
    std::vector<double> data_;
};

/// Stacks (1,C,H,W) tensors (or (k,C,H,W)) along the batch axis.
Tensor stack_batch(std::span<const Tensor> parts);

void require_same_shape(const Shape& a, const Shape& b, const char* what);

}  // namespace vsod
