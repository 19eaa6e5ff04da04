#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vsod/tensor.hpp"

namespace vsod {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One value in a reverse-mode tape. Leaves with requires_grad are parameters
/// or inputs whose gradient is wanted; interior nodes keep their inputs alive
/// until the graph is released.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    std::function<void(Node&)> backward_fn;

    /// Gradient buffer, allocated as zeros on first use.
    Tensor& grad_buffer();
};

/// Handle to a tape node. Cheap to copy; copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    [[nodiscard]] const Tensor& value() const { return node_->value; }
    [[nodiscard]] Tensor& mutable_value() { return node_->value; }
    [[nodiscard]] const Shape& shape() const { return node_->value.shape(); }
    [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
    [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }

    /// Accumulated gradient; empty tensor when backward never reached this node.
    [[nodiscard]] const Tensor& grad() const { return node_->grad; }
    void zero_grad() { node_->grad = Tensor(); }

    [[nodiscard]] const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

/// Disables tape recording on this thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

[[nodiscard]] bool grad_enabled();

/// Builds an interior node. The backward closure receives the node whose
/// grad is populated and must accumulate into inputs that require grad.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

/// Reverse sweep from a scalar root, seeding d(root)/d(root) = 1.
void backward(const Var& root);

}  // namespace vsod
