#include "oikg/nn/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "oikg/errors.hpp"

namespace oikg::nn {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape.size() > 2) {
        throw ShapeError("tensor rank must be <= 2, got " + shape_string(shape));
    }
    if (nn::numel(shape) != values.size()) {
        throw ShapeError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                         shape_string(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = nn::numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({}, {v}, requires_grad); }

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
    const std::size_t n = values.size();
    return from({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
    return from({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents, BackwardFn fn) {
#ifndef NDEBUG
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError("non-finite value produced by tensor op");
        }
    }
#endif
    Tensor out = from(std::move(shape), std::move(values), false);
    bool tracked = false;
    for (const auto& p : parents) {
        tracked = tracked || p.requires_grad();
    }
    if (tracked) {
        auto& n = out.node();
        n.requires_grad = true;
        n.parents.reserve(parents.size());
        for (auto& p : parents) {
            n.parents.push_back(p.node_);
        }
        n.backward_fn = std::move(fn);
    }
    return out;
}

detail::Node& Tensor::node() const {
    if (!node_) {
        throw InvalidStateError("use of an undefined tensor");
    }
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }
std::size_t Tensor::numel() const { return node().value.size(); }

std::size_t Tensor::rows() const {
    const auto& s = shape();
    if (s.size() != 2) throw ShapeError("rows() requires a matrix, got " + shape_string(s));
    return s[0];
}

std::size_t Tensor::cols() const {
    const auto& s = shape();
    if (s.size() != 2) throw ShapeError("cols() requires a matrix, got " + shape_string(s));
    return s[1];
}

std::span<const double> Tensor::values() const { return node().value; }
std::span<double> Tensor::mutable_values() { return node().value; }

double Tensor::at(std::size_t r, std::size_t c) const { return node().value[r * cols() + c]; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_string(shape()));
    return node().value[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
std::span<const double> Tensor::grad() const { return node().grad; }
std::span<double> Tensor::mutable_grad() { return node().ensure_grad(); }

void Tensor::zero_grad() {
    auto& g = node().grad;
    std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const { return from(shape(), node().value, false); }

void backward(const Tensor& loss) {
    detail::Node& root = loss.node();
    if (root.value.size() != 1) {
        throw ShapeError("backward() requires a scalar loss, got " + shape_string(root.shape));
    }
    if (!root.requires_grad) {
        throw InvalidStateError("backward() on a loss that does not depend on tracked tensors");
    }
    if (root.consumed) {
        throw InvalidStateError("backward() already called on this loss");
    }
    // Iterative post-order DFS for a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(&root, 0);
    seen.insert(&root);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root.ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) {
            n->backward_fn(*n);
        }
    }
    root.consumed = true;
}

}  // namespace oikg::nn
