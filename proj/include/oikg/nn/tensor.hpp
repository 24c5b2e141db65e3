#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace oikg::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    bool consumed = false;     // backward() already run from this node
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<double>& ensure_grad() {
        if (grad.empty()) {
            grad.assign(value.size(), 0.0);
        }
        return grad;
    }
};

}  // namespace detail

/// Dense row-major float64 array (rank 0, 1 or 2) with reverse-mode
/// gradient tracking. Tensor is a handle: copies share the same storage.
class Tensor {
public:
    using BackwardFn = std::function<void(detail::Node&)>;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor vector(std::vector<double> values, bool requires_grad = false);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad = false);

    /// Result of an op; tracks gradients iff any parent does.
    static Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents, BackwardFn fn);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t i) const { return shape().at(i); }
    std::size_t numel() const;
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    std::span<double> mutable_values();
    double operator[](std::size_t i) const { return values()[i]; }
    double at(std::size_t r, std::size_t c) const;
    double item() const;

    bool requires_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    /// Fresh untracked tensor holding a copy of the values.
    Tensor detach() const;
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

    detail::Node& node() const;
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

    std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
/// tracked tensor reachable from `loss` (intermediates included).
/// Throws InvalidStateError if the loss is untracked or was already used.
void backward(const Tensor& loss);

}  // namespace oikg::nn
