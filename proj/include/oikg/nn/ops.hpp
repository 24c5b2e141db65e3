#pragma once

#include <cstddef>
#include <vector>

#include "oikg/nn/tensor.hpp"

namespace oikg::nn {

// Differentiable primitives. Matrices are [rows x cols]; vectors are rank 1.
// Shape mismatches throw ShapeError.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
/// x [n x q] + b [q], broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& b);
/// v [q] repeated into [n x q].
Tensor broadcast_rows(const Tensor& v, std::size_t n);
Tensor relu(const Tensor& x);
/// Softmax along the last axis (rows of a matrix, or the whole vector).
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
/// Horizontal concatenation of matrices with equal row counts.
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Vertical concatenation; rank-1 parts count as single rows.
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
Tensor select_rows(const Tensor& x, const std::vector<std::size_t>& rows);
/// Mean of the selected rows as a vector [cols]; `rows` must be non-empty.
Tensor mean_rows(const Tensor& x, const std::vector<std::size_t>& rows);
Tensor sum(const Tensor& x);
/// -log softmax(logits)[target] for a logit vector.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
/// Per-row normalisation to zero mean and unit variance (no affine terms).
Tensor layer_norm_rows(const Tensor& x, double eps = 1e-5);

}  // namespace oikg::nn
