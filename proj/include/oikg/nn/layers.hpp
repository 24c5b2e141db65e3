#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "oikg/nn/ops.hpp"
#include "oikg/nn/params.hpp"

namespace oikg::nn {

/// y = xW + b for a matrix [n x p] or a vector [p].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct Linear {
    Tensor weight;  // [in x out]
    Tensor bias;    // [out]; may be undefined

    static Linear from(const ParamStore& store, const std::string& prefix);
    static std::vector<ParamSpec> specs(const std::string& prefix, std::size_t in, std::size_t out, bool with_bias = true);

    Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

/// Linear layers with ReLU between them (none after the last).
Tensor mlp(const Tensor& x, const std::vector<Linear>& layers);

struct Mlp {
    std::vector<Linear> layers;

    static Mlp from(const ParamStore& store, const std::string& prefix, std::size_t depth);
    /// dims = {in, hidden..., out}
    static std::vector<ParamSpec> specs(const std::string& prefix, const std::vector<std::size_t>& dims);

    Tensor operator()(const Tensor& x) const { return mlp(x, layers); }
};

struct AttentionParams {
    Tensor wq;  // [q_dim x d_model]
    Tensor wk;  // [kv_dim x d_model]
    Tensor wv;  // [kv_dim x d_model]
    Tensor wo;  // [d_model x q_dim]
    Tensor bo;  // [q_dim]

    static AttentionParams from(const ParamStore& store, const std::string& prefix);
    static std::vector<ParamSpec> specs(const std::string& prefix, std::size_t q_dim, std::size_t kv_dim,
                                        std::size_t d_model);
};

struct AttentionOutput {
    Tensor output;                // [n x q_dim], after the output projection
    Tensor heads;                 // [n x d_model], concatenated head outputs before projection
    std::vector<Tensor> weights;  // per head, [n x m] row-stochastic
};

/// Multi-head scaled dot-product attention:
/// head_h = softmax(Q Wq_h (K Wk_h)^T / sqrt(d_model / heads)) V Wv_h,
/// output = concat(head_1..head_H) Wo + bo.
AttentionOutput attention(const Tensor& query, const Tensor& key, const Tensor& value, const AttentionParams& params,
                          std::size_t heads);

/// Fixed sinusoidal position signal [length x dim].
Tensor sinusoidal_positions(std::size_t length, std::size_t dim);

}  // namespace oikg::nn
