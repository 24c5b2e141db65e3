#include "oikg/nn/layers.hpp"

#include <cmath>

#include "oikg/errors.hpp"

namespace oikg::nn {

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() == 1) {
        Tensor y = linear(reshape(x, {1, x.dim(0)}), weight, bias);
        return reshape(y, {y.dim(1)});
    }
    Tensor y = matmul(x, weight);
    return bias.defined() ? add_row(y, bias) : y;
}

Linear Linear::from(const ParamStore& store, const std::string& prefix) {
    Linear l;
    l.weight = store.get(prefix + ".W");
    if (store.contains(prefix + ".b")) {
        l.bias = store.get(prefix + ".b");
    }
    return l;
}

std::vector<ParamSpec> Linear::specs(const std::string& prefix, std::size_t in, std::size_t out, bool with_bias) {
    std::vector<ParamSpec> s{{prefix + ".W", {in, out}}};
    if (with_bias) s.push_back({prefix + ".b", {out}});
    return s;
}

Tensor mlp(const Tensor& x, const std::vector<Linear>& layers) {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = layers[i](h);
        if (i + 1 < layers.size()) h = relu(h);
    }
    return h;
}

Mlp Mlp::from(const ParamStore& store, const std::string& prefix, std::size_t depth) {
    Mlp m;
    for (std::size_t i = 0; i < depth; ++i) {
        m.layers.push_back(Linear::from(store, prefix + "." + std::to_string(i)));
    }
    return m;
}

std::vector<ParamSpec> Mlp::specs(const std::string& prefix, const std::vector<std::size_t>& dims) {
    std::vector<ParamSpec> s;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        auto l = Linear::specs(prefix + "." + std::to_string(i), dims[i], dims[i + 1]);
        s.insert(s.end(), l.begin(), l.end());
    }
    return s;
}

AttentionParams AttentionParams::from(const ParamStore& store, const std::string& prefix) {
    return {store.get(prefix + ".Wq"), store.get(prefix + ".Wk"), store.get(prefix + ".Wv"), store.get(prefix + ".Wo"),
            store.get(prefix + ".bo")};
}

std::vector<ParamSpec> AttentionParams::specs(const std::string& prefix, std::size_t q_dim, std::size_t kv_dim,
                                              std::size_t d_model) {
    return {{prefix + ".Wq", {q_dim, d_model}},
            {prefix + ".Wk", {kv_dim, d_model}},
            {prefix + ".Wv", {kv_dim, d_model}},
            {prefix + ".Wo", {d_model, q_dim}},
            {prefix + ".bo", {q_dim}}};
}

AttentionOutput attention(const Tensor& query, const Tensor& key, const Tensor& value, const AttentionParams& p,
                          std::size_t heads) {
    const std::size_t d_model = p.wq.dim(1);
    if (heads == 0 || d_model % heads != 0) {
        throw ShapeError("attention: d_model " + std::to_string(d_model) + " not divisible by " +
                         std::to_string(heads) + " heads");
    }
    if (key.rows() != value.rows()) {
        throw ShapeError("attention: key and value row counts differ");
    }
    const std::size_t head_dim = d_model / heads;
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const Tensor q = matmul(query, p.wq);
    const Tensor k = matmul(key, p.wk);
    const Tensor v = matmul(value, p.wv);

    AttentionOutput out;
    std::vector<Tensor> head_outputs;
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t begin = h * head_dim;
        const Tensor qh = heads == 1 ? q : slice_cols(q, begin, head_dim);
        const Tensor kh = heads == 1 ? k : slice_cols(k, begin, head_dim);
        const Tensor vh = heads == 1 ? v : slice_cols(v, begin, head_dim);
        const Tensor weights = softmax(scale(matmul(qh, transpose(kh)), inv_scale));
        head_outputs.push_back(matmul(weights, vh));
        out.weights.push_back(weights);
    }
    out.heads = heads == 1 ? head_outputs[0] : concat_cols(head_outputs);
    out.output = add_row(matmul(out.heads, p.wo), p.bo);
    return out;
}

Tensor sinusoidal_positions(std::size_t length, std::size_t dim) {
    std::vector<double> values(length * dim);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(dim);
            const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
            values[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    }
    return Tensor::matrix(length, dim, std::move(values));
}

}  // namespace oikg::nn
