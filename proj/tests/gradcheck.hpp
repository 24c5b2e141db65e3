#pragma once

// Central finite-difference comparison for reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "oikg/nn/tensor.hpp"

namespace gradcheck {

struct Report {
    double max_rel = 0.0;
    std::size_t checked = 0;
    std::string worst;
};

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

/// `loss` must rebuild the graph from the current values of `inputs`.
inline Report check(const std::function<oikg::nn::Tensor()>& loss, std::vector<std::pair<std::string, oikg::nn::Tensor>> inputs,
                    double h = 1e-4) {
    for (auto& [name, t] : inputs) t.zero_grad();
    oikg::nn::backward(loss());
    std::vector<std::vector<double>> analytic;
    for (auto& [name, t] : inputs) {
        auto g = t.grad();
        std::vector<double> copy(g.begin(), g.end());
        copy.resize(t.numel(), 0.0);
        analytic.push_back(copy);
    }
    Report r;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& t = inputs[k].second;
        auto v = t.mutable_values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double keep = v[i];
            v[i] = keep + h;
            const double up = loss().item();
            v[i] = keep - h;
            const double down = loss().item();
            v[i] = keep;
            const double numeric = (up - down) / (2 * h);
            const double e = rel_err(analytic[k][i], numeric);
            ++r.checked;
            if (e > r.max_rel) {
                r.max_rel = e;
                r.worst = inputs[k].first + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic[k][i]) +
                          " numeric " + std::to_string(numeric);
            }
        }
    }
    return r;
}

}  // namespace gradcheck
