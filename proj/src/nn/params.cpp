#include "oikg/nn/params.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "oikg/errors.hpp"
#include "oikg/rng.hpp"

namespace oikg::nn {

ParamStore ParamStore::init(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
    ParamStore store;
    for (const ParamSpec& spec : specs) {
        if (store.contains(spec.name)) {
            throw std::invalid_argument("init_params: duplicate parameter name '" + spec.name + "'");
        }
        if (spec.shape.empty() || spec.shape.size() > 2) {
            throw ShapeError("init_params: parameter '" + spec.name + "' must be a vector or matrix");
        }
        std::vector<double> values(numel(spec.shape), 0.0);
        const bool xavier = spec.init == ParamInit::Xavier || (spec.init == ParamInit::Auto && spec.shape.size() == 2);
        if (xavier) {
            const double fan_in = static_cast<double>(spec.shape.size() == 2 ? spec.shape[0] : 1);
            const double fan_out = static_cast<double>(spec.shape.back());
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            Rng rng = make_rng(seed, spec.name);
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : values) v = dist(rng);
        }
        Entry e;
        e.param = Tensor::from(spec.shape, std::move(values), true);
        e.m.assign(e.param.numel(), 0.0);
        e.v.assign(e.param.numel(), 0.0);
        store.entries_.emplace(spec.name, std::move(e));
    }
    return store;
}

ParamStore ParamStore::clone() const {
    ParamStore copy;
    for (const auto& [name, e] : entries_) {
        Entry c;
        c.param = Tensor::from(e.param.shape(), std::vector<double>(e.param.values().begin(), e.param.values().end()), true);
        c.m = e.m;
        c.v = e.v;
        c.t = e.t;
        copy.entries_.emplace(name, std::move(c));
    }
    copy.steps_ = steps_;
    return copy;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw std::invalid_argument("ParamStore: no parameter named '" + name + "'");
    }
    return it->second.param;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.param.numel();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [name, e] : entries_) e.param.zero_grad();
}

double ParamStore::grad_norm() const {
    double total = 0.0;
    for (const auto& [name, e] : entries_) {
        for (double g : e.param.grad()) total += g * g;
    }
    return std::sqrt(total);
}

double ParamStore::clip_grad_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm > max_norm && norm > 0.0) {
        const double factor = max_norm / norm;
        for (auto& [name, e] : entries_) {
            if (e.param.grad().empty()) continue;
            for (double& g : e.param.mutable_grad()) g *= factor;
        }
    }
    return norm;
}

void ParamStore::adam_step(const AdamConfig& cfg) {
    ++steps_;
    for (auto& [name, e] : entries_) {
        if (e.param.grad().empty()) continue;
        // Bias correction counts the updates this tensor actually received.
        const double t = static_cast<double>(++e.t);
        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = 1.0 - std::pow(cfg.beta2, t);
        auto values = e.param.mutable_values();
        auto grad = e.param.mutable_grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
            e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = e.m[i] / c1;
            const double v_hat = e.v[i] / c2;
            values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
            grad[i] = 0.0;
        }
    }
}

void ParamStore::assign_values(const std::map<std::string, Tensor>& other) {
    if (other.size() != entries_.size()) {
        throw ShapeError("parameter count mismatch: expected " + std::to_string(entries_.size()) + ", got " +
                         std::to_string(other.size()));
    }
    for (const auto& [name, t] : other) {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            throw ShapeError("unexpected parameter '" + name + "'");
        }
        if (it->second.param.shape() != t.shape()) {
            throw ShapeError("parameter '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                             shape_string(it->second.param.shape()));
        }
    }
    for (const auto& [name, t] : other) {
        auto dst = entries_.at(name).param.mutable_values();
        std::copy(t.values().begin(), t.values().end(), dst.begin());
    }
}

}  // namespace oikg::nn
