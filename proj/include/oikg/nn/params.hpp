#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oikg/nn/tensor.hpp"

namespace oikg::nn {

enum class ParamInit {
    Auto,    // matrices: Xavier uniform, vectors: zeros
    Xavier,
    Zeros,
};

struct ParamSpec {
    std::string name;
    Shape shape;
    ParamInit init = ParamInit::Auto;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Named trainable tensors plus adaptive-moment optimiser state. Move-only:
/// tensors are shared handles, so copies must go through clone().
class ParamStore {
public:
    ParamStore() = default;
    ParamStore(ParamStore&&) = default;
    ParamStore& operator=(ParamStore&&) = default;
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;

    /// Xavier-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
    /// Each tensor draws from its own (seed, name) substream.
    static ParamStore init(const std::vector<ParamSpec>& specs, std::uint64_t seed);

    ParamStore clone() const;

    bool contains(const std::string& name) const { return entries_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;
    std::vector<std::string> names() const;
    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;
    long steps() const { return steps_; }

    void zero_grad();
    double grad_norm() const;
    /// Rescales all gradients so their global norm is at most max_norm;
    /// returns the norm before clipping.
    double clip_grad_norm(double max_norm);
    /// One bias-corrected adaptive-moment update; gradients are zeroed after.
    void adam_step(const AdamConfig& cfg);

    /// Overwrites values from `other`; names and shapes must match exactly.
    void assign_values(const std::map<std::string, Tensor>& other);

private:
    struct Entry {
        Tensor param;
        std::vector<double> m;
        std::vector<double> v;
        long t = 0;
    };

    std::map<std::string, Entry> entries_;
    long steps_ = 0;
};

inline ParamStore init_params(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
    return ParamStore::init(specs, seed);
}

}  // namespace oikg::nn
