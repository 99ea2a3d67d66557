#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "isin/rng.hpp"
#include "isin/tensor.hpp"

namespace isin {

struct SgdConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    int batch_size = 16;
    double weight_decay = 1e-4;

    void validate() const {
        check(learning_rate >= 0, "sgd: learning_rate must be nonnegative");
        check(momentum >= 0 && momentum < 1, "sgd: momentum must be in [0,1)");
        check(batch_size >= 1, "sgd: batch_size must be positive");
        check(weight_decay >= 0, "sgd: weight_decay must be nonnegative");
    }
};

/// Named, ordered trainable tensors with gradient and velocity buffers.
template <typename T>
struct ParamStore {
    std::vector<std::string> order;
    std::unordered_map<std::string, Tensor<T>> value;
    std::unordered_map<std::string, Tensor<T>> grad;
    std::unordered_map<std::string, Tensor<T>> velocity;

    Tensor<T>& add(const std::string& name, Tensor<T> init) {
        if (value.count(name)) throw std::invalid_argument("param exists: " + name);
        order.push_back(name);
        grad[name] = Tensor<T>(init.shape);
        velocity[name] = Tensor<T>(init.shape);
        return value[name] = std::move(init);
    }

    void zero_grad() {
        for (auto& [k, g] : grad) g.fill(T(0));
    }

    void zero_velocity() {
        for (auto& [k, v] : velocity) v.fill(T(0));
    }

    int64_t count() const {
        int64_t n = 0;
        for (const auto& name : order) n += value.at(name).numel();
        return n;
    }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& name : order) out.add(name, value.at(name).template cast<U>());
        return out;
    }
};

/// p <- p + momentum*v - lr*(g + wd*p), with v updated to the applied step.
template <typename T>
void sgd_step(ParamStore<T>& params, const SgdConfig& cfg) {
    cfg.validate();
    for (const auto& name : params.order) {
        Tensor<T>& p = params.value[name];
        const Tensor<T>& g = params.grad[name];
        Tensor<T>& v = params.velocity[name];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const T step = static_cast<T>(cfg.momentum) * v.data[i] -
                           static_cast<T>(cfg.learning_rate) *
                               (g.data[i] + static_cast<T>(cfg.weight_decay) * p.data[i]);
            v.data[i] = step;
            p.data[i] += step;
        }
        if (!p.all_finite()) throw std::runtime_error("sgd: parameter '" + name + "' became non-finite");
    }
}

/// Glorot-uniform initialization from a seeded stream.
template <typename T>
Tensor<T> glorot_init(const std::vector<int>& shape, int fan_in, int fan_out, Rng& rng) {
    Tensor<T> t(shape);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return t;
}

}  // namespace isin
