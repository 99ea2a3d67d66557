#pragma once

#include <functional>
#include <vector>

#include "isin/graph.hpp"
#include "isin/rng.hpp"
#include "isin/tensor.hpp"

namespace isin::test {

/// Builds a fresh graph around the given input tensors and returns the
/// scalar loss node. Called repeatedly by the finite-difference check, so
/// it must be a pure function of the inputs.
using BuildFn = std::function<Graph<double>::NodeId(Graph<double>&, const std::vector<Graph<double>::NodeId>&)>;

inline double eval_loss(const BuildFn& build, const std::vector<Tensor<double>>& inputs) {
    Graph<double> g;
    std::vector<Graph<double>::NodeId> ids;
    for (const auto& t : inputs) ids.push_back(g.input(t, false));
    return g.value(build(g, ids)).data[0];
}

/// Max relative error between analytic and central-difference gradients
/// over every element of every input.
inline double grad_check(const BuildFn& build, std::vector<Tensor<double>> inputs,
                         double step = 1e-5) {
    std::vector<Tensor<double>> analytic;
    {
        Graph<double> g;
        std::vector<Graph<double>::NodeId> ids;
        for (const auto& t : inputs) ids.push_back(g.input(t, true));
        g.backward(build(g, ids));
        for (auto id : ids) analytic.push_back(g.grad(id));
    }
    double worst = 0;
    for (size_t t = 0; t < inputs.size(); ++t) {
        for (size_t i = 0; i < inputs[t].data.size(); ++i) {
            const double keep = inputs[t].data[i];
            inputs[t].data[i] = keep + step;
            const double lp = eval_loss(build, inputs);
            inputs[t].data[i] = keep - step;
            const double lm = eval_loss(build, inputs);
            inputs[t].data[i] = keep;
            const double fd = (lp - lm) / (2 * step);
            const double an = analytic[t].data[i];
            const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

inline Tensor<double> random_tensor(const std::vector<int>& shape, Rng& rng, double lo = -1,
                                    double hi = 1) {
    Tensor<double> t(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace isin::test
