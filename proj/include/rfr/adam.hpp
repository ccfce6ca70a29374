#pragma once

#include <cmath>
#include <vector>

#include "rfr/backbone.hpp"
#include "rfr/tensor.hpp"

namespace rfr::net {

template <typename T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<std::vector<T>> m, v;

    void init_like(const BackboneParams<T>& p) {
        m.clear();
        v.clear();
        for (const auto& b : p.blocks) {
            m.emplace_back(b.size(), T(0));
            v.emplace_back(b.size(), T(0));
        }
        step = 0;
    }
};

/// Standard bias-corrected Adam update. Non-finite gradients signal
/// divergence and abort.
template <typename T>
void adam_step(BackboneParams<T>& p, const Gradients<T>& g, AdamState<T>& st, double lr) {
    if (st.m.size() != p.blocks.size() || g.blocks.size() != p.blocks.size())
        throw std::invalid_argument("adam_step: state/gradient shape mismatch");
    if (!g.finite()) throw NumericalError("adam_step: non-finite gradients");
    st.step += 1;
    const double c1 = 1.0 - std::pow(st.beta1, double(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, double(st.step));
    for (size_t b = 0; b < p.blocks.size(); ++b) {
        auto& w = p.blocks[b].v;
        auto& m = st.m[b];
        auto& v = st.v[b];
        const auto& gr = g.blocks[b];
        for (size_t i = 0; i < w.size(); ++i) {
            double gi = gr[i];
            double mi = st.beta1 * m[i] + (1.0 - st.beta1) * gi;
            double vi = st.beta2 * v[i] + (1.0 - st.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            w[i] -= static_cast<T>(lr * (mi / c1) / (std::sqrt(vi / c2) + st.eps));
        }
    }
}

}  // namespace rfr::net
