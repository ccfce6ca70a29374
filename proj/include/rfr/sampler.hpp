#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <vector>

#include "rfr/backbone.hpp"
#include "rfr/checkpoint.hpp"
#include "rfr/flowcore.hpp"
#include "rfr/metrics.hpp"
#include "rfr/rng.hpp"
#include "rfr/synthdata.hpp"
#include "rfr/tensor.hpp"

// Fixed-step explicit Euler integration of the induced ODE: the state starts
// at the noise endpoint and is integrated backward in time on the uniform
// grid t_n = (N-n)/N, so the velocity is never evaluated at t = 0.

namespace rfr::sampler {

struct SamplerOptions {
    int steps_N = 3;
    uint64_t seed = 0;
    bool clip_output = true;
    const TensorF* mask = nullptr;  // binary, 1 = known region
    double cfg_scale = 0.0;         // 0 disables guidance
    net::Parameterization parameterization = net::Parameterization::x0_pred;
    bool mask_fresh_noise = false;  // renoise the known region with fresh draws

    void validate() const {
        if (steps_N < 1) throw std::invalid_argument("SamplerOptions: steps_N must be >= 1");
        if (cfg_scale < 0) throw std::invalid_argument("SamplerOptions: cfg_scale must be >= 0");
    }
};

namespace detail {

template <typename T>
void check_mask(const Tensor<T>& mask, int h, int w) {
    if (mask.height != h || mask.width != w)
        throw std::invalid_argument("sampler: mask spatial shape mismatch");
    if (mask.channels != 1)
        throw std::invalid_argument("sampler: mask must be single-channel");
    for (T v : mask.data)
        if (v != T(0) && v != T(1))
            throw std::invalid_argument("sampler: mask must be binary");
}

}  // namespace detail

/// Core Euler loop, generic over precision and over the prediction source so
/// oracle predictors can drive the exact same integration code. `predict`
/// maps (state, t, step) to either an x0 prediction or a velocity, in a
/// domain whose spatial size is `factor` times the state's. For x0
/// predictions the velocity is (state - P(f)) / t with P the box-filter
/// projection onto the state domain (the identity when factor == 1).
/// Returns the last prediction for x0 parameterization (for factor == 1 this
/// equals the final state exactly) and the final state for v-prediction.
template <typename T, typename Predict>
Tensor<T> integrate(Tensor<T> state, Predict&& predict, int N,
                    net::Parameterization parameterization, int factor = 1,
                    const Tensor<T>* mask = nullptr, const Tensor<T>* known = nullptr,
                    const Tensor<T>* init_noise = nullptr, Rng* fresh_rng = nullptr) {
    if (N < 1) throw std::invalid_argument("integrate: N must be >= 1");
    const double dt = 1.0 / N;
    Tensor<T> pred;
    for (int n = 0; n < N; ++n) {
        const double t = double(N - n) / double(N);
        if (mask) {
            // Appendix-F style renoising: pin the known region of the state
            // to the input at the current noise level.
            const T* m = mask->data.data();
            for (int c = 0; c < state.channels; ++c) {
                T* sp = state.plane(c);
                const T* kp = known->plane(c);
                const T* ep = init_noise->plane(c);
                for (int i = 0; i < state.plane_size(); ++i) {
                    if (m[i] == T(0)) continue;
                    double eps = fresh_rng ? fresh_rng->gaussian() : double(ep[i]);
                    sp[i] = static_cast<T>((1.0 - t) * double(kp[i]) + t * eps);
                }
            }
        }
        pred = predict(state, t, n);
        if (parameterization == net::Parameterization::x0_pred) {
            const Tensor<T>* target = &pred;
            Tensor<T> proj;
            if (factor > 1) {
                proj = synth::box_downsample(pred, factor);
                target = &proj;
            }
            state = flow::euler_step(state, *target, t, dt);
        } else {
            // the network output is the velocity itself
            require_same_shape(state, pred, "integrate(v_pred)");
            const T dtT = static_cast<T>(dt);
            for (size_t i = 0; i < state.size(); ++i) state.data[i] -= dtT * pred.data[i];
        }
    }
    if (parameterization == net::Parameterization::x0_pred) return pred;
    return state;
}

/// Assembles the network input for one refinement step: channel-wise
/// concatenation of the condition and the state for the standard path, or
/// the bare state for the bridge variant.
inline TensorF assemble_input(const TensorF* condition, const TensorF& state) {
    if (!condition) return state;
    TensorF in(condition->channels + state.channels, state.height, state.width);
    if (condition->height != state.height || condition->width != state.width)
        throw std::invalid_argument("sampler: condition/state spatial mismatch");
    std::copy(condition->data.begin(), condition->data.end(), in.data.begin());
    std::copy(state.data.begin(), state.data.end(), in.data.begin() + condition->data.size());
    return in;
}

/// Algorithm-2 inference. The initial state is seeded Gaussian noise in the
/// state domain (the LR domain when the checkpoint carries an upsample
/// factor). Output is clipped to [0,1] unless disabled.
inline TensorF infer(const net::BackboneParams<float>& params, const net::CheckpointMeta& meta,
                     const TensorF& x, const SamplerOptions& opts,
                     net::Workspace<float>* ws_opt = nullptr) {
    opts.validate();
    const net::BackboneConfig& cfg = params.cfg;
    if (opts.parameterization != cfg.parameterization)
        throw std::invalid_argument("infer: parameterization mismatch with checkpoint");
    if (x.channels != synth::condition_channels(meta.task))
        throw std::invalid_argument("infer: condition has wrong channel count for task");
    if (opts.cfg_scale > 0 && meta.cfg_dropout_prob <= 0)
        std::cerr << "[rfr] warning: guidance requested but checkpoint was trained without "
                     "condition dropout; results are meaningless\n";

    const int r = cfg.upsample_factor;
    const int sh = x.height, sw = x.width;  // state domain = condition domain
    Rng rng(mix_seed(opts.seed, 0x1f0));
    TensorF state;
    if (meta.bridge) {
        // the bridge path interpolates between the target and the input
        // image, so its prior endpoint at t = 1 is the input itself and no
        // noise is consumed
        state = TensorF(cfg.out_channels, sh, sw);
        std::copy(x.data.begin(), x.data.begin() + state.size(), state.data.begin());
    } else {
        state = gaussian_tensor<float>(cfg.out_channels, sh, sw, rng);
    }

    const TensorF* mask = nullptr;
    TensorF known, init_noise;
    if (opts.mask) {
        detail::check_mask(*opts.mask, sh, sw);
        mask = opts.mask;
        known = TensorF(cfg.out_channels, sh, sw);
        for (int c = 0; c < cfg.out_channels; ++c)
            std::copy(x.plane(c), x.plane(c) + x.plane_size(), known.plane(c));
        init_noise = state;
    }
    Rng fresh_rng(mix_seed(opts.seed, 0x2f1));

    net::Workspace<float> local_ws;
    net::Workspace<float>& ws = ws_opt ? *ws_opt : local_ws;
    TensorF null_cond;
    if (opts.cfg_scale > 0 && !meta.bridge) null_cond = TensorF(x.channels, sh, sw);

    auto predict = [&](const TensorF& s, double t, int) -> TensorF {
        std::optional<double> tt;
        if (cfg.time_embedding) tt = t;
        const TensorF* cond = meta.bridge ? nullptr : &x;
        TensorF f_cond = net::forward(params, assemble_input(cond, s), tt, ws);
        // scale 1 collapses to the conditional prediction exactly, so the
        // null pass is skipped
        if (opts.cfg_scale > 0 && opts.cfg_scale != 1.0 && !meta.bridge) {
            TensorF f_null = net::forward(params, assemble_input(&null_cond, s), tt, ws);
            const float sc = float(opts.cfg_scale);
            // prediction-space extrapolation: f_null + s * (f_cond - f_null)
            for (size_t i = 0; i < f_cond.size(); ++i)
                f_cond.data[i] = f_null.data[i] + sc * (f_cond.data[i] - f_null.data[i]);
        }
        return f_cond;
    };

    TensorF out = integrate(std::move(state), predict, opts.steps_N, cfg.parameterization, r,
                            mask, mask ? &known : nullptr, mask ? &init_noise : nullptr,
                            opts.mask_fresh_noise ? &fresh_rng : nullptr);
    if (opts.clip_output) clip01(out);
    if (mask) {
        // final replacement: known pixels come from the input, bit for bit
        for (int c = 0; c < out.channels; ++c)
            for (int i = 0; i < out.plane_size(); ++i)
                if (mask->data[i] != 0.0f) out.plane(c)[i] = known.plane(c)[i];
    }
    return out;
}

inline TensorF infer_masked(const net::BackboneParams<float>& params,
                            const net::CheckpointMeta& meta, const TensorF& x,
                            const TensorF& mask, SamplerOptions opts) {
    opts.mask = &mask;
    return infer(params, meta, x, opts);
}

struct SweepRow {
    int N = 0;
    double psnr = 0, ssim = 0, seconds = 0;
};

/// Evaluates one trained checkpoint at several step counts with per-image
/// fixed seeds; wall-clock covers the inference calls only.
inline std::vector<SweepRow> step_sweep(const net::BackboneParams<float>& params,
                                        const net::CheckpointMeta& meta,
                                        const std::vector<synth::Pair>& dataset,
                                        const std::vector<int>& n_list,
                                        const SamplerOptions& base) {
    if (n_list.empty()) throw std::invalid_argument("step_sweep: empty N list");
    if (dataset.empty()) throw std::invalid_argument("step_sweep: empty dataset");
    net::Workspace<float> ws;
    {
        // warm-up pass so first-touch costs do not skew the N timing ratios
        SamplerOptions o = base;
        o.steps_N = 1;
        o.seed = mix_seed(base.seed, 0);
        (void)infer(params, meta, dataset[0].condition, o, &ws);
    }
    std::vector<SweepRow> rows;
    for (int n : n_list) {
        SweepRow row;
        row.N = n;
        std::vector<TensorF> outs;
        outs.reserve(dataset.size());
        auto t0 = std::chrono::steady_clock::now();
        for (size_t i = 0; i < dataset.size(); ++i) {
            SamplerOptions o = base;
            o.steps_N = n;
            o.seed = mix_seed(base.seed, i);
            outs.push_back(infer(params, meta, dataset[i].condition, o, &ws));
        }
        row.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        double ps = 0, ss = 0;
        for (size_t i = 0; i < dataset.size(); ++i) {
            ps += metrics::psnr(outs[i], dataset[i].target);
            ss += metrics::ssim(outs[i], dataset[i].target);
        }
        row.psnr = ps / double(dataset.size());
        row.ssim = ss / double(dataset.size());
        rows.push_back(row);
    }
    return rows;
}

}  // namespace rfr::sampler
