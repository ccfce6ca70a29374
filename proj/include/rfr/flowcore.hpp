#pragma once

#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "rfr/tensor.hpp"

// Pure mathematics of the rectified-flow reformulation: interpolation-
// parameter sampling, path construction, the induced velocity field, the
// t-reweighted losses and the explicit Euler update. All functions are
// deterministic in their inputs; randomness enters only through explicitly
// passed draws.

namespace rfr::flow {

enum class TStrategy { beta, uniform, logit_normal };

struct TSamplerConfig {
    TStrategy strategy = TStrategy::beta;
    int p = 1;              // loss exponent; Beta(p+1, 1) sampling
    double t_min = 1e-3;    // clamp against the 1/t singularity
    double logit_mu = 0.0;
    double logit_sigma = 1.0;

    void validate() const {
        if (p < 1) throw std::invalid_argument("TSamplerConfig: p must be >= 1");
        if (!(t_min > 0.0 && t_min < 1.0))
            throw std::invalid_argument("TSamplerConfig: t_min must lie in (0,1)");
        if (logit_sigma <= 0.0)
            throw std::invalid_argument("TSamplerConfig: logit_sigma must be positive");
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Draws the interpolation parameter t from one uniform (beta/uniform
/// strategies) or one standard normal (logit_normal) draw. The clamp is
/// applied after the inverse-CDF transform, so the strategy keeps a point
/// mass at t_min instead of renormalizing.
inline double sample_t(const TSamplerConfig& cfg, double draw) {
    cfg.validate();
    double t = 0.0;
    switch (cfg.strategy) {
        case TStrategy::beta:
            // inverse CDF of Beta(p+1, 1): t = u^{1/(p+1)}
            t = std::pow(draw, 1.0 / double(cfg.p + 1));
            break;
        case TStrategy::uniform:
            t = draw;
            break;
        case TStrategy::logit_normal:
            t = sigmoid(cfg.logit_mu + cfg.logit_sigma * draw);
            break;
    }
    return std::max(t, cfg.t_min);
}

/// One training draw: condition, target, noise, interpolation parameter and
/// the mixed state.
template <typename T>
struct FlowSample {
    Tensor<T> condition_x;
    Tensor<T> target_y;
    Tensor<T> noise_eps;
    double t = 0.0;
    Tensor<T> state_yt;
};

/// y_t = (1-t) * y + t * eps, the straight path from data (t=0) to noise (t=1).
template <typename T>
Tensor<T> make_state(const Tensor<T>& y, const Tensor<T>& eps, double t) {
    require_same_shape(y, eps, "make_state");
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("make_state: t must lie in (0,1]");
    Tensor<T> out(y.channels, y.height, y.width);
    const T a = static_cast<T>(1.0 - t), b = static_cast<T>(t);
    for (size_t i = 0; i < y.size(); ++i) out.data[i] = a * y.data[i] + b * eps.data[i];
    return out;
}

/// Bridge-style path between the clean target and the degraded input.
/// Restricted to tasks whose condition and target shapes agree.
template <typename T>
Tensor<T> make_bridge_state(const Tensor<T>& y, const Tensor<T>& x, double t) {
    require_same_shape(y, x, "make_bridge_state");
    if (!(t > 0.0 && t <= 1.0))
        throw std::invalid_argument("make_bridge_state: t must lie in (0,1]");
    Tensor<T> out(y.channels, y.height, y.width);
    const T a = static_cast<T>(1.0 - t), b = static_cast<T>(t);
    for (size_t i = 0; i < y.size(); ++i) out.data[i] = a * y.data[i] + b * x.data[i];
    return out;
}

/// Assembles a FlowSample on the standard path (state mixes the target with
/// noise) or the bridge path (state interpolates toward the condition; the
/// noise tensor is kept for bookkeeping but unused by the state).
template <typename T>
FlowSample<T> make_flow_sample(Tensor<T> x, Tensor<T> y, Tensor<T> eps, double t,
                               bool bridge = false) {
    FlowSample<T> s;
    s.state_yt = bridge ? make_bridge_state(y, x, t) : make_state(y, eps, t);
    s.condition_x = std::move(x);
    s.target_y = std::move(y);
    s.noise_eps = std::move(eps);
    s.t = t;
    return s;
}

/// v = (y_t - f_out) / t, the velocity field induced by an x0-predictor.
template <typename T>
Tensor<T> induced_velocity(const Tensor<T>& y_t, const Tensor<T>& f_out, double t,
                           double t_min = 1e-3) {
    require_same_shape(y_t, f_out, "induced_velocity");
    if (t < t_min) throw std::invalid_argument("induced_velocity: t below t_min");
    Tensor<T> v(y_t.channels, y_t.height, y_t.width);
    const T inv_t = static_cast<T>(1.0 / t);
    for (size_t i = 0; i < v.size(); ++i) v.data[i] = (y_t.data[i] - f_out.data[i]) * inv_t;
    return v;
}

/// t-reweighted pixel loss, mean over elements of |y - f|^p / t^p.
/// The per-element mean keeps loss magnitudes resolution-independent.
template <typename T>
double rfr_loss(const Tensor<T>& y, const Tensor<T>& f_out, double t, int p = 1) {
    require_same_shape(y, f_out, "rfr_loss");
    if (p != 1 && p != 2) throw std::invalid_argument("rfr_loss: p must be 1 or 2");
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) {
        double e = std::abs(double(y.data[i]) - double(f_out.data[i])) / t;
        acc += (p == 1) ? e : e * e;
    }
    return acc / double(y.size());
}

/// Velocity regression loss, mean |(eps - y) - g_out|. The data endpoint is
/// x0 := y and the noise endpoint x1 := eps, so the target velocity is
/// eps - y.
template <typename T>
double velocity_loss(const Tensor<T>& y, const Tensor<T>& eps, const Tensor<T>& g_out) {
    require_same_shape(y, eps, "velocity_loss");
    require_same_shape(y, g_out, "velocity_loss");
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i)
        acc += std::abs(double(eps.data[i]) - double(y.data[i]) - double(g_out.data[i]));
    return acc / double(y.size());
}

/// One explicit Euler update y_t - dt * (y_t - f_out) / t. When dt == t the
/// step lands exactly at t = 0 and the update collapses to f_out; that case
/// is returned exactly so a final integration step reproduces the network
/// prediction bit for bit.
template <typename T>
Tensor<T> euler_step(const Tensor<T>& y_t, const Tensor<T>& f_out, double t, double dt) {
    require_same_shape(y_t, f_out, "euler_step");
    if (!(dt > 0.0) || dt > t) throw std::invalid_argument("euler_step: need 0 < dt <= t");
    const double a = dt / t;
    if (a == 1.0) return f_out;
    Tensor<T> out(y_t.channels, y_t.height, y_t.width);
    const T af = static_cast<T>(a);
    for (size_t i = 0; i < y_t.size(); ++i)
        out.data[i] = y_t.data[i] - af * (y_t.data[i] - f_out.data[i]);
    return out;
}

/// Sampling density at t multiplied by the t^{-p} loss weight. For the Beta
/// strategy the density (p+1) t^p cancels the reweighting exactly, giving a
/// flat effective weighting of p+1 (ignoring the clamp mass at t_min).
inline double effective_weight(const TSamplerConfig& cfg, double t) {
    if (!(t > 0.0 && t <= 1.0))
        throw std::invalid_argument("effective_weight: t must lie in (0,1]");
    double density = 0.0;
    switch (cfg.strategy) {
        case TStrategy::beta:
            density = double(cfg.p + 1) * std::pow(t, double(cfg.p));
            break;
        case TStrategy::uniform:
            density = 1.0;
            break;
        case TStrategy::logit_normal: {
            // density of sigmoid(mu + sigma * g), g ~ N(0,1)
            double z = (std::log(t / (1.0 - t)) - cfg.logit_mu) / cfg.logit_sigma;
            double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
            density = phi / (cfg.logit_sigma * t * (1.0 - t));
            break;
        }
    }
    return density * std::pow(t, -double(cfg.p));
}

// ---------------------------------------------------------------------------
// Loss + gradient variants used by the trainer. `loss_mask` is an optional
// single-channel (1 = contributes) spatial mask broadcast over channels;
// the divisor counts only contributing elements.
// ---------------------------------------------------------------------------

template <typename T>
inline double sign_of(T v) {
    return v > T(0) ? 1.0 : (v < T(0) ? -1.0 : 0.0);
}

template <typename T>
double masked_count(const Tensor<T>* loss_mask, const Tensor<T>& ref) {
    if (!loss_mask) return double(ref.size());
    double n = 0;
    for (T v : loss_mask->data) n += double(v);
    return n * ref.channels;
}

/// Loss value plus dL/df for the t-reweighted pixel loss.
template <typename T>
double rfr_loss_grad(const Tensor<T>& y, const Tensor<T>& f, double t, int p,
                     const Tensor<std::type_identity_t<T>>* loss_mask, Tensor<T>& grad) {
    require_same_shape(y, f, "rfr_loss_grad");
    if (p != 1 && p != 2) throw std::invalid_argument("rfr_loss_grad: p must be 1 or 2");
    if (loss_mask && (loss_mask->channels != 1 || loss_mask->height != y.height ||
                      loss_mask->width != y.width))
        throw std::invalid_argument("rfr_loss_grad: loss mask must be (1,H,W)");
    grad = Tensor<T>(y.channels, y.height, y.width);
    const double n = masked_count(loss_mask, y);
    if (n <= 0) throw std::invalid_argument("rfr_loss_grad: empty loss mask");
    const int hw = y.plane_size();
    double acc = 0.0;
    for (int c = 0; c < y.channels; ++c) {
        const T* yp = y.plane(c);
        const T* fp = f.plane(c);
        T* gp = grad.plane(c);
        for (int i = 0; i < hw; ++i) {
            if (loss_mask && loss_mask->data[i] == T(0)) continue;
            double r = (double(yp[i]) - double(fp[i])) / t;
            if (p == 1) {
                acc += std::abs(r);
                gp[i] = static_cast<T>(-sign_of(r) / (t * n));
            } else {
                acc += r * r;
                gp[i] = static_cast<T>(-2.0 * r / (t * n));
            }
        }
    }
    return acc / n;
}

/// Loss value plus dL/dg for the velocity regression loss.
template <typename T>
double velocity_loss_grad(const Tensor<T>& y, const Tensor<T>& eps, const Tensor<T>& g,
                          const Tensor<std::type_identity_t<T>>* loss_mask, Tensor<T>& grad) {
    require_same_shape(y, g, "velocity_loss_grad");
    require_same_shape(y, eps, "velocity_loss_grad");
    grad = Tensor<T>(y.channels, y.height, y.width);
    const double n = masked_count(loss_mask, y);
    if (n <= 0) throw std::invalid_argument("velocity_loss_grad: empty loss mask");
    const int hw = y.plane_size();
    double acc = 0.0;
    for (int c = 0; c < y.channels; ++c) {
        const T* yp = y.plane(c);
        const T* ep = eps.plane(c);
        const T* gp_in = g.plane(c);
        T* gp = grad.plane(c);
        for (int i = 0; i < hw; ++i) {
            if (loss_mask && loss_mask->data[i] == T(0)) continue;
            double r = double(ep[i]) - double(yp[i]) - double(gp_in[i]);
            acc += std::abs(r);
            gp[i] = static_cast<T>(-sign_of(r) / n);
        }
    }
    return acc / n;
}

/// Gradient-difference auxiliary term: mean |D f - D y| over horizontal and
/// vertical forward differences. Adds lambda-scaled contributions into
/// `grad`. Not t-reweighted.
template <typename T>
double grad_diff_loss_grad(const Tensor<T>& y, const Tensor<T>& f, double lambda,
                           const Tensor<std::type_identity_t<T>>* loss_mask, Tensor<T>& grad) {
    require_same_shape(y, f, "grad_diff_loss_grad");
    const int H = y.height, W = y.width;
    double n = 0;
    if (!loss_mask) {
        n = double(y.channels) * (double(H) * (W - 1) + double(H - 1) * W);
    } else {
        for (int i = 0; i < H; ++i)
            for (int j = 0; j + 1 < W; ++j)
                if (loss_mask->at(0, i, j) != T(0) && loss_mask->at(0, i, j + 1) != T(0)) n += 1;
        for (int i = 0; i + 1 < H; ++i)
            for (int j = 0; j < W; ++j)
                if (loss_mask->at(0, i, j) != T(0) && loss_mask->at(0, i + 1, j) != T(0)) n += 1;
        n *= y.channels;
    }
    if (n <= 0) return 0.0;
    double acc = 0.0;
    auto edge = [&](int c, int i0, int j0, int i1, int j1) {
        if (loss_mask &&
            (loss_mask->at(0, i0, j0) == T(0) || loss_mask->at(0, i1, j1) == T(0)))
            return;
        double d = (double(f.at(c, i1, j1)) - double(f.at(c, i0, j0))) -
                   (double(y.at(c, i1, j1)) - double(y.at(c, i0, j0)));
        acc += std::abs(d);
        T s = static_cast<T>(lambda * sign_of(d) / n);
        grad.at(c, i1, j1) += s;
        grad.at(c, i0, j0) -= s;
    };
    for (int c = 0; c < y.channels; ++c) {
        for (int i = 0; i < H; ++i)
            for (int j = 0; j + 1 < W; ++j) edge(c, i, j, i, j + 1);
        for (int i = 0; i + 1 < H; ++i)
            for (int j = 0; j < W; ++j) edge(c, i, j, i + 1, j);
    }
    return acc / n;
}

struct CompositeWeights {
    double lambda_grad = 0.1;
};

/// Composite-loss hook: the (already t-reweighted) pixel term plus auxiliary
/// terms that keep their original, unweighted form.
template <typename T>
double composite_loss_hook(double pixel_term, const Tensor<T>& y, const Tensor<T>& f_out,
                           const CompositeWeights& w) {
    if (w.lambda_grad < 0.0)
        throw std::invalid_argument("composite_loss_hook: negative weight");
    Tensor<T> scratch(y.channels, y.height, y.width);
    double g = grad_diff_loss_grad(y, f_out, w.lambda_grad, nullptr, scratch);
    return pixel_term + w.lambda_grad * g;
}

}  // namespace rfr::flow
