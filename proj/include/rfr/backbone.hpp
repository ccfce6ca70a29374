#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rfr/rng.hpp"
#include "rfr/tensor.hpp"

// Small convolutional encoder-decoder regressor with exact analytic
// gradients. Two-level (configurable) U-Net-like layout: 3x3 convolutions,
// ReLU, 2x2 average-pool downsampling, nearest-neighbor upsampling with
// encoder skip concatenation, a linear head, an optional pixel-rearrange
// expansion for the LR-domain super-resolution variant, and an optional
// sinusoidal time-embedding injection at the bottleneck.

namespace rfr::net {

enum class Parameterization { x0_pred, v_pred };

inline const char* parameterization_name(Parameterization p) {
    return p == Parameterization::x0_pred ? "x0_pred" : "v_pred";
}

/// Parameter-free residual connection from the network input to its output.
/// slice: add input channels [0, C_out); broadcast: replicate input channel 0;
/// upsample: nearest-neighbor expand input channels [0, C_out) by the
/// upsample factor.
enum class AnchorMode : uint8_t { none, slice, broadcast, upsample };

struct BackboneConfig {
    int in_channels = 6;
    int out_channels = 3;
    int base_width = 16;
    int depth = 2;
    Parameterization parameterization = Parameterization::x0_pred;
    bool time_embedding = false;
    int time_embed_dim = 16;
    int upsample_factor = 1;
    AnchorMode anchor = AnchorMode::none;

    void validate() const {
        if (in_channels <= 0 || out_channels <= 0 || base_width <= 0)
            throw std::invalid_argument("BackboneConfig: zero-sized dims");
        if (depth < 1) throw std::invalid_argument("BackboneConfig: depth must be >= 1");
        if (upsample_factor < 1)
            throw std::invalid_argument("BackboneConfig: upsample_factor must be >= 1");
        if (time_embedding && (time_embed_dim < 2 || time_embed_dim % 2))
            throw std::invalid_argument("BackboneConfig: time_embed_dim must be even");
        if ((anchor == AnchorMode::slice || anchor == AnchorMode::upsample) &&
            in_channels < out_channels)
            throw std::invalid_argument("BackboneConfig: anchor needs in_channels >= out_channels");
        if (anchor == AnchorMode::upsample && upsample_factor == 1)
            throw std::invalid_argument("BackboneConfig: upsample anchor needs factor > 1");
    }
};

/// Sinusoidal features [sin(t w_k), cos(t w_k)] with geometric frequencies
/// spanning 1..1000.
inline std::vector<double> time_embedding(double t, int dim) {
    if (dim < 2 || dim % 2) throw std::invalid_argument("time_embedding: dim must be even");
    const int half = dim / 2;
    std::vector<double> e(dim);
    for (int k = 0; k < half; ++k) {
        double w = half == 1 ? 1.0 : std::pow(1000.0, double(k) / double(half - 1));
        e[2 * k] = std::sin(t * w);
        e[2 * k + 1] = std::cos(t * w);
    }
    return e;
}

template <typename T>
struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::vector<T> v;

    size_t size() const { return v.size(); }
};

template <typename T>
struct BackboneParams {
    BackboneConfig cfg;
    std::vector<ParamBlock<T>> blocks;

    size_t total_params() const {
        size_t n = 0;
        for (const auto& b : blocks) n += b.size();
        return n;
    }

    const ParamBlock<T>& block(const std::string& name) const {
        for (const auto& b : blocks)
            if (b.name == name) return b;
        throw std::invalid_argument("BackboneParams: no block named " + name);
    }
    ParamBlock<T>& block(const std::string& name) {
        return const_cast<ParamBlock<T>&>(std::as_const(*this).block(name));
    }
};

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapM = Eigen::Map<const RowMat<T>>;

// col layout: (C*9) x (H*W); row q = c*9 + kh*3 + kw holds the input plane
// shifted by (kh-1, kw-1) with zero padding.
template <typename T>
void im2col3x3(const T* src, int C, int H, int W, T* col) {
    for (int c = 0; c < C; ++c) {
        for (int kh = 0; kh < 3; ++kh) {
            for (int kw = 0; kw < 3; ++kw) {
                T* drow0 = col + (static_cast<size_t>(c * 9 + kh * 3 + kw)) * H * W;
                const int x0 = kw == 0 ? 1 : 0;
                const int x1 = kw == 2 ? W - 1 : W;
                for (int y = 0; y < H; ++y) {
                    T* d = drow0 + static_cast<size_t>(y) * W;
                    const int iy = y + kh - 1;
                    if (iy < 0 || iy >= H) {
                        std::fill(d, d + W, T(0));
                        continue;
                    }
                    const T* s = src + (static_cast<size_t>(c) * H + iy) * W + (kw - 1);
                    if (x0) d[0] = T(0);
                    std::copy(s + x0, s + x1, d + x0);
                    if (x1 < W) d[W - 1] = T(0);
                }
            }
        }
    }
}

// scatter-add transpose of im2col3x3
template <typename T>
void col2im3x3_add(const T* col, int C, int H, int W, T* dst) {
    for (int c = 0; c < C; ++c) {
        for (int kh = 0; kh < 3; ++kh) {
            for (int kw = 0; kw < 3; ++kw) {
                const T* srow0 = col + (static_cast<size_t>(c * 9 + kh * 3 + kw)) * H * W;
                const int x0 = kw == 0 ? 1 : 0;
                const int x1 = kw == 2 ? W - 1 : W;
                for (int y = 0; y < H; ++y) {
                    const int iy = y + kh - 1;
                    if (iy < 0 || iy >= H) continue;
                    const T* s = srow0 + static_cast<size_t>(y) * W;
                    T* d = dst + (static_cast<size_t>(c) * H + iy) * W + (kw - 1);
                    for (int x = x0; x < x1; ++x) d[x] += s[x];
                }
            }
        }
    }
}

template <typename T>
void conv3x3_forward(const T* in, int Cin, int H, int W, const T* weight, const T* bias,
                     int M, T* col, T* out) {
    im2col3x3(in, Cin, H, W, col);
    const int N = H * W, K = Cin * 9;
    CMapM<T> Wm(weight, M, K);
    CMapM<T> Cm(col, K, N);
    MapM<T> Om(out, M, N);
    Om.noalias() = Wm * Cm;
    for (int m = 0; m < M; ++m) Om.row(m).array() += bias[m];
}

// Accumulates weight/bias gradients; optionally scatter-adds the input
// gradient through `gcol_scratch` into grad_in (which the caller zeroes).
template <typename T>
void conv3x3_backward(const T* col, const T* weight, int Cin, int H, int W, int M,
                      const T* grad_out, T* grad_w, T* grad_b, T* gcol_scratch, T* grad_in) {
    const int N = H * W, K = Cin * 9;
    CMapM<T> Cm(col, K, N);
    CMapM<T> Gm(grad_out, M, N);
    MapM<T> gWm(grad_w, M, K);
    gWm.noalias() += Gm * Cm.transpose();
    // serial accumulation: keeps the reduction order independent of buffer
    // addresses, so reruns are bitwise reproducible
    for (int m = 0; m < M; ++m) {
        const T* row = grad_out + static_cast<size_t>(m) * N;
        T acc = T(0);
        for (int i = 0; i < N; ++i) acc += row[i];
        grad_b[m] += acc;
    }
    if (grad_in) {
        CMapM<T> Wm(weight, M, K);
        MapM<T> gCm(gcol_scratch, K, N);
        gCm.noalias() = Wm.transpose() * Gm;
        col2im3x3_add(gcol_scratch, Cin, H, W, grad_in);
    }
}

// Clamps in place and tracks the smallest pre-activation magnitude seen,
// which gradient checks use to reject instances sitting on a ReLU kink.
template <typename T>
void relu_inplace(Tensor<T>& t, T& min_abs_preact) {
    for (auto& v : t.data) {
        T a = v < T(0) ? -v : v;
        if (a < min_abs_preact) min_abs_preact = a;
        v = v > T(0) ? v : T(0);
    }
}

// d/dx masked by the stored post-activation
template <typename T>
void relu_backward_inplace(Tensor<T>& grad, const Tensor<T>& post) {
    for (size_t i = 0; i < grad.size(); ++i)
        if (post.data[i] <= T(0)) grad.data[i] = T(0);
}

template <typename T>
void avgpool2(const Tensor<T>& in, Tensor<T>& out) {
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = static_cast<T>(
                    0.25 * (double(in.at(c, 2 * y, 2 * x)) + in.at(c, 2 * y, 2 * x + 1) +
                            in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1)));
}

template <typename T>
void avgpool2_backward_add(const Tensor<T>& gout, Tensor<T>& gin) {
    for (int c = 0; c < gout.channels; ++c)
        for (int y = 0; y < gout.height; ++y)
            for (int x = 0; x < gout.width; ++x) {
                T g = gout.at(c, y, x) * T(0.25);
                gin.at(c, 2 * y, 2 * x) += g;
                gin.at(c, 2 * y, 2 * x + 1) += g;
                gin.at(c, 2 * y + 1, 2 * x) += g;
                gin.at(c, 2 * y + 1, 2 * x + 1) += g;
            }
}

template <typename T>
void upsample2(const Tensor<T>& in, Tensor<T>& out) {
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < out.height; ++y) {
            const T* srow = in.plane(c) + static_cast<size_t>(y / 2) * in.width;
            T* drow = out.plane(c) + static_cast<size_t>(y) * out.width;
            for (int x = 0; x < out.width; ++x) drow[x] = srow[x / 2];
        }
}

template <typename T>
void upsample2_backward(const Tensor<T>& gout, Tensor<T>& gin) {
    gin.fill(T(0));
    for (int c = 0; c < gout.channels; ++c)
        for (int y = 0; y < gout.height; ++y)
            for (int x = 0; x < gout.width; ++x) gin.at(c, y / 2, x / 2) += gout.at(c, y, x);
}

// (C*r^2, H, W) -> (C, rH, rW); channel c*r^2 + dy*r + dx lands at (r y + dy, r x + dx)
template <typename T>
void pixel_shuffle(const Tensor<T>& in, int r, Tensor<T>& out) {
    const int C = out.channels;
    for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                const T* sp = in.plane(c * r * r + dy * r + dx);
                for (int y = 0; y < in.height; ++y)
                    for (int x = 0; x < in.width; ++x)
                        out.at(c, y * r + dy, x * r + dx) = sp[y * in.width + x];
            }
}

template <typename T>
void pixel_shuffle_backward(const Tensor<T>& gout, int r, Tensor<T>& gin) {
    const int C = gout.channels;
    for (int c = 0; c < C; ++c)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                T* dp = gin.plane(c * r * r + dy * r + dx);
                for (int y = 0; y < gin.height; ++y)
                    for (int x = 0; x < gin.width; ++x)
                        dp[y * gin.width + x] = gout.at(c, y * r + dy, x * r + dx);
            }
}

}  // namespace detail

/// Kaiming fan-in scaled normal initialization, reproducible from the seed.
/// Blocks draw from independent streams, so configs sharing a block shape
/// share its initial values.
template <typename T>
BackboneParams<T> init_backbone(const BackboneConfig& cfg, uint64_t seed) {
    cfg.validate();
    BackboneParams<T> p;
    p.cfg = cfg;
    const int W0 = cfg.base_width;
    int bi = 0;
    auto add_conv = [&](const std::string& name, int cout, int cin) {
        Rng rng(mix_seed(seed, 0xB10C, bi++));
        T std_w = static_cast<T>(std::sqrt(2.0 / (cin * 9)));
        ParamBlock<T> w{name + ".weight", {cout, cin, 3, 3},
                        std::vector<T>(static_cast<size_t>(cout) * cin * 9)};
        for (auto& v : w.v) v = static_cast<T>(rng.gaussian()) * std_w;
        p.blocks.push_back(std::move(w));
        p.blocks.push_back({name + ".bias", {cout}, std::vector<T>(cout, T(0))});
    };
    add_conv("stem", W0, cfg.in_channels);
    for (int l = 1; l <= cfg.depth; ++l) add_conv("enc" + std::to_string(l), W0, W0);
    add_conv("bott", W0, W0);
    if (cfg.time_embedding) {
        Rng rng(mix_seed(seed, 0xB10C, bi++));
        T std_w = static_cast<T>(std::sqrt(2.0 / cfg.time_embed_dim));
        ParamBlock<T> w{"temb.weight", {W0, cfg.time_embed_dim},
                        std::vector<T>(static_cast<size_t>(W0) * cfg.time_embed_dim)};
        for (auto& v : w.v) v = static_cast<T>(rng.gaussian()) * std_w;
        p.blocks.push_back(std::move(w));
    }
    for (int l = cfg.depth - 1; l >= 0; --l) add_conv("dec" + std::to_string(l), W0, 2 * W0);
    add_conv("head", cfg.out_channels * cfg.upsample_factor * cfg.upsample_factor, W0);
    // the head starts at zero so the initial prediction is the anchor
    auto& hw = p.block("head.weight");
    std::fill(hw.v.begin(), hw.v.end(), T(0));
    return p;
}

template <typename T>
struct Workspace {
    int H = 0, W = 0;
    BackboneConfig cfg;
    Tensor<T> input;
    std::vector<Tensor<T>> e;     // post-ReLU encoder features, scale 0..depth
    std::vector<Tensor<T>> pool;  // pooled inputs, scale 1..depth (index l)
    Tensor<T> bott;
    std::vector<Tensor<T>> up, cat, dec;  // per decoder scale 0..depth-1
    Tensor<T> head_out;
    std::vector<double> emb;
    std::vector<T> col_stem, col_bott, col_head;
    std::vector<std::vector<T>> col_enc, col_dec;
    std::vector<T> gcol;  // backward scratch, sized to the largest col buffer
    T min_preact = T(0);  // smallest |pre-activation| of the last forward

    bool matches(const BackboneConfig& c, int h, int w) const {
        return H == h && W == w && cfg.in_channels == c.in_channels &&
               cfg.out_channels == c.out_channels && cfg.base_width == c.base_width &&
               cfg.depth == c.depth && cfg.upsample_factor == c.upsample_factor &&
               cfg.time_embedding == c.time_embedding;
    }

    void prepare(const BackboneConfig& c, int h, int w) {
        if (matches(c, h, w)) return;
        cfg = c;
        H = h;
        W = w;
        const int W0 = c.base_width, d = c.depth;
        e.assign(d + 1, {});
        pool.assign(d + 1, {});
        up.assign(d, {});
        cat.assign(d, {});
        dec.assign(d, {});
        col_enc.assign(d + 1, {});
        col_dec.assign(d, {});
        size_t max_col = 0;
        auto col_size = [&](int cin, int hh, int ww) {
            size_t s = static_cast<size_t>(cin) * 9 * hh * ww;
            max_col = std::max(max_col, s);
            return s;
        };
        e[0] = Tensor<T>(W0, h, w);
        col_stem.assign(col_size(c.in_channels, h, w), T(0));
        for (int l = 1; l <= d; ++l) {
            int hl = h >> l, wl = w >> l;
            pool[l] = Tensor<T>(W0, hl, wl);
            e[l] = Tensor<T>(W0, hl, wl);
            col_enc[l].assign(col_size(W0, hl, wl), T(0));
        }
        bott = Tensor<T>(W0, h >> d, w >> d);
        col_bott.assign(col_size(W0, h >> d, w >> d), T(0));
        for (int l = 0; l < d; ++l) {
            int hl = h >> l, wl = w >> l;
            up[l] = Tensor<T>(W0, hl, wl);
            cat[l] = Tensor<T>(2 * W0, hl, wl);
            dec[l] = Tensor<T>(W0, hl, wl);
            col_dec[l].assign(col_size(2 * W0, hl, wl), T(0));
        }
        head_out = Tensor<T>(c.out_channels * c.upsample_factor * c.upsample_factor, h, w);
        col_head.assign(col_size(W0, h, w), T(0));
        gcol.assign(max_col, T(0));
    }
};

namespace detail {

template <typename T>
void add_anchor(const BackboneConfig& cfg, const Tensor<T>& input, Tensor<T>& out) {
    const int r = cfg.upsample_factor;
    switch (cfg.anchor) {
        case AnchorMode::none:
            return;
        case AnchorMode::slice:
            for (int c = 0; c < out.channels; ++c) {
                const T* s = input.plane(c);
                T* d = out.plane(c);
                for (int i = 0; i < out.plane_size(); ++i) d[i] += s[i];
            }
            return;
        case AnchorMode::broadcast:
            for (int c = 0; c < out.channels; ++c) {
                const T* s = input.plane(0);
                T* d = out.plane(c);
                for (int i = 0; i < out.plane_size(); ++i) d[i] += s[i];
            }
            return;
        case AnchorMode::upsample:
            for (int c = 0; c < out.channels; ++c)
                for (int y = 0; y < out.height; ++y)
                    for (int x = 0; x < out.width; ++x)
                        out.at(c, y, x) += input.at(c, y / r, x / r);
            return;
    }
}

template <typename T>
void anchor_backward_add(const BackboneConfig& cfg, const Tensor<T>& gout, Tensor<T>& gin) {
    const int r = cfg.upsample_factor;
    switch (cfg.anchor) {
        case AnchorMode::none:
            return;
        case AnchorMode::slice:
            for (int c = 0; c < gout.channels; ++c) {
                const T* s = gout.plane(c);
                T* d = gin.plane(c);
                for (int i = 0; i < gout.plane_size(); ++i) d[i] += s[i];
            }
            return;
        case AnchorMode::broadcast: {
            T* d = gin.plane(0);
            for (int c = 0; c < gout.channels; ++c) {
                const T* s = gout.plane(c);
                for (int i = 0; i < gout.plane_size(); ++i) d[i] += s[i];
            }
            return;
        }
        case AnchorMode::upsample:
            for (int c = 0; c < gout.channels; ++c)
                for (int y = 0; y < gout.height; ++y)
                    for (int x = 0; x < gout.width; ++x)
                        gin.at(c, y / r, x / r) += gout.at(c, y, x);
            return;
    }
}

}  // namespace detail

/// Deterministic forward pass. `t` must be supplied exactly when the config
/// enables time embedding. Output shape is
/// (out_channels, H * upsample_factor, W * upsample_factor).
template <typename T>
Tensor<T> forward(const BackboneParams<T>& p, const Tensor<T>& input, std::optional<double> t,
                  Workspace<T>& ws) {
    const BackboneConfig& cfg = p.cfg;
    if (input.channels != cfg.in_channels)
        throw std::invalid_argument("forward: input has " + std::to_string(input.channels) +
                                    " channels, config expects " +
                                    std::to_string(cfg.in_channels));
    if (cfg.time_embedding != t.has_value())
        throw std::invalid_argument(cfg.time_embedding
                                        ? "forward: time embedding enabled but t missing"
                                        : "forward: t supplied but time embedding disabled");
    const int H = input.height, W = input.width, d = cfg.depth, W0 = cfg.base_width;
    if ((H % (1 << d)) || (W % (1 << d)))
        throw std::invalid_argument("forward: spatial dims must be divisible by 2^depth");
    ws.prepare(cfg, H, W);
    ws.input = input;
    ws.min_preact = std::numeric_limits<T>::max();

    auto conv = [&](const Tensor<T>& in, const char* name, std::vector<T>& col, Tensor<T>& out) {
        const auto& w = p.block(std::string(name) + ".weight");
        const auto& b = p.block(std::string(name) + ".bias");
        detail::conv3x3_forward(in.data.data(), in.channels, in.height, in.width, w.v.data(),
                                b.v.data(), out.channels, col.data(), out.data.data());
    };

    conv(input, "stem", ws.col_stem, ws.e[0]);
    detail::relu_inplace(ws.e[0], ws.min_preact);
    for (int l = 1; l <= d; ++l) {
        detail::avgpool2(ws.e[l - 1], ws.pool[l]);
        conv(ws.pool[l], ("enc" + std::to_string(l)).c_str(), ws.col_enc[l], ws.e[l]);
        detail::relu_inplace(ws.e[l], ws.min_preact);
    }
    conv(ws.e[d], "bott", ws.col_bott, ws.bott);
    if (cfg.time_embedding) {
        ws.emb = time_embedding(*t, cfg.time_embed_dim);
        const auto& proj = p.block("temb.weight");
        for (int c = 0; c < W0; ++c) {
            double s = 0;
            for (int k = 0; k < cfg.time_embed_dim; ++k)
                s += double(proj.v[static_cast<size_t>(c) * cfg.time_embed_dim + k]) * ws.emb[k];
            T* pl = ws.bott.plane(c);
            for (int i = 0; i < ws.bott.plane_size(); ++i) pl[i] += static_cast<T>(s);
        }
    }
    detail::relu_inplace(ws.bott, ws.min_preact);

    const Tensor<T>* prev = &ws.bott;
    for (int l = d - 1; l >= 0; --l) {
        detail::upsample2(*prev, ws.up[l]);
        // concat(upsampled, skip)
        std::copy(ws.up[l].data.begin(), ws.up[l].data.end(), ws.cat[l].data.begin());
        std::copy(ws.e[l].data.begin(), ws.e[l].data.end(),
                  ws.cat[l].data.begin() + ws.up[l].size());
        conv(ws.cat[l], ("dec" + std::to_string(l)).c_str(), ws.col_dec[l], ws.dec[l]);
        detail::relu_inplace(ws.dec[l], ws.min_preact);
        prev = &ws.dec[l];
    }
    conv(ws.dec[0], "head", ws.col_head, ws.head_out);

    const int r = cfg.upsample_factor;
    Tensor<T> out(cfg.out_channels, H * r, W * r);
    if (r == 1)
        out.data = ws.head_out.data;
    else
        detail::pixel_shuffle(ws.head_out, r, out);
    detail::add_anchor(cfg, input, out);
    return out;
}

template <typename T>
Tensor<T> forward(const BackboneParams<T>& p, const Tensor<T>& input,
                  std::optional<double> t = std::nullopt) {
    Workspace<T> ws;
    return forward(p, input, t, ws);
}

template <typename T>
struct Gradients {
    std::vector<std::vector<T>> blocks;
    Tensor<T> input_grad;

    void init_like(const BackboneParams<T>& p) {
        blocks.clear();
        for (const auto& b : p.blocks) blocks.emplace_back(b.size(), T(0));
    }
    void zero() {
        for (auto& b : blocks) std::fill(b.begin(), b.end(), T(0));
    }
    bool finite() const {
        for (const auto& b : blocks)
            for (T v : b)
                if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Exact reverse-mode gradients for every parameter (accumulated into
/// `grads`, which must be init_like'd) and, optionally, for the input.
/// Requires the workspace of the matching forward call.
template <typename T>
void backward(const BackboneParams<T>& p, Workspace<T>& ws, const Tensor<T>& grad_out,
              Gradients<T>& grads, bool want_input_grad = false) {
    const BackboneConfig& cfg = p.cfg;
    const int H = ws.H, W = ws.W, d = cfg.depth, W0 = cfg.base_width;
    const int r = cfg.upsample_factor;
    if (grad_out.channels != cfg.out_channels || grad_out.height != H * r ||
        grad_out.width != W * r)
        throw std::invalid_argument("backward: grad_out shape mismatch");
    if (grads.blocks.size() != p.blocks.size())
        throw std::invalid_argument("backward: gradients not initialized for these params");

    auto block_index = [&](const std::string& name) {
        for (size_t i = 0; i < p.blocks.size(); ++i)
            if (p.blocks[i].name == name) return int(i);
        throw std::invalid_argument("backward: no block " + name);
    };

    if (want_input_grad) {
        grads.input_grad = Tensor<T>(cfg.in_channels, H, W);
        detail::anchor_backward_add(cfg, grad_out, grads.input_grad);
    }

    auto conv_bwd = [&](const char* name, const std::vector<T>& col, const Tensor<T>& in_like,
                        const Tensor<T>& gout, Tensor<T>* gin) {
        int wi = block_index(std::string(name) + ".weight");
        int bi2 = block_index(std::string(name) + ".bias");
        detail::conv3x3_backward(col.data(), p.blocks[wi].v.data(), in_like.channels,
                                 in_like.height, in_like.width, gout.channels,
                                 gout.data.data(), grads.blocks[wi].data(),
                                 grads.blocks[bi2].data(), ws.gcol.data(),
                                 gin ? gin->data.data() : nullptr);
    };

    // head
    Tensor<T> g_head(ws.head_out.channels, H, W);
    if (r == 1)
        g_head.data = grad_out.data;
    else
        detail::pixel_shuffle_backward(grad_out, r, g_head);
    Tensor<T> g_dec0(W0, H, W);
    conv_bwd("head", ws.col_head, ws.dec[0], g_head, &g_dec0);

    // decoder chain, scale 0 upward
    std::vector<Tensor<T>> g_e(d + 1);
    for (int l = 0; l <= d; ++l) g_e[l] = Tensor<T>(W0, H >> l, W >> l);
    Tensor<T> g_bott_post;
    Tensor<T> g_cur = std::move(g_dec0);
    for (int l = 0; l < d; ++l) {
        detail::relu_backward_inplace(g_cur, ws.dec[l]);
        Tensor<T> g_cat(2 * W0, H >> l, W >> l);
        conv_bwd(("dec" + std::to_string(l)).c_str(), ws.col_dec[l], ws.cat[l], g_cur, &g_cat);
        // split: channels [0,W0) came from the upsample, [W0,2W0) from the skip
        Tensor<T> g_up(W0, H >> l, W >> l);
        std::copy(g_cat.data.begin(), g_cat.data.begin() + g_up.size(), g_up.data.begin());
        for (size_t i = 0; i < g_e[l].size(); ++i)
            g_e[l].data[i] += g_cat.data[g_up.size() + i];
        Tensor<T> g_prev(W0, H >> (l + 1), W >> (l + 1));
        detail::upsample2_backward(g_up, g_prev);
        if (l + 1 < d)
            g_cur = std::move(g_prev);
        else
            g_bott_post = std::move(g_prev);
    }
    // bottleneck
    detail::relu_backward_inplace(g_bott_post, ws.bott);
    if (cfg.time_embedding) {
        int ti = block_index("temb.weight");
        for (int c = 0; c < W0; ++c) {
            double s = 0;
            const T* pl = g_bott_post.plane(c);
            for (int i = 0; i < g_bott_post.plane_size(); ++i) s += double(pl[i]);
            for (int k = 0; k < cfg.time_embed_dim; ++k)
                grads.blocks[ti][static_cast<size_t>(c) * cfg.time_embed_dim + k] +=
                    static_cast<T>(s * ws.emb[k]);
        }
    }
    conv_bwd("bott", ws.col_bott, ws.e[d], g_bott_post, &g_e[d]);

    // encoder chain, deepest first
    for (int l = d; l >= 1; --l) {
        detail::relu_backward_inplace(g_e[l], ws.e[l]);
        Tensor<T> g_pool(W0, H >> l, W >> l);
        conv_bwd(("enc" + std::to_string(l)).c_str(), ws.col_enc[l], ws.pool[l], g_e[l],
                 &g_pool);
        detail::avgpool2_backward_add(g_pool, g_e[l - 1]);
    }
    detail::relu_backward_inplace(g_e[0], ws.e[0]);
    conv_bwd("stem", ws.col_stem, ws.input, g_e[0],
             want_input_grad ? &grads.input_grad : nullptr);
}

}  // namespace rfr::net
