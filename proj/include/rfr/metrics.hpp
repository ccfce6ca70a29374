#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "rfr/tensor.hpp"

// Full-reference image quality metrics: MSE, PSNR (RGB and BT.601 luma),
// SSIM with the standard 11x11 Gaussian window.

namespace rfr::metrics {

template <typename T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mse");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = double(a.data[i]) - double(b.data[i]);
        acc += d * d;
    }
    return acc / double(a.size());
}

/// PSNR in dB on the [0,1] range; returns `cap` when MSE < 1e-12.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double cap = 99.0) {
    double m = mse(a, b);
    if (m < 1e-12) return cap;
    return 10.0 * std::log10(1.0 / m);
}

/// BT.601 full-range luma of an RGB image.
template <typename T>
Tensor<T> rgb_to_y(const Tensor<T>& img) {
    if (img.channels != 3) throw std::invalid_argument("rgb_to_y: expects 3 channels");
    Tensor<T> out(1, img.height, img.width);
    const T* r = img.plane(0);
    const T* g = img.plane(1);
    const T* b = img.plane(2);
    for (int i = 0; i < img.plane_size(); ++i)
        out.data[i] = static_cast<T>(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
    return out;
}

template <typename T>
double psnr_y(const Tensor<T>& a, const Tensor<T>& b, double cap = 99.0) {
    return psnr(rgb_to_y(a), rgb_to_y(b), cap);
}

/// Snaps values onto the 8-bit lattice with the same clamp and
/// round-half-up rule the PNG writer uses.
template <typename T>
Tensor<T> quantize8(const Tensor<T>& img) {
    Tensor<T> out(img.channels, img.height, img.width);
    for (size_t i = 0; i < img.size(); ++i) {
        float v = std::min(1.0f, std::max(0.0f, float(img.data[i])));
        out.data[i] = static_cast<T>(float(std::floor(v * 255.0f + 0.5f)) / 255.0f);
    }
    return out;
}

/// PSNR after 8-bit quantization of both images: bit-exact comparable with
/// tools that read the written PNGs.
template <typename T>
double psnr_quantized(const Tensor<T>& a, const Tensor<T>& b, double cap = 99.0) {
    return psnr(quantize8(a), quantize8(b), cap);
}

namespace detail {

inline const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        std::vector<double> k(11);
        const double sigma = 1.5;
        double sum = 0;
        for (int i = 0; i < 11; ++i) {
            double d = i - 5;
            k[i] = std::exp(-d * d / (2 * sigma * sigma));
            sum += k[i];
        }
        for (auto& v : k) v /= sum;
        return k;
    }();
    return w;
}

// Separable valid-mode Gaussian filter: (H,W) -> (H-10, W-10).
template <typename T>
std::vector<double> gauss_valid(const T* src, int H, int W) {
    const auto& k = ssim_window();
    const int Wv = W - 10;
    std::vector<double> tmp(static_cast<size_t>(H) * Wv);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < Wv; ++x) {
            double s = 0;
            for (int i = 0; i < 11; ++i) s += k[i] * double(src[y * W + x + i]);
            tmp[y * Wv + x] = s;
        }
    const int Hv = H - 10;
    std::vector<double> out(static_cast<size_t>(Hv) * Wv);
    for (int y = 0; y < Hv; ++y)
        for (int x = 0; x < Wv; ++x) {
            double s = 0;
            for (int i = 0; i < 11; ++i) s += k[i] * tmp[(y + i) * Wv + x];
            out[y * Wv + x] = s;
        }
    return out;
}

}  // namespace detail

/// Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5,
/// C1=0.01^2, C2=0.03^2 on unit dynamic range); channels averaged.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "ssim");
    if (a.height < 11 || a.width < 11)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    const int H = a.height, W = a.width, hw = a.plane_size();
    double total = 0.0;
    std::vector<T> prod(hw), sqa(hw), sqb(hw);
    for (int c = 0; c < a.channels; ++c) {
        const T* pa = a.plane(c);
        const T* pb = b.plane(c);
        for (int i = 0; i < hw; ++i) {
            prod[i] = pa[i] * pb[i];
            sqa[i] = pa[i] * pa[i];
            sqb[i] = pb[i] * pb[i];
        }
        auto mu_a = detail::gauss_valid(pa, H, W);
        auto mu_b = detail::gauss_valid(pb, H, W);
        auto m_aa = detail::gauss_valid(sqa.data(), H, W);
        auto m_bb = detail::gauss_valid(sqb.data(), H, W);
        auto m_ab = detail::gauss_valid(prod.data(), H, W);
        double acc = 0.0;
        for (size_t i = 0; i < mu_a.size(); ++i) {
            double ma = mu_a[i], mb = mu_b[i];
            double va = m_aa[i] - ma * ma;
            double vb = m_bb[i] - mb * mb;
            double cov = m_ab[i] - ma * mb;
            acc += ((2 * ma * mb + C1) * (2 * cov + C2)) /
                   ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
        total += acc / double(mu_a.size());
    }
    return total / a.channels;
}

struct MetricsReport {
    double psnr_rgb = 0.0;
    std::optional<double> psnr_y;
    double ssim = 0.0;
    double mse = 0.0;
};

template <typename T>
MetricsReport evaluate(const Tensor<T>& pred, const Tensor<T>& ref, double cap = 99.0,
                       bool quantized = false) {
    if (quantized) return evaluate(quantize8(pred), quantize8(ref), cap, false);
    MetricsReport r;
    r.mse = mse(pred, ref);
    r.psnr_rgb = r.mse < 1e-12 ? cap : 10.0 * std::log10(1.0 / r.mse);
    r.ssim = ssim(pred, ref);
    if (pred.channels == 3) r.psnr_y = psnr_y(pred, ref, cap);
    return r;
}

}  // namespace rfr::metrics
