#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfr/metrics.hpp"
#include "rfr/rng.hpp"
#include "rfr/tensor.hpp"

// Procedural paired-data generation: structured random images plus synthetic
// degradations emulating the restoration task families at toy scale.

namespace rfr::synth {

enum class TaskKind { identity, deblur, lowlight, colorcast, sr2x, inpaint, colorize };

inline const char* task_name(TaskKind t) {
    switch (t) {
        case TaskKind::identity: return "identity";
        case TaskKind::deblur: return "deblur";
        case TaskKind::lowlight: return "lowlight";
        case TaskKind::colorcast: return "colorcast";
        case TaskKind::sr2x: return "sr2x";
        case TaskKind::inpaint: return "inpaint";
        case TaskKind::colorize: return "colorize";
    }
    return "?";
}

inline TaskKind task_from_name(const std::string& s) {
    for (TaskKind t : {TaskKind::identity, TaskKind::deblur, TaskKind::lowlight,
                       TaskKind::colorcast, TaskKind::sr2x, TaskKind::inpaint,
                       TaskKind::colorize})
        if (s == task_name(t)) return t;
    throw std::invalid_argument("unknown task: " + s);
}

inline int condition_channels(TaskKind t) {
    switch (t) {
        case TaskKind::colorize: return 1;
        case TaskKind::inpaint: return 4;  // masked image + known mask
        default: return 3;
    }
}

inline constexpr int target_channels(TaskKind) { return 3; }

/// True when condition and target tensors share one shape (bridge-path
/// eligible tasks).
inline bool same_shape_task(TaskKind t) {
    return t == TaskKind::identity || t == TaskKind::deblur || t == TaskKind::lowlight ||
           t == TaskKind::colorcast;
}

inline int upsample_factor(TaskKind t) { return t == TaskKind::sr2x ? 2 : 1; }

struct DegradeSpec {
    double blur_sigma = 1.5;
    double gamma = 2.5;
    double noise_sigma = 0.02;
    // row-major 3x3 color mixing matrix; default is an underwater-like
    // per-channel cast
    std::array<double, 9> cast_matrix = {0.5, 0, 0, 0, 0.8, 0, 0, 0, 1.0};
    double hole_fraction = 0.25;
    uint64_t seed = 0;

    void validate() const {
        if (blur_sigma <= 0) throw std::invalid_argument("DegradeSpec: blur_sigma <= 0");
        if (gamma <= 0) throw std::invalid_argument("DegradeSpec: gamma <= 0");
        if (noise_sigma < 0) throw std::invalid_argument("DegradeSpec: noise_sigma < 0");
        if (!(hole_fraction > 0 && hole_fraction < 1))
            throw std::invalid_argument("DegradeSpec: hole_fraction outside (0,1)");
    }
};

// ---------------------------------------------------------------------------
// Image generator
// ---------------------------------------------------------------------------

namespace detail {

inline double smoothstep(double e0, double e1, double x) {
    double u = std::min(1.0, std::max(0.0, (x - e0) / (e1 - e0)));
    return u * u * (3 - 2 * u);
}

}  // namespace detail

/// Structured random RGB image in [0,1]: a contrasted linear gradient,
/// 3-8 soft-edged ellipses/rectangles and a band-limited sinusoid texture.
inline TensorF gen_image(uint64_t seed, int size) {
    if (size < 16) throw std::invalid_argument("gen_image: size must be >= 16");
    Rng rng(seed);
    TensorF img(3, size, size);

    // gradient background with guaranteed contrast in one channel
    std::array<double, 3> c0, c1;
    for (int c = 0; c < 3; ++c) c0[c] = rng.uniform_in(0.1, 0.9);
    for (int c = 0; c < 3; ++c) c1[c] = rng.uniform_in(0.1, 0.9);
    int jc = rng.uniform_int(0, 2);
    double gap = rng.uniform_in(0.35, 0.6);
    c1[jc] = c0[jc] < 0.5 ? std::min(0.98, c0[jc] + gap) : std::max(0.02, c0[jc] - gap);
    double theta = rng.uniform_in(0, 2 * M_PI);
    double dx = std::cos(theta), dy = std::sin(theta);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            double u = ((x * dx + y * dy) / size + 1.0) * 0.5;
            u = std::min(1.0, std::max(0.0, u));
            for (int c = 0; c < 3; ++c)
                img.at(c, y, x) = float(c0[c] + (c1[c] - c0[c]) * u);
        }

    int n_shapes = rng.uniform_int(3, 8);
    for (int s = 0; s < n_shapes; ++s) {
        bool ellipse = rng.uniform() < 0.5;
        double cx = rng.uniform_in(0.1, 0.9) * size;
        double cy = rng.uniform_in(0.1, 0.9) * size;
        double ax = rng.uniform_in(0.08, 0.35) * size;
        double ay = rng.uniform_in(0.08, 0.35) * size;
        double rot = rng.uniform_in(0, M_PI);
        double cr = std::cos(rot), sr = std::sin(rot);
        std::array<double, 3> col;
        for (int c = 0; c < 3; ++c) col[c] = rng.uniform_in(0.05, 0.95);
        double alpha = rng.uniform_in(0.5, 1.0);
        const double aa = 1.5;  // anti-alias band in pixels
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double px = (x - cx) * cr + (y - cy) * sr;
                double py = -(x - cx) * sr + (y - cy) * cr;
                double cov;
                if (ellipse) {
                    double r = std::sqrt(px * px / (ax * ax) + py * py / (ay * ay));
                    // distance to the unit boundary, rescaled to pixels
                    cov = 1.0 - detail::smoothstep(-aa, aa, (r - 1.0) * std::min(ax, ay));
                } else {
                    double d = std::max(std::abs(px) - ax, std::abs(py) - ay);
                    cov = 1.0 - detail::smoothstep(-aa, aa, d);
                }
                if (cov <= 0) continue;
                double w = alpha * cov;
                for (int c = 0; c < 3; ++c)
                    img.at(c, y, x) = float(img.at(c, y, x) * (1 - w) + col[c] * w);
            }
    }

    // band-limited luminance texture
    for (int k = 0; k < 3; ++k) {
        double amp = rng.uniform_in(0.02, 0.05);
        double fx = rng.uniform_in(1.0, 6.0), fy = rng.uniform_in(1.0, 6.0);
        double ph = rng.uniform_in(0, 2 * M_PI);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double v = amp * std::sin(2 * M_PI * (fx * x + fy * y) / size + ph);
                for (int c = 0; c < 3; ++c) img.at(c, y, x) += float(v);
            }
    }
    clip01(img);
    return img;
}

// ---------------------------------------------------------------------------
// Degradations
// ---------------------------------------------------------------------------

/// Gaussian blur with a normalized truncated kernel (radius ceil(3 sigma))
/// and reflect padding.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& img, double sigma) {
    if (sigma <= 0) throw std::invalid_argument("gaussian_blur: sigma <= 0");
    const int r = int(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + r];
    }
    for (auto& v : k) v /= sum;
    const int H = img.height, W = img.width;
    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
        return i;
    };
    Tensor<T> tmp(img.channels, H, W), out(img.channels, H, W);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0;
                for (int i = -r; i <= r; ++i) s += k[i + r] * img.at(c, y, reflect(x + i, W));
                tmp.at(c, y, x) = static_cast<T>(s);
            }
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                double s = 0;
                for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(c, reflect(y + i, H), x);
                out.at(c, y, x) = static_cast<T>(s);
            }
    }
    return out;
}

/// 2x2 (or r x r) box-filter downsample.
template <typename T>
Tensor<T> box_downsample(const Tensor<T>& img, int r) {
    if (img.height % r || img.width % r)
        throw std::invalid_argument("box_downsample: dimensions not divisible");
    Tensor<T> out(img.channels, img.height / r, img.width / r);
    const double inv = 1.0 / (r * r);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                double s = 0;
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx) s += img.at(c, y * r + dy, x * r + dx);
                out.at(c, y, x) = static_cast<T>(s * inv);
            }
    return out;
}

/// Degrades a clean target into the task condition. Deterministic given
/// spec.seed; noise is added after the deterministic degradation and the
/// result is clipped to [0,1].
inline TensorF degrade(const TensorF& y, TaskKind task, const DegradeSpec& spec) {
    spec.validate();
    if (y.channels != 3) throw std::invalid_argument("degrade: target must be RGB");
    Rng rng(mix_seed(spec.seed, 0xDE5EC));
    auto add_noise_clip = [&](TensorF& t) {
        if (spec.noise_sigma > 0)
            for (auto& v : t.data) v += float(spec.noise_sigma * rng.gaussian());
        clip01(t);
    };
    switch (task) {
        case TaskKind::identity:
            return y;
        case TaskKind::deblur: {
            TensorF x = gaussian_blur(y, spec.blur_sigma);
            add_noise_clip(x);
            return x;
        }
        case TaskKind::lowlight: {
            TensorF x(3, y.height, y.width);
            for (size_t i = 0; i < y.size(); ++i)
                x.data[i] = std::pow(std::max(0.0f, y.data[i]), float(spec.gamma));
            add_noise_clip(x);
            return x;
        }
        case TaskKind::colorcast: {
            TensorF x(3, y.height, y.width);
            for (int i = 0; i < y.plane_size(); ++i) {
                double r = y.data[i], g = y.plane(1)[i], b = y.plane(2)[i];
                const auto& m = spec.cast_matrix;
                x.plane(0)[i] = float(m[0] * r + m[1] * g + m[2] * b);
                x.plane(1)[i] = float(m[3] * r + m[4] * g + m[5] * b);
                x.plane(2)[i] = float(m[6] * r + m[7] * g + m[8] * b);
            }
            add_noise_clip(x);
            return x;
        }
        case TaskKind::sr2x:
            return box_downsample(y, 2);
        case TaskKind::inpaint: {
            const int H = y.height, W = y.width;
            double area = spec.hole_fraction * H * W;
            double aspect = rng.uniform_in(0.5, 2.0);
            int hw = std::min(W - 1, std::max(1, int(std::lround(std::sqrt(area * aspect)))));
            int hh = std::min(H - 1, std::max(1, int(std::lround(area / hw))));
            int ox = rng.uniform_int(0, W - hw);
            int oy = rng.uniform_int(0, H - hh);
            TensorF x(4, H, W);
            for (int c = 0; c < 3; ++c)
                std::copy(y.plane(c), y.plane(c) + y.plane_size(), x.plane(c));
            float* mask = x.plane(3);
            std::fill(mask, mask + x.plane_size(), 1.0f);  // 1 = known
            for (int yy = oy; yy < oy + hh; ++yy)
                for (int xx = ox; xx < ox + hw; ++xx) {
                    mask[yy * W + xx] = 0.0f;
                    for (int c = 0; c < 3; ++c) x.at(c, yy, xx) = 0.0f;
                }
            return x;
        }
        case TaskKind::colorize:
            return rfr::metrics::rgb_to_y(y);
    }
    throw std::invalid_argument("degrade: unknown task");
}

// ---------------------------------------------------------------------------
// Batch assembly: crop, augment, degrade
// ---------------------------------------------------------------------------

struct Pair {
    TensorF condition;
    TensorF target;
};

namespace detail {

template <typename T>
Tensor<T> crop(const Tensor<T>& img, int oy, int ox, int size) {
    Tensor<T> out(img.channels, size, size);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) out.at(c, y, x) = img.at(c, oy + y, ox + x);
    return out;
}

template <typename T>
Tensor<T> flip_h(const Tensor<T>& img) {
    Tensor<T> out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

template <typename T>
Tensor<T> flip_v(const Tensor<T>& img) {
    Tensor<T> out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, img.height - 1 - y, x);
    return out;
}

// 90-degree clockwise rotation (square images).
template <typename T>
Tensor<T> rot90(const Tensor<T>& img) {
    if (img.height != img.width) throw std::invalid_argument("rot90: square images only");
    const int n = img.height;
    Tensor<T> out(img.channels, n, n);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) out.at(c, x, n - 1 - y) = img.at(c, y, x);
    return out;
}

}  // namespace detail

/// Crop (at a given offset), augment, then degrade. sr2x requires even crop
/// offsets so the HR crop stays aligned with the LR grid.
inline Pair make_pair_at(const TensorF& canvas, TaskKind task, const DegradeSpec& spec,
                         int oy, int ox, int crop_size, bool fh, bool fv, int rot_k) {
    if (oy < 0 || ox < 0 || oy + crop_size > canvas.height || ox + crop_size > canvas.width)
        throw std::invalid_argument("make_pair_at: crop outside canvas");
    if (task == TaskKind::sr2x && ((oy | ox | crop_size) & 1))
        throw std::invalid_argument("make_pair_at: sr2x needs even crop offsets and size");
    TensorF y = detail::crop(canvas, oy, ox, crop_size);
    if (fh) y = detail::flip_h(y);
    if (fv) y = detail::flip_v(y);
    for (int k = 0; k < rot_k; ++k) y = detail::rot90(y);
    return Pair{degrade(y, task, spec), std::move(y)};
}

/// One training sample: procedural canvas, random crop/flip/rotation,
/// then degradation. Fully determined by `seed`.
inline Pair make_sample(TaskKind task, const DegradeSpec& base_spec, int canvas_size,
                        int crop_size, bool augment, uint64_t seed) {
    if (crop_size > canvas_size)
        throw std::invalid_argument("make_sample: crop larger than canvas");
    Rng rng(mix_seed(seed, 0xBA7C4));
    TensorF canvas = gen_image(mix_seed(seed, 0x16A6E), canvas_size);
    int max_off = canvas_size - crop_size;
    int oy = 0, ox = 0;
    bool fh = false, fv = false;
    int rot_k = 0;
    if (max_off > 0) {
        oy = rng.uniform_int(0, max_off);
        ox = rng.uniform_int(0, max_off);
        if (task == TaskKind::sr2x) {
            oy &= ~1;
            ox &= ~1;
        }
    }
    if (augment) {
        fh = rng.uniform() < 0.5;
        fv = rng.uniform() < 0.5;
        rot_k = rng.uniform_int(0, 3);
    }
    DegradeSpec spec = base_spec;
    spec.seed = mix_seed(seed, 0xD364ADE);
    return make_pair_at(canvas, task, spec, oy, ox, crop_size, fh, fv, rot_k);
}

inline std::vector<Pair> make_batch(TaskKind task, const DegradeSpec& spec, int batch,
                                    int canvas_size, int crop_size, bool augment, Rng& rng) {
    std::vector<Pair> out;
    out.reserve(batch);
    for (int b = 0; b < batch; ++b)
        out.push_back(make_sample(task, spec, canvas_size, crop_size, augment, rng.next_u64()));
    return out;
}

/// Fixed validation set: full-size procedural images (no crop, no
/// augmentation), deterministically derived from `val_seed`.
inline std::vector<Pair> make_valset(TaskKind task, const DegradeSpec& base_spec, int count,
                                     int size, uint64_t val_seed) {
    if (count <= 0) throw std::invalid_argument("make_valset: empty validation set");
    std::vector<Pair> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        TensorF y = gen_image(mix_seed(val_seed, i, 0x11), size);
        DegradeSpec spec = base_spec;
        spec.seed = mix_seed(val_seed, i, 0x22);
        out.push_back(Pair{degrade(y, task, spec), std::move(y)});
    }
    return out;
}

}  // namespace rfr::synth
