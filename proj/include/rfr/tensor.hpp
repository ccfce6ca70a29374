#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfr {

// Raised when training or inference produces non-finite values. Mapped to
// exit code 2 by the CLI.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised on file-system / serialization failures. Mapped to exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense (channels, height, width) image tensor, row-major with the channel
/// as the slowest axis. Task images live in [0,1]; intermediate ODE states
/// and Gaussian noise are unconstrained.
template <typename T>
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Tensor() = default;

    Tensor(int c, int h, int w) : channels(c), height(h), width(w) {
        if (c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("Tensor: dimensions must be positive");
        data.assign(static_cast<size_t>(c) * h * w, T(0));
    }

    size_t size() const { return data.size(); }
    int plane_size() const { return height * width; }

    T* plane(int c) { return data.data() + static_cast<size_t>(c) * plane_size(); }
    const T* plane(int c) const { return data.data() + static_cast<size_t>(c) * plane_size(); }

    T& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    T at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    std::string shape_str() const {
        return "(" + std::to_string(channels) + "," + std::to_string(height) + "," +
               std::to_string(width) + ")";
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(channels, height, width);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

template <typename T>
void clip01(Tensor<T>& t) {
    for (auto& v : t.data) v = std::min(T(1), std::max(T(0), v));
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "max_abs_diff");
    T m = 0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

template <typename T>
double mean_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "mean_abs_diff");
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(double(a.data[i]) - double(b.data[i]));
    return s / double(a.size());
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace rfr
