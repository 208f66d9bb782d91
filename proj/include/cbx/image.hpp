#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cbx {

// H x W x C raster with float pixels in [0, 1]. C is 1 (grayscale) or 3 (RGB).
// Storage is row-major by (y, x, c).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, 0.0f) {}

    float& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t size() const { return pixels.size(); }

    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

inline double mean_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("mean_abs_diff: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) acc += std::abs(double(a.pixels[i]) - double(b.pixels[i]));
    return a.pixels.empty() ? 0.0 : acc / double(a.pixels.size());
}

inline double l2_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("l2_diff: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = double(a.pixels[i]) - double(b.pixels[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace cbx
