#pragma once

#include <vector>

#include "rrgs/common.hpp"

namespace rrgs {

/// Row-major H x W RGB buffer, double per channel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;  // size = width * height * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(size_t(w) * h * 3, 0.0) {}

    double& at(int row, int col, int ch) { return data[(size_t(row) * width + col) * 3 + ch]; }
    double at(int row, int col, int ch) const { return data[(size_t(row) * width + col) * 3 + ch]; }

    Vec3 pixel(int row, int col) const {
        const size_t base = (size_t(row) * width + col) * 3;
        return {data[base], data[base + 1], data[base + 2]};
    }

    void set_pixel(int row, int col, const Vec3& rgb) {
        const size_t base = (size_t(row) * width + col) * 3;
        data[base] = rgb[0];
        data[base + 1] = rgb[1];
        data[base + 2] = rgb[2];
    }

    bool same_size(const Image& other) const {
        return width == other.width && height == other.height;
    }
};

/// Peak signal-to-noise ratio in dB for [0,1] images (peak = 1), capped at
/// 300 dB so identical images stay finite. Throws on size mismatch.
double psnr(const Image& a, const Image& b);

}  // namespace rrgs
