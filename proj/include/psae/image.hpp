#pragma once

#include <filesystem>
#include <vector>

#include "psae/common.hpp"

namespace psae {

// Grayscale image, row-major float pixels in [0,1].
struct Image {
    int h = 0, w = 0;
    std::vector<float> px;

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, 0.0f) {}

    float& at(int y, int x) { return px[static_cast<size_t>(y) * w + x]; }
    float at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }
};

// Binary 8-bit portable graymap (P5, maxval 255). Writing quantizes with
// round(clamp(v)*255); reading scales back by 1/maxval.
void write_pgm(const std::filesystem::path& path, const Image& img);
Image read_pgm(const std::filesystem::path& path);

Image resize_bilinear(const Image& src, int oh, int ow);

}  // namespace psae
