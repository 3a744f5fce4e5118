#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "osb/tensor.hpp"

namespace osb {

// 8-bit interleaved RGB raster, row-major.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int h, int w)
        : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}

    std::uint8_t& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    bool empty() const { return height == 0 || width == 0; }
};

// Binary PPM (P6, maxval 255). Header comments are accepted on read.
RgbImage read_ppm(const std::string& path);
void write_ppm(const std::string& path, const RgbImage& image);

// HxWx3 float tensor with values in [0,255].
Tensor image_to_tensor(const RgbImage& image);

// Pixel crop; the rectangle must lie inside the image.
RgbImage crop_image(const RgbImage& image, int x0, int y0, int w, int h);

}  // namespace osb
