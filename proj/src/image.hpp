#pragma once

#include <string>
#include <vector>

#include "tensor.hpp"

namespace sfv {

// RGB image with values normalized to [0, 1], stored as a 3 x h x w tensor.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    Tensor pixels;  // 3 x height x width

    static Image from_pixels(Tensor pixels);
};

// Reads a binary (P6) portable pixmap with 8-bit samples. Any other format
// or maxval above 255 is rejected.
Image load_ppm(const std::string& path);

// Bilinear resize with corner-aligned grid mapping; resizing to the source
// size reproduces the input.
Image resize_bilinear(const Image& image, std::size_t target_w, std::size_t target_h);

// load_ppm + resize to a square target.
Image load_image(const std::string& path, std::size_t target_size);

void save_ppm(const Image& image, const std::string& path);

// Writes |values| of an h x w map rescaled so the largest magnitude maps to
// 255 (all zeros if the map is identically zero).
void save_saliency_pgm(const Tensor& values, const std::string& path);

// Blends a warm colormap of |values|/max over the grayscale of the image.
// Pixels with zero saliency stay pure grayscale, the strongest pixel becomes
// fully warm. Output bytes are deterministic for identical inputs.
void render_overlay(const Image& image, const Tensor& values, const std::string& path);

}  // namespace sfv
