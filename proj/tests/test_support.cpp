#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <variant>
#include <stdexcept>
#include <unistd.h>

#include "image.hpp"

namespace sfv::test {

Tensor conv2d_oracle(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                     std::size_t stride, std::size_t padding) {
    const std::size_t c_in = input.shape[0];
    const std::size_t h = input.shape[1];
    const std::size_t w = input.shape[2];
    const std::size_t c_out = kernel.shape[0];
    const std::size_t k = kernel.shape[2];
    const std::size_t h_out = (h + 2 * padding - k) / stride + 1;
    const std::size_t w_out = (w + 2 * padding - k) / stride + 1;

    Tensor out({c_out, h_out, w_out});
    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t oy = 0; oy < h_out; ++oy) {
            for (std::size_t ox = 0; ox < w_out; ++ox) {
                double acc = bias.data[co];
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) -
                                            static_cast<long>(padding);
                            const long ix = static_cast<long>(ox * stride + kx) -
                                            static_cast<long>(padding);
                            if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                                ix >= static_cast<long>(w)) {
                                continue;
                            }
                            acc += input.at3(ci, static_cast<std::size_t>(iy),
                                             static_cast<std::size_t>(ix)) *
                                   kernel.data[((co * c_in + ci) * k + ky) * k + kx];
                        }
                    }
                }
                out.at3(co, oy, ox) = acc;
            }
        }
    }
    return out;
}

Tensor maxpool2d_oracle(const Tensor& input, std::size_t window, std::size_t stride) {
    const std::size_t c = input.shape[0];
    const std::size_t h = input.shape[1];
    const std::size_t w = input.shape[2];
    const std::size_t h_out = (h - window) / stride + 1;
    const std::size_t w_out = (w - window) / stride + 1;
    Tensor out({c, h_out, w_out});
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t oy = 0; oy < h_out; ++oy) {
            for (std::size_t ox = 0; ox < w_out; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t dy = 0; dy < window; ++dy) {
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        best = std::max(best,
                                        input.at3(ci, oy * stride + dy, ox * stride + dx));
                    }
                }
                out.at3(ci, oy, ox) = best;
            }
        }
    }
    return out;
}

std::vector<double> bilinear_oracle(const Tensor& featmap, double u, double v) {
    const std::size_t c = featmap.shape[0];
    const std::size_t h = featmap.shape[1];
    const std::size_t w = featmap.shape[2];
    const double gx = u * static_cast<double>(w - 1);
    const double gy = v * static_cast<double>(h - 1);
    std::size_t x0 = static_cast<std::size_t>(std::floor(gx));
    std::size_t y0 = static_cast<std::size_t>(std::floor(gy));
    if (w > 1 && x0 > w - 2) x0 = w - 2;
    if (h > 1 && y0 > h - 2) y0 = h - 2;
    const std::size_t x1 = w > 1 ? x0 + 1 : x0;
    const std::size_t y1 = h > 1 ? y0 + 1 : y0;
    const double tx = gx - static_cast<double>(x0);
    const double ty = gy - static_cast<double>(y0);
    std::vector<double> out(c);
    for (std::size_t i = 0; i < c; ++i) {
        out[i] = featmap.at3(i, y0, x0) * (1.0 - tx) * (1.0 - ty) +
                 featmap.at3(i, y0, x1) * tx * (1.0 - ty) +
                 featmap.at3(i, y1, x0) * (1.0 - tx) * ty +
                 featmap.at3(i, y1, x1) * tx * ty;
    }
    return out;
}

double dot_oracle(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

std::string fixture_path(const std::string& name) {
    return std::string(SFV_FIXTURE_DIR) + "/" + name;
}

std::vector<LayerDef> small_architecture(std::size_t feature_dim) {
    return {
        LayerDef::conv(8, 5, 2, 2),
        LayerDef::relu(),
        LayerDef::maxpool(2, 2),
        LayerDef::conv(feature_dim, 3, 1, 1),
        LayerDef::relu(),
    };
}

namespace {

// The fixture models carry a gain on the final convolution so feature
// magnitudes are O(10): recovery tests then run in a regime where the fixed
// L1/2 penalty does not swamp the data term within the standard epoch budget.
void scale_final_conv(BackboneModel& model, double gain) {
    for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) {
        if (auto* conv = std::get_if<ConvLayer>(&*it)) {
            for (double& w : conv->kernel.data) w *= gain;
            for (double& b : conv->bias.data) b *= gain;
            return;
        }
    }
}

}  // namespace

BackboneModel make_small_fixture_backbone() {
    BackboneModel model = make_random_backbone(small_architecture(), 32, kSmallBackboneSeed);
    scale_final_conv(model, 240.0);
    return model;
}

BackboneModel make_default_fixture_backbone() {
    BackboneModel model = make_random_backbone(default_architecture(), 64, kDefaultBackboneSeed);
    scale_final_conv(model, 480.0);
    return model;
}

Tensor make_fixture_image(std::size_t size, std::uint64_t seed) {
    return make_texture_image(size, horizontal_texture(), seed);
}

TextureParams horizontal_texture() {
    TextureParams p;
    p.orientation_deg = 0.0;
    return p;
}

TextureParams vertical_texture() {
    TextureParams p;
    p.orientation_deg = 90.0;
    return p;
}

Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng, double lo,
                     double hi) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

void write_ppm(const Tensor& pixels, const std::string& path) {
    save_ppm(Image::from_pixels(pixels), path);
}

TempDir::TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("sfv_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
}

std::string TempDir::file(const std::string& name) const {
    return (path / name).string();
}

}  // namespace sfv::test
