#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "backbone.hpp"
#include "manifest.hpp"
#include "rng.hpp"
#include "synth.hpp"
#include "tensor.hpp"

namespace sfv::test {

// --- independent oracles (kept free of the library's op implementations) ---

// Direct six-nested-loop cross-correlation with explicit bounds checks.
Tensor conv2d_oracle(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                     std::size_t stride, std::size_t padding);

// Direct per-window scan.
Tensor maxpool2d_oracle(const Tensor& input, std::size_t window, std::size_t stride);

// Closed-form four-point interpolation formula.
std::vector<double> bilinear_oracle(const Tensor& featmap, double u, double v);

// Plain scalar-loop dot product.
double dot_oracle(const std::vector<double>& a, const std::vector<double>& b);

// --- fixture helpers -------------------------------------------------------

std::string fixture_path(const std::string& name);

// Small two-conv architecture used across the test suites (c = 16, input 32).
std::vector<LayerDef> small_architecture(std::size_t feature_dim = 16);

// The committed fixture models; the generator in fixture_gen.cpp uses the
// same seeds, so regeneration is reproducible.
inline constexpr std::uint64_t kSmallBackboneSeed = 42;
inline constexpr std::uint64_t kDefaultBackboneSeed = 7;
BackboneModel make_small_fixture_backbone();   // input 32, c = 16
BackboneModel make_default_fixture_backbone(); // input 64, c = 64, default arch

// Deterministic fixture stimulus: horizontally striped texture, seed 1000.
Tensor make_fixture_image(std::size_t size, std::uint64_t seed = 1000);

TextureParams horizontal_texture();
TextureParams vertical_texture();

// Random tensors for property tests.
Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng, double lo,
                     double hi);

// Writes a P6 file for the given 3xHxW tensor (values clamped to [0,1]).
void write_ppm(const Tensor& pixels, const std::string& path);

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag);
    ~TempDir();
    std::string file(const std::string& name) const;
};

}  // namespace sfv::test
