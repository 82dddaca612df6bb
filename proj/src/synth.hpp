#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "backbone.hpp"
#include "tensor.hpp"

namespace sfv {

// N x c matrix of latent activations, one row per image.
struct ActivationMatrix {
    std::vector<std::string> ids;
    std::size_t feature_dim = 0;
    std::vector<double> values;  // row-major, ids.size() x feature_dim

    std::size_t rows() const { return ids.size(); }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * feature_dim, feature_dim};
    }
};

ActivationMatrix activation_matrix(const BackboneModel& backbone,
                                   const std::vector<Tensor>& images,
                                   const std::vector<std::string>& ids, double u, double v);

// All eigenpairs of a symmetric matrix via cyclic Jacobi rotations.
// Eigenvalues are sorted descending by algebraic value; eigenvectors are the
// matching columns of V (stored row-major, n x n), unit-norm, with the first
// nonzero component made positive.
struct EigenDecomposition {
    std::size_t n = 0;
    std::vector<double> eigenvalues;
    std::vector<double> vectors;  // column k = eigenvector k

    std::vector<double> eigenvector(std::size_t k) const;
};

EigenDecomposition symmetric_eigendecomp(std::span<const double> matrix, std::size_t n);

// Readout direction maximizing the activation energy difference between the
// two image sets: the top eigenvector of A_in^T A_in - A_out^T A_out.
struct SyntheticNeuron {
    std::vector<double> weights;  // unit norm
    double top_eigenvalue = 0.0;
    bool degenerate = false;  // zero difference matrix; canonical vector returned
};

SyntheticNeuron build_synthetic_neuron(const ActivationMatrix& a_in,
                                       const ActivationMatrix& a_out);

// response = <a, w> + N(0, noise_std), with a deterministic seeded generator.
struct SyntheticResponse {
    std::string id;
    double response = 0.0;
};

std::vector<SyntheticResponse> generate_synthetic_responses(
    std::span<const double> w, const ActivationMatrix& features, double noise_std,
    std::uint64_t seed);

// Deterministic striped-texture stimulus, used for bundled fixtures and
// synthetic experiments. Orientation selects the stripe direction in degrees;
// each draw jitters orientation, frequency and phase.
struct TextureParams {
    double orientation_deg = 0.0;
    double orientation_jitter_deg = 12.0;
    double min_cycles = 2.0;
    double max_cycles = 6.0;
    std::size_t waves = 3;
    double noise = 0.04;
};

Tensor make_texture_image(std::size_t size, const TextureParams& params,
                          std::uint64_t seed);

}  // namespace sfv
