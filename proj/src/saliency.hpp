#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "readout.hpp"
#include "similarity.hpp"
#include "tensor.hpp"

namespace sfv {

enum class AttributionMethod { vanilla, integrated_gradients };

struct AttributionConfig {
    AttributionMethod method = AttributionMethod::vanilla;
    std::size_t ig_steps = 32;
    double smoothing_sigma = 2.0;  // pixels
    double norm_floor = 1e-10;

    void validate() const;
};

// Signed per-pixel map collapsed over color channels, together with the norm
// it carries and the similarity bound it must respect.
struct SaliencyMap {
    Tensor values;  // h x w
    double l2_norm = 0.0;
    double bound = 0.0;  // the similarity s of the generating pair
    std::string image_id;
};

// Gaussian blur with kernel radius ceil(3 sigma) and zero-padded edges;
// sigma = 0 is the identity.
Tensor gaussian_smooth(const Tensor& map, double sigma);

// Gradient of the predicted response w.r.t. the pixels, shape 3 x h x w.
Tensor simple_gradient_map(const ReadoutModel& model, const Tensor& image);

// Attribution rows for the requested features before any post-processing,
// shape |indices| x 3 x h x w: the plain Jacobian rows, or their integrated
// average along the straight path from the zero image (the input
// multiplication step is deliberately not applied).
Tensor integrated_gradients_rows(const BackboneModel& model, const Tensor& image,
                                 std::size_t m,
                                 const std::vector<std::size_t>& feature_indices);
Tensor integrated_gradients_rows_at(const BackboneModel& model, const Tensor& image,
                                    double u, double v, std::size_t m,
                                    const std::vector<std::size_t>& feature_indices);

// One processed map per latent feature: attribution row, channels collapsed
// by summation, Gaussian-smoothed, then scaled to unit L2 norm. Rows whose
// pre-normalization norm falls below norm_floor are zeroed and flagged.
struct PerFeatureMaps {
    Tensor rows;  // c x h x w
    std::vector<std::uint8_t> degenerate;
};

PerFeatureMaps per_feature_maps(const ReadoutModel& model, const Tensor& image,
                                const AttributionConfig& config);

// Per-feature contributions to the similarity. Nonnegative whenever both
// activation vectors are, in which case they sum to s.
std::vector<double> beta_weights(std::span<const double> a_in,
                                 std::span<const double> a_out,
                                 std::span<const double> w);

struct ParallelSaliency {
    SaliencyMap map_out;   // for the driver image
    SaliencyMap map_in;    // for the reference image
    SimilarityScore similarity;
    std::vector<double> beta;
    std::vector<std::uint8_t> degenerate_out;  // per feature, driver side
    std::vector<std::uint8_t> degenerate_in;
};

// The paired maps: each is the beta-weighted sum of that image's unit-norm
// per-feature maps, so its L2 norm is bounded by s.
ParallelSaliency parallel_saliency(const ReadoutModel& model, const Tensor& image_out,
                                   const Tensor& image_in, const AttributionConfig& config,
                                   const std::string& id_out = "x_out",
                                   const std::string& id_in = "x_in");

struct BoundReport {
    double l2_norm = 0.0;
    double bound = 0.0;
    bool pass = false;
};

// Asserts ||I||_2 <= s + 1e-9. A violation indicates negative activations or
// a normalization bug upstream.
BoundReport check_bound(const SaliencyMap& map);

}  // namespace sfv
