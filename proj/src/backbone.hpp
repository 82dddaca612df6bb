#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "container.hpp"
#include "tensor.hpp"

namespace sfv {

struct ConvLayer {
    Tensor kernel;  // c_out x c_in x k x k
    Tensor bias;    // c_out
    std::size_t stride = 1;
    std::size_t padding = 0;
};

struct ReluLayer {};

struct MaxPoolLayer {
    std::size_t window = 2;
    std::size_t stride = 2;
};

using Layer = std::variant<ConvLayer, ReluLayer, MaxPoolLayer>;

// The feature extractor: a small CNN whose final layer must be a ReLU, so
// extracted features are nonnegative. Immutable after construction; safe to
// share across threads.
struct BackboneModel {
    std::vector<Layer> layers;
    double readout_u = 0.5;
    double readout_v = 0.5;
    std::size_t input_size = 224;  // expected square RGB input

    std::size_t feature_dim() const;
    void validate() const;
};

struct FeatureResult {
    std::vector<double> features;
    ComputationRecord record;
};

// Runs the layer stack without the spatial readout; returns the final
// (post-ReLU) feature map of shape c x h_a x w_a.
Tensor forward_feature_map(const BackboneModel& model, const Tensor& image,
                           ComputationRecord* record = nullptr);

// Full extraction: layer stack followed by bilinear sampling at the readout
// location. The returned record supports vjp back to the input image.
FeatureResult extract_features(const BackboneModel& model, const Tensor& image);
FeatureResult extract_features_at(const BackboneModel& model, const Tensor& image,
                                  double u, double v);

// Extraction without building a record, for bulk feature computation.
std::vector<double> features_at(const BackboneModel& model, const Tensor& image,
                                double u, double v);

// One gradient map per requested feature: row i is the adjoint of feature
// feature_indices[i] w.r.t. the input image, shape |indices| x 3 x h x w.
Tensor jacobian_rows(const BackboneModel& model, const Tensor& image,
                     const std::vector<std::size_t>& feature_indices);
Tensor jacobian_rows_at(const BackboneModel& model, const Tensor& image, double u,
                        double v, const std::vector<std::size_t>& feature_indices);

// Serialization to/from the SFVW named-tensor container.
WeightContainer backbone_to_container(const BackboneModel& model);
BackboneModel backbone_from_container(const WeightContainer& container);
void save_backbone(const BackboneModel& model, const std::string& path);
BackboneModel load_backbone(const std::string& path);

// Architecture description used to build randomly initialized models.
struct LayerDef {
    enum class Kind { conv, relu, maxpool };
    Kind kind = Kind::relu;
    std::size_t out_channels = 0;  // conv
    std::size_t kernel = 0;        // conv
    std::size_t stride = 1;        // conv, maxpool
    std::size_t padding = 0;       // conv
    std::size_t window = 0;        // maxpool

    static LayerDef conv(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                         std::size_t padding);
    static LayerDef relu();
    static LayerDef maxpool(std::size_t window, std::size_t stride);
};

// conv(3->16,k5,s2,p2) relu pool(2,2) conv(16->32,k3,s1,p1) relu pool(2,2)
// conv(32->c,k3,s1,p1) relu
std::vector<LayerDef> default_architecture(std::size_t feature_dim = 64);

// He-scaled random kernels, small positive biases.
BackboneModel make_random_backbone(const std::vector<LayerDef>& architecture,
                                   std::size_t input_size, std::uint64_t seed);

}  // namespace sfv
