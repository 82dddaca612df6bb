#include "backbone.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "rng.hpp"

namespace sfv {

std::size_t BackboneModel::feature_dim() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        if (const auto* conv = std::get_if<ConvLayer>(&*it)) {
            return conv->kernel.shape[0];
        }
    }
    throw Error(ErrorCode::invalid_argument, "backbone has no convolution layer");
}

void BackboneModel::validate() const {
    if (layers.empty()) {
        throw Error(ErrorCode::invalid_argument, "backbone has no layers");
    }
    if (!std::holds_alternative<ReluLayer>(layers.back())) {
        throw Error(ErrorCode::invalid_argument,
                    "backbone must end with a relu layer so features are nonnegative");
    }
    feature_dim();  // requires at least one conv
    if (!(readout_u >= 0.0 && readout_u <= 1.0 && readout_v >= 0.0 && readout_v <= 1.0)) {
        throw Error(ErrorCode::domain, "backbone readout location outside [0,1]^2");
    }
    if (input_size == 0) {
        throw Error(ErrorCode::invalid_argument, "backbone input size must be positive");
    }
}

namespace {

void check_image_shape(const BackboneModel& model, const Tensor& image) {
    if (image.rank() != 3 || image.shape[0] != 3 || image.shape[1] != model.input_size ||
        image.shape[2] != model.input_size) {
        throw Error(ErrorCode::shape, "backbone expects a 3x" + std::to_string(model.input_size) +
                                          "x" + std::to_string(model.input_size) +
                                          " image, got " + shape_str(image.shape));
    }
}

struct ForwardVisitor {
    Tensor& current;
    ComputationRecord* record;

    void operator()(const ConvLayer& l) const {
        current = record ? conv2d_rec(current, l.kernel, l.bias, l.stride, l.padding, *record)
                         : conv2d(current, l.kernel, l.bias, l.stride, l.padding);
    }
    void operator()(const ReluLayer&) const {
        current = record ? relu_rec(current, *record) : relu(current);
    }
    void operator()(const MaxPoolLayer& l) const {
        current = record ? maxpool2d_rec(current, l.window, l.stride, *record)
                         : maxpool2d(current, l.window, l.stride);
    }
};

}  // namespace

Tensor forward_feature_map(const BackboneModel& model, const Tensor& image,
                           ComputationRecord* record) {
    check_image_shape(model, image);
    Tensor current = image;
    for (const Layer& layer : model.layers) {
        std::visit(ForwardVisitor{current, record}, layer);
    }
    return current;
}

FeatureResult extract_features_at(const BackboneModel& model, const Tensor& image,
                                  double u, double v) {
    FeatureResult result;
    Tensor map = forward_feature_map(model, image, &result.record);
    result.features = bilinear_sample_rec(map, u, v, result.record);
    return result;
}

FeatureResult extract_features(const BackboneModel& model, const Tensor& image) {
    return extract_features_at(model, image, model.readout_u, model.readout_v);
}

std::vector<double> features_at(const BackboneModel& model, const Tensor& image,
                                double u, double v) {
    Tensor map = forward_feature_map(model, image, nullptr);
    return bilinear_sample(map, u, v);
}

Tensor jacobian_rows_at(const BackboneModel& model, const Tensor& image, double u,
                        double v, const std::vector<std::size_t>& feature_indices) {
    if (feature_indices.empty()) {
        throw Error(ErrorCode::invalid_argument, "jacobian_rows needs at least one feature index");
    }
    FeatureResult fr = extract_features_at(model, image, u, v);
    const std::size_t c = fr.features.size();
    const std::size_t h = image.shape[1];
    const std::size_t w = image.shape[2];
    Tensor rows({feature_indices.size(), 3, h, w});
    const std::size_t row_len = 3 * h * w;
    for (std::size_t r = 0; r < feature_indices.size(); ++r) {
        const std::size_t idx = feature_indices[r];
        if (idx >= c) {
            throw Error(ErrorCode::invalid_argument,
                        "feature index " + std::to_string(idx) + " out of range [0, " +
                            std::to_string(c) + ")");
        }
        Tensor adjoint({c});
        adjoint.data[idx] = 1.0;
        Tensor g = vjp(fr.record, adjoint);
        std::copy(g.data.begin(), g.data.end(), rows.data.begin() + r * row_len);
    }
    return rows;
}

Tensor jacobian_rows(const BackboneModel& model, const Tensor& image,
                     const std::vector<std::size_t>& feature_indices) {
    return jacobian_rows_at(model, image, model.readout_u, model.readout_v, feature_indices);
}

namespace {

Tensor scalar_tensor(double v) { return Tensor::from_data({1}, {v}); }

constexpr double kKindConv = 0.0;
constexpr double kKindRelu = 1.0;
constexpr double kKindMaxPool = 2.0;

std::size_t required_index(double v, const std::string& what) {
    if (!(v >= 0.0) || v != std::floor(v)) {
        throw Error(ErrorCode::format, "non-integer value for " + what);
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

WeightContainer backbone_to_container(const BackboneModel& model) {
    model.validate();
    WeightContainer c;
    c.add("arch/n_layers", scalar_tensor(static_cast<double>(model.layers.size())));
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const std::string prefix = "arch/layer" + std::to_string(i);
        if (const auto* conv = std::get_if<ConvLayer>(&model.layers[i])) {
            c.add(prefix + "/kind", scalar_tensor(kKindConv));
            c.add(prefix + "/stride", scalar_tensor(static_cast<double>(conv->stride)));
            c.add(prefix + "/padding", scalar_tensor(static_cast<double>(conv->padding)));
            c.add("layer" + std::to_string(i) + "/weight", conv->kernel);
            c.add("layer" + std::to_string(i) + "/bias", conv->bias);
        } else if (std::holds_alternative<ReluLayer>(model.layers[i])) {
            c.add(prefix + "/kind", scalar_tensor(kKindRelu));
        } else {
            const auto& pool = std::get<MaxPoolLayer>(model.layers[i]);
            c.add(prefix + "/kind", scalar_tensor(kKindMaxPool));
            c.add(prefix + "/window", scalar_tensor(static_cast<double>(pool.window)));
            c.add(prefix + "/stride", scalar_tensor(static_cast<double>(pool.stride)));
        }
    }
    c.add("readout/location",
          Tensor::from_data({2}, {model.readout_u, model.readout_v}));
    c.add("meta/input_size", scalar_tensor(static_cast<double>(model.input_size)));
    return c;
}

BackboneModel backbone_from_container(const WeightContainer& c) {
    BackboneModel model;
    const std::size_t n_layers = required_index(c.scalar("arch/n_layers"), "arch/n_layers");
    for (std::size_t i = 0; i < n_layers; ++i) {
        const std::string prefix = "arch/layer" + std::to_string(i);
        const double kind = c.scalar(prefix + "/kind");
        if (kind == kKindConv) {
            ConvLayer layer;
            layer.stride = required_index(c.scalar(prefix + "/stride"), prefix + "/stride");
            layer.padding = required_index(c.scalar(prefix + "/padding"), prefix + "/padding");
            layer.kernel = c.require("layer" + std::to_string(i) + "/weight");
            layer.bias = c.require("layer" + std::to_string(i) + "/bias");
            if (layer.kernel.rank() != 4 || layer.kernel.shape[2] != layer.kernel.shape[3]) {
                throw Error(ErrorCode::shape, "layer" + std::to_string(i) +
                                                  "/weight has invalid shape " +
                                                  shape_str(layer.kernel.shape));
            }
            if (layer.bias.rank() != 1 || layer.bias.shape[0] != layer.kernel.shape[0]) {
                throw Error(ErrorCode::shape, "layer" + std::to_string(i) +
                                                  "/bias shape " + shape_str(layer.bias.shape) +
                                                  " does not match kernel " +
                                                  shape_str(layer.kernel.shape));
            }
            model.layers.emplace_back(std::move(layer));
        } else if (kind == kKindRelu) {
            model.layers.emplace_back(ReluLayer{});
        } else if (kind == kKindMaxPool) {
            MaxPoolLayer layer;
            layer.window = required_index(c.scalar(prefix + "/window"), prefix + "/window");
            layer.stride = required_index(c.scalar(prefix + "/stride"), prefix + "/stride");
            model.layers.emplace_back(layer);
        } else {
            throw Error(ErrorCode::format,
                        prefix + "/kind has unknown value " + std::to_string(kind));
        }
    }
    const Tensor& loc = c.require("readout/location");
    if (loc.size() != 2) {
        throw Error(ErrorCode::shape, "readout/location must hold 2 values");
    }
    model.readout_u = loc.data[0];
    model.readout_v = loc.data[1];
    model.input_size = required_index(c.scalar("meta/input_size"), "meta/input_size");
    model.validate();
    return model;
}

void save_backbone(const BackboneModel& model, const std::string& path) {
    save_container(backbone_to_container(model), path);
}

BackboneModel load_backbone(const std::string& path) {
    return backbone_from_container(load_container(path));
}

LayerDef LayerDef::conv(std::size_t out_channels, std::size_t kernel, std::size_t stride,
                        std::size_t padding) {
    LayerDef d;
    d.kind = Kind::conv;
    d.out_channels = out_channels;
    d.kernel = kernel;
    d.stride = stride;
    d.padding = padding;
    return d;
}

LayerDef LayerDef::relu() {
    LayerDef d;
    d.kind = Kind::relu;
    return d;
}

LayerDef LayerDef::maxpool(std::size_t window, std::size_t stride) {
    LayerDef d;
    d.kind = Kind::maxpool;
    d.window = window;
    d.stride = stride;
    return d;
}

std::vector<LayerDef> default_architecture(std::size_t feature_dim) {
    return {
        LayerDef::conv(16, 5, 2, 2), LayerDef::relu(), LayerDef::maxpool(2, 2),
        LayerDef::conv(32, 3, 1, 1), LayerDef::relu(), LayerDef::maxpool(2, 2),
        LayerDef::conv(feature_dim, 3, 1, 1), LayerDef::relu(),
    };
}

BackboneModel make_random_backbone(const std::vector<LayerDef>& architecture,
                                   std::size_t input_size, std::uint64_t seed) {
    Rng rng(seed);
    BackboneModel model;
    model.input_size = input_size;
    std::size_t channels = 3;
    for (const LayerDef& def : architecture) {
        switch (def.kind) {
            case LayerDef::Kind::conv: {
                ConvLayer layer;
                layer.stride = def.stride;
                layer.padding = def.padding;
                layer.kernel = Tensor({def.out_channels, channels, def.kernel, def.kernel});
                const double scale =
                    std::sqrt(2.0 / static_cast<double>(channels * def.kernel * def.kernel));
                for (double& w : layer.kernel.data) w = scale * rng.normal();
                layer.bias = Tensor({def.out_channels});
                for (double& b : layer.bias.data) b = rng.uniform(0.0, 0.1);
                channels = def.out_channels;
                model.layers.emplace_back(std::move(layer));
                break;
            }
            case LayerDef::Kind::relu:
                model.layers.emplace_back(ReluLayer{});
                break;
            case LayerDef::Kind::maxpool:
                model.layers.emplace_back(MaxPoolLayer{def.window, def.stride});
                break;
        }
    }
    model.validate();
    return model;
}

}  // namespace sfv
