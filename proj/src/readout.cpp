#include "readout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "errors.hpp"
#include "image.hpp"
#include "rng.hpp"

namespace sfv {

std::vector<double> ReadoutModel::features_for(const Tensor& image) const {
    if (!backbone) {
        throw Error(ErrorCode::invalid_argument, "readout model has no backbone");
    }
    return features_at(*backbone, image, u, v);
}

double predict(const ReadoutModel& model, std::span<const double> features) {
    if (features.size() != model.weights.size()) {
        throw Error(ErrorCode::shape, "predict: feature dimension " +
                                          std::to_string(features.size()) +
                                          " does not match weights " +
                                          std::to_string(model.weights.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        acc += features[i] * model.weights[i];
    }
    return acc;
}

namespace {

double l_half_penalty(std::span<const double> w, double reg_weight, double eps_reg) {
    double acc = 0.0;
    for (double wi : w) {
        acc += std::pow(wi * wi + eps_reg, 0.25);
    }
    return reg_weight * acc;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorCode::domain,
                    "readout location must start strictly inside (0,1) to be trainable");
    }
    return std::log(p / (1.0 - p));
}

}  // namespace

double loss(const ReadoutModel& model, std::span<const LabeledFeatures> batch,
            double reg_weight, double eps_reg) {
    if (batch.empty()) {
        throw Error(ErrorCode::invalid_argument, "loss on an empty batch");
    }
    double mse = 0.0;
    for (const auto& sample : batch) {
        const double err = predict(model, sample.features) - sample.response;
        mse += err * err;
    }
    mse /= static_cast<double>(batch.size());
    return mse + l_half_penalty(model.weights, reg_weight, eps_reg);
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "learning_rate must be positive");
    }
    if (!(reg_weight >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "reg_weight must be nonnegative");
    }
    if (epochs < 1) {
        throw Error(ErrorCode::invalid_argument, "epochs must be at least 1");
    }
    if (!(eps_reg >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "eps_reg must be nonnegative");
    }
}

ReadoutObjective readout_objective(const FeatureMapSet& data, std::span<const double> w,
                                   double p_u, double p_v, double reg_weight,
                                   double eps_reg) {
    const std::size_t n = data.maps.size();
    if (n == 0) {
        throw Error(ErrorCode::invalid_argument, "objective on an empty feature set");
    }
    const std::size_t c = w.size();
    const double u = sigmoid(p_u);
    const double v = sigmoid(p_v);

    ReadoutObjective obj;
    obj.d_w.assign(c, 0.0);
    double d_u = 0.0;
    double d_v = 0.0;
    double mse = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const BilinearGrad bg = bilinear_sample_with_grad(data.maps[j], u, v);
        if (bg.value.size() != c) {
            throw Error(ErrorCode::shape, "feature map channel count " +
                                              std::to_string(bg.value.size()) +
                                              " does not match weight length " +
                                              std::to_string(c));
        }
        double yhat = 0.0;
        double da_du = 0.0;
        double da_dv = 0.0;
        for (std::size_t i = 0; i < c; ++i) {
            yhat += bg.value[i] * w[i];
            da_du += bg.d_u[i] * w[i];
            da_dv += bg.d_v[i] * w[i];
        }
        const double err = yhat - data.responses[j];
        mse += err * err;
        const double g = 2.0 * err / static_cast<double>(n);
        for (std::size_t i = 0; i < c; ++i) {
            obj.d_w[i] += g * bg.value[i];
        }
        d_u += g * da_du;
        d_v += g * da_dv;
    }
    mse /= static_cast<double>(n);

    obj.mse = mse;
    obj.value = mse + l_half_penalty(w, reg_weight, eps_reg);
    for (std::size_t i = 0; i < c; ++i) {
        // d/dw (w^2 + eps)^(1/4) = w / (2 (w^2 + eps)^(3/4))
        obj.d_w[i] += reg_weight * w[i] / (2.0 * std::pow(w[i] * w[i] + eps_reg, 0.75));
    }
    // Chain through the sigmoid squashing.
    obj.d_pu = d_u * u * (1.0 - u);
    obj.d_pv = d_v * v * (1.0 - v);
    return obj;
}

double validation_mse(const FeatureMapSet& data, std::span<const double> w, double u,
                      double v) {
    const std::size_t n = data.maps.size();
    if (n == 0) {
        throw Error(ErrorCode::invalid_argument, "validation on an empty feature set");
    }
    double mse = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::vector<double> a = bilinear_sample(data.maps[j], u, v);
        double yhat = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) yhat += a[i] * w[i];
        const double err = yhat - data.responses[j];
        mse += err * err;
    }
    return mse / static_cast<double>(n);
}

FitResult fit_readout_cached(const FeatureMapSet& train, const FeatureMapSet& val,
                             std::shared_ptr<const BackboneModel> backbone,
                             const TrainConfig& config) {
    config.validate();
    if (!backbone) {
        throw Error(ErrorCode::invalid_argument, "fit_readout requires a backbone");
    }
    if (train.maps.empty() || val.maps.empty()) {
        throw Error(ErrorCode::invalid_argument,
                    "fit_readout requires non-empty train and val sets");
    }
    const std::size_t c = backbone->feature_dim();

    // Near-zero random init; the penalty gradient vanishes at the origin so
    // tiny symmetric noise lets Adam pick directions immediately.
    Rng rng(config.seed);
    std::vector<double> w(c);
    for (double& wi : w) wi = 1e-3 * rng.normal();
    double p_u = logit(backbone->readout_u);
    double p_v = logit(backbone->readout_v);

    std::vector<double> m(c + 2, 0.0), s(c + 2, 0.0);
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_w = w;
    double best_pu = p_u, best_pv = p_v;
    std::size_t best_epoch = 0;

    FitResult result;
    result.log.reserve(config.epochs);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const ReadoutObjective obj =
            readout_objective(train, w, p_u, p_v, config.reg_weight, config.eps_reg);
        if (!std::isfinite(obj.value)) {
            double wnorm = 0.0;
            for (double wi : w) wnorm += wi * wi;
            throw Error(ErrorCode::numeric,
                        "non-finite training loss at epoch " + std::to_string(epoch) +
                            " (||w||^2 = " + std::to_string(wnorm) + ", p_u = " +
                            std::to_string(p_u) + ", p_v = " + std::to_string(p_v) + ")");
        }

        // Adam update over the stacked parameter vector [w, p_u, p_v].
        const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(epoch));
        const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(epoch));
        auto adam_step = [&](std::size_t k, double grad, double& param) {
            m[k] = config.adam_beta1 * m[k] + (1.0 - config.adam_beta1) * grad;
            s[k] = config.adam_beta2 * s[k] + (1.0 - config.adam_beta2) * grad * grad;
            const double mhat = m[k] / bc1;
            const double shat = s[k] / bc2;
            param -= config.learning_rate * mhat / (std::sqrt(shat) + config.adam_eps);
        };
        for (std::size_t i = 0; i < c; ++i) adam_step(i, obj.d_w[i], w[i]);
        adam_step(c, obj.d_pu, p_u);
        adam_step(c + 1, obj.d_pv, p_v);

        const double vmse = validation_mse(val, w, sigmoid(p_u), sigmoid(p_v));
        if (!std::isfinite(vmse)) {
            throw Error(ErrorCode::numeric,
                        "non-finite validation loss at epoch " + std::to_string(epoch));
        }
        result.log.push_back({obj.value, vmse});
        if (vmse < best_val) {
            best_val = vmse;
            best_w = w;
            best_pu = p_u;
            best_pv = p_v;
            best_epoch = epoch;
        }
    }

    result.model.weights = std::move(best_w);
    result.model.u = sigmoid(best_pu);
    result.model.v = sigmoid(best_pv);
    result.model.backbone = std::move(backbone);
    result.selected_epoch = best_epoch;
    result.selected_val_mse = best_val;
    return result;
}

FeatureMapSet extract_feature_maps(const ResponseManifest& manifest,
                                   const std::vector<std::size_t>& indices,
                                   const BackboneModel& backbone) {
    FeatureMapSet set;
    set.maps.resize(indices.size());
    set.responses.resize(indices.size());

    const std::size_t n_threads =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), indices.size());
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        workers.emplace_back([&, t]() {
            try {
                for (std::size_t k = t; k < indices.size(); k += n_threads) {
                    const ManifestEntry& entry = manifest.entries[indices[k]];
                    const Image img =
                        load_image(manifest.resolve_path(entry), backbone.input_size);
                    set.maps[k] = forward_feature_map(backbone, img.pixels, nullptr);
                    set.responses[k] = entry.response;
                }
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& worker : workers) worker.join();
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return set;
}

FitResult fit_readout(const ResponseManifest& manifest,
                      std::shared_ptr<const BackboneModel> backbone,
                      const TrainConfig& config) {
    const auto train_idx = manifest.split_indices(Split::train);
    const auto val_idx = manifest.split_indices(Split::val);
    if (train_idx.empty() || val_idx.empty()) {
        throw Error(ErrorCode::invalid_argument,
                    "fit_readout requires non-empty train and val splits");
    }
    const FeatureMapSet train = extract_feature_maps(manifest, train_idx, *backbone);
    const FeatureMapSet val = extract_feature_maps(manifest, val_idx, *backbone);
    return fit_readout_cached(train, val, std::move(backbone), config);
}

void save_readout(const ReadoutModel& model, const std::string& path) {
    if (model.weights.empty()) {
        throw Error(ErrorCode::invalid_argument, "cannot save an empty readout");
    }
    WeightContainer c;
    c.add("readout/weights", Tensor::from_data({model.weights.size()},
                                               std::vector<double>(model.weights.begin(),
                                                                   model.weights.end())));
    c.add("readout/location", Tensor::from_data({2}, {model.u, model.v}));
    save_container(c, path);
}

ReadoutModel load_readout(const std::string& path,
                          std::shared_ptr<const BackboneModel> backbone) {
    const WeightContainer c = load_container(path);
    const Tensor& w = c.require("readout/weights");
    const Tensor& loc = c.require("readout/location");
    if (loc.size() != 2) {
        throw Error(ErrorCode::shape, "readout/location must hold 2 values");
    }
    ReadoutModel model;
    model.weights = w.data;
    model.u = loc.data[0];
    model.v = loc.data[1];
    model.backbone = std::move(backbone);
    if (model.backbone && model.weights.size() != model.backbone->feature_dim()) {
        throw Error(ErrorCode::shape, "readout weight length " +
                                          std::to_string(model.weights.size()) +
                                          " does not match backbone feature dim " +
                                          std::to_string(model.backbone->feature_dim()));
    }
    if (!(model.u >= 0.0 && model.u <= 1.0 && model.v >= 0.0 && model.v <= 1.0)) {
        throw Error(ErrorCode::domain, "readout location outside [0,1]^2");
    }
    return model;
}

}  // namespace sfv
