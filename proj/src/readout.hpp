#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "backbone.hpp"
#include "manifest.hpp"
#include "stats.hpp"
#include "tensor.hpp"

namespace sfv {

// Linear model neuron: predicted response is the dot product of the latent
// feature vector with the learned weights. The spatial readout location is
// owned by the readout, not the backbone, because it is trained jointly with
// the weights.
struct ReadoutModel {
    std::vector<double> weights;
    double u = 0.5;
    double v = 0.5;
    std::shared_ptr<const BackboneModel> backbone;

    std::vector<double> features_for(const Tensor& image) const;
};

double predict(const ReadoutModel& model, std::span<const double> features);

struct LabeledFeatures {
    std::vector<double> features;
    double response = 0.0;
};

// Mean squared error plus the smoothed L1/2 weight penalty
// lambda * sum_i (w_i^2 + eps_reg)^(1/4).
double loss(const ReadoutModel& model, std::span<const LabeledFeatures> batch,
            double reg_weight, double eps_reg);

struct TrainConfig {
    double learning_rate = 1e-4;
    double reg_weight = 0.1;
    std::size_t epochs = 2500;
    double eps_reg = 1e-8;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

// Cached inputs for the training loop: the readout location moves during
// optimization, so we keep whole feature maps rather than sampled vectors.
struct FeatureMapSet {
    std::vector<Tensor> maps;  // each c x h_a x w_a
    std::vector<double> responses;
};

struct EpochLog {
    double train_loss = 0.0;  // objective including the penalty, pre-step
    double val_mse = 0.0;     // pure MSE at the post-step parameters
};

struct FitResult {
    ReadoutModel model;
    std::vector<EpochLog> log;
    std::size_t selected_epoch = 0;  // 1-based epoch whose snapshot was kept
    double selected_val_mse = 0.0;
};

// Objective and analytic gradient at raw parameters (w, p_u, p_v) where the
// location is sigmoid-squashed: (u, v) = (sigmoid(p_u), sigmoid(p_v)).
struct ReadoutObjective {
    double value = 0.0;  // mse + penalty
    double mse = 0.0;
    std::vector<double> d_w;
    double d_pu = 0.0;
    double d_pv = 0.0;
};

ReadoutObjective readout_objective(const FeatureMapSet& data, std::span<const double> w,
                                   double p_u, double p_v, double reg_weight,
                                   double eps_reg);

double validation_mse(const FeatureMapSet& data, std::span<const double> w, double u,
                      double v);

// Full-batch Adam, one step per epoch; returns the parameter snapshot with
// the lowest validation MSE (the penalty is excluded from the selection
// metric). Deterministic for a fixed config seed.
FitResult fit_readout_cached(const FeatureMapSet& train, const FeatureMapSet& val,
                             std::shared_ptr<const BackboneModel> backbone,
                             const TrainConfig& config);

// Manifest-driven entry point: loads the referenced images, extracts feature
// maps (in parallel), and trains on the train/val splits.
FitResult fit_readout(const ResponseManifest& manifest,
                      std::shared_ptr<const BackboneModel> backbone,
                      const TrainConfig& config);

// Readout persistence in the SFVW container format.
void save_readout(const ReadoutModel& model, const std::string& path);
ReadoutModel load_readout(const std::string& path,
                          std::shared_ptr<const BackboneModel> backbone);

// Feature-map extraction helper shared by fit and evaluation paths.
FeatureMapSet extract_feature_maps(const ResponseManifest& manifest,
                                   const std::vector<std::size_t>& indices,
                                   const BackboneModel& backbone);

}  // namespace sfv
