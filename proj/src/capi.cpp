#include "sfv/sfv.h"

#include <algorithm>
#include <cstring>
#include <string>

#include "backbone.hpp"
#include "errors.hpp"
#include "gradcheck.hpp"
#include "image.hpp"
#include "pipeline.hpp"
#include "readout.hpp"
#include "saliency.hpp"
#include "similarity.hpp"
#include "stats.hpp"
#include "synth.hpp"

struct sfv_backbone {
    std::shared_ptr<const sfv::BackboneModel> model;
};
struct sfv_readout {
    sfv::ReadoutModel model;
};
struct sfv_image {
    sfv::Image image;
};
struct sfv_config {
    sfv::PipelineConfig config;
};
struct sfv_saliency_pair {
    sfv::ParallelSaliency result;
};

namespace {

thread_local std::string g_last_error;

sfv_status map_code(sfv::ErrorCode code) {
    switch (code) {
        case sfv::ErrorCode::invalid_argument: return SFV_ERR_INVALID_ARGUMENT;
        case sfv::ErrorCode::io: return SFV_ERR_IO;
        case sfv::ErrorCode::format: return SFV_ERR_FORMAT;
        case sfv::ErrorCode::shape: return SFV_ERR_SHAPE;
        case sfv::ErrorCode::domain: return SFV_ERR_DOMAIN;
        case sfv::ErrorCode::numeric: return SFV_ERR_NUMERIC;
        case sfv::ErrorCode::pipeline: return SFV_ERR_PIPELINE;
    }
    return SFV_ERR_UNKNOWN;
}

template <typename F>
sfv_status guarded(F&& fn) {
    try {
        fn();
        return SFV_OK;
    } catch (const sfv::Error& e) {
        g_last_error = e.what();
        return map_code(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SFV_ERR_UNKNOWN;
    } catch (...) {
        g_last_error = "unknown error";
        return SFV_ERR_UNKNOWN;
    }
}

sfv_status fail_invalid(const char* msg) {
    g_last_error = msg;
    return SFV_ERR_INVALID_ARGUMENT;
}

void copy_summary(const std::string& text, char* summary, size_t summary_len) {
    if (!summary || summary_len == 0) return;
    const size_t n = std::min(text.size(), summary_len - 1);
    std::memcpy(summary, text.data(), n);
    summary[n] = '\0';
}

const sfv::SaliencyMap* select_map(const sfv_saliency_pair* pair, int which) {
    if (which == 0) return &pair->result.map_out;
    if (which == 1) return &pair->result.map_in;
    return nullptr;
}

sfv::AttributionConfig to_config(const sfv_attribution_options* options) {
    sfv::AttributionConfig cfg;
    if (options) {
        cfg.method = options->use_integrated_gradients
                         ? sfv::AttributionMethod::integrated_gradients
                         : sfv::AttributionMethod::vanilla;
        cfg.ig_steps = options->ig_steps;
        cfg.smoothing_sigma = options->smoothing_sigma;
        cfg.norm_floor = options->norm_floor;
    }
    return cfg;
}

}  // namespace

extern "C" {

const char* sfv_version(void) { return "0.1.0"; }

const char* sfv_status_name(sfv_status status) {
    switch (status) {
        case SFV_OK: return "ok";
        case SFV_ERR_INVALID_ARGUMENT: return "invalid-argument";
        case SFV_ERR_IO: return "io";
        case SFV_ERR_FORMAT: return "format";
        case SFV_ERR_SHAPE: return "shape";
        case SFV_ERR_DOMAIN: return "domain";
        case SFV_ERR_NUMERIC: return "numeric";
        case SFV_ERR_PIPELINE: return "pipeline";
        case SFV_ERR_UNKNOWN: break;
    }
    return "unknown";
}

const char* sfv_last_error(void) { return g_last_error.c_str(); }

sfv_status sfv_backbone_load(const char* path, sfv_backbone** out) {
    if (!path || !out) return fail_invalid("null argument");
    return guarded([&] {
        *out = new sfv_backbone{
            std::make_shared<const sfv::BackboneModel>(sfv::load_backbone(path))};
    });
}

sfv_status sfv_backbone_save(const sfv_backbone* backbone, const char* path) {
    if (!backbone || !path) return fail_invalid("null argument");
    return guarded([&] { sfv::save_backbone(*backbone->model, path); });
}

sfv_status sfv_backbone_random(size_t feature_dim, size_t input_size, uint64_t seed,
                               sfv_backbone** out) {
    if (!out) return fail_invalid("null argument");
    return guarded([&] {
        auto model = sfv::make_random_backbone(sfv::default_architecture(feature_dim),
                                               input_size, seed);
        *out = new sfv_backbone{
            std::make_shared<const sfv::BackboneModel>(std::move(model))};
    });
}

size_t sfv_backbone_feature_dim(const sfv_backbone* backbone) {
    return backbone ? backbone->model->feature_dim() : 0;
}

size_t sfv_backbone_input_size(const sfv_backbone* backbone) {
    return backbone ? backbone->model->input_size : 0;
}

void sfv_backbone_free(sfv_backbone* backbone) { delete backbone; }

sfv_status sfv_image_load(const char* path, size_t target_size, sfv_image** out) {
    if (!path || !out) return fail_invalid("null argument");
    return guarded([&] {
        sfv::Image img = sfv::load_ppm(path);
        if (target_size > 0) {
            img = sfv::resize_bilinear(img, target_size, target_size);
        }
        *out = new sfv_image{std::move(img)};
    });
}

size_t sfv_image_width(const sfv_image* image) { return image ? image->image.width : 0; }
size_t sfv_image_height(const sfv_image* image) { return image ? image->image.height : 0; }
void sfv_image_free(sfv_image* image) { delete image; }

sfv_status sfv_extract_features(const sfv_backbone* backbone, const sfv_image* image,
                                double* out_features) {
    if (!backbone || !image || !out_features) return fail_invalid("null argument");
    return guarded([&] {
        const std::vector<double> a =
            sfv::features_at(*backbone->model, image->image.pixels,
                             backbone->model->readout_u, backbone->model->readout_v);
        std::memcpy(out_features, a.data(), a.size() * sizeof(double));
    });
}

sfv_status sfv_readout_load(const char* path, const sfv_backbone* backbone,
                            sfv_readout** out) {
    if (!path || !backbone || !out) return fail_invalid("null argument");
    return guarded([&] {
        *out = new sfv_readout{sfv::load_readout(path, backbone->model)};
    });
}

sfv_status sfv_readout_save(const sfv_readout* readout, const char* path) {
    if (!readout || !path) return fail_invalid("null argument");
    return guarded([&] { sfv::save_readout(readout->model, path); });
}

sfv_status sfv_readout_create(const sfv_backbone* backbone, const double* weights,
                              size_t n, double u, double v, sfv_readout** out) {
    if (!backbone || !weights || !out) return fail_invalid("null argument");
    return guarded([&] {
        if (n != backbone->model->feature_dim()) {
            throw sfv::Error(sfv::ErrorCode::shape,
                             "weight length does not match backbone feature dim");
        }
        if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
            throw sfv::Error(sfv::ErrorCode::domain, "readout location outside [0,1]^2");
        }
        sfv::ReadoutModel model;
        model.weights.assign(weights, weights + n);
        model.u = u;
        model.v = v;
        model.backbone = backbone->model;
        *out = new sfv_readout{std::move(model)};
    });
}

size_t sfv_readout_dim(const sfv_readout* readout) {
    return readout ? readout->model.weights.size() : 0;
}

sfv_status sfv_readout_weights(const sfv_readout* readout, double* out, size_t n) {
    if (!readout || !out) return fail_invalid("null argument");
    if (n != readout->model.weights.size()) return fail_invalid("buffer length mismatch");
    std::memcpy(out, readout->model.weights.data(), n * sizeof(double));
    return SFV_OK;
}

sfv_status sfv_predict(const sfv_readout* readout, const double* features, size_t n,
                       double* out) {
    if (!readout || !features || !out) return fail_invalid("null argument");
    return guarded([&] { *out = sfv::predict(readout->model, {features, n}); });
}

void sfv_readout_free(sfv_readout* readout) { delete readout; }

sfv_status sfv_neuron_similarity(const double* a1, const double* a2, const double* w,
                                 size_t n, double* out) {
    if (!a1 || !a2 || !w || !out) return fail_invalid("null argument");
    return guarded([&] { *out = sfv::neuron_similarity({a1, n}, {a2, n}, {w, n}); });
}

sfv_status sfv_beta_weights(const double* a_in, const double* a_out, const double* w,
                            size_t n, double* out_beta) {
    if (!a_in || !a_out || !w || !out_beta) return fail_invalid("null argument");
    return guarded([&] {
        const std::vector<double> beta = sfv::beta_weights({a_in, n}, {a_out, n}, {w, n});
        std::memcpy(out_beta, beta.data(), beta.size() * sizeof(double));
    });
}

sfv_status sfv_build_synthetic_neuron(const double* a_in, size_t rows_in,
                                      const double* a_out, size_t rows_out, size_t c,
                                      double* out_w, double* out_top_eigenvalue,
                                      int* out_degenerate) {
    if (!a_in || !a_out || !out_w) return fail_invalid("null argument");
    return guarded([&] {
        sfv::ActivationMatrix m_in;
        m_in.feature_dim = c;
        m_in.values.assign(a_in, a_in + rows_in * c);
        m_in.ids.assign(rows_in, "");
        sfv::ActivationMatrix m_out;
        m_out.feature_dim = c;
        m_out.values.assign(a_out, a_out + rows_out * c);
        m_out.ids.assign(rows_out, "");
        const sfv::SyntheticNeuron neuron = sfv::build_synthetic_neuron(m_in, m_out);
        std::memcpy(out_w, neuron.weights.data(), c * sizeof(double));
        if (out_top_eigenvalue) *out_top_eigenvalue = neuron.top_eigenvalue;
        if (out_degenerate) *out_degenerate = neuron.degenerate ? 1 : 0;
    });
}

sfv_status sfv_mann_whitney_u(const double* sample_a, size_t n_a, const double* sample_b,
                              size_t n_b, double* out_u, double* out_p_two_sided) {
    if (!sample_a || !sample_b) return fail_invalid("null argument");
    return guarded([&] {
        const sfv::MannWhitneyResult res =
            sfv::mann_whitney_u({sample_a, n_a}, {sample_b, n_b});
        if (out_u) *out_u = res.u1;
        if (out_p_two_sided) *out_p_two_sided = res.p_two_sided;
    });
}

void sfv_attribution_options_init(sfv_attribution_options* options) {
    if (!options) return;
    options->use_integrated_gradients = 0;
    options->ig_steps = 32;
    options->smoothing_sigma = 2.0;
    options->norm_floor = 1e-10;
}

sfv_status sfv_parallel_saliency(const sfv_readout* readout, const sfv_image* driver,
                                 const sfv_image* reference,
                                 const sfv_attribution_options* options,
                                 sfv_saliency_pair** out) {
    if (!readout || !driver || !reference || !out) return fail_invalid("null argument");
    return guarded([&] {
        *out = new sfv_saliency_pair{
            sfv::parallel_saliency(readout->model, driver->image.pixels,
                                   reference->image.pixels, to_config(options))};
    });
}

double sfv_saliency_similarity(const sfv_saliency_pair* pair) {
    return pair ? pair->result.similarity.value : 0.0;
}

size_t sfv_saliency_map_size(const sfv_saliency_pair* pair) {
    return pair ? pair->result.map_out.values.size() : 0;
}

sfv_status sfv_saliency_norm(const sfv_saliency_pair* pair, int which, double* out) {
    if (!pair || !out) return fail_invalid("null argument");
    const sfv::SaliencyMap* map = select_map(pair, which);
    if (!map) return fail_invalid("which must be 0 or 1");
    *out = map->l2_norm;
    return SFV_OK;
}

sfv_status sfv_saliency_values(const sfv_saliency_pair* pair, int which, double* out,
                               size_t len) {
    if (!pair || !out) return fail_invalid("null argument");
    const sfv::SaliencyMap* map = select_map(pair, which);
    if (!map) return fail_invalid("which must be 0 or 1");
    if (len != map->values.size()) return fail_invalid("buffer length mismatch");
    std::memcpy(out, map->values.data.data(), len * sizeof(double));
    return SFV_OK;
}

sfv_status sfv_saliency_beta(const sfv_saliency_pair* pair, double* out, size_t len) {
    if (!pair || !out) return fail_invalid("null argument");
    if (len != pair->result.beta.size()) return fail_invalid("buffer length mismatch");
    std::memcpy(out, pair->result.beta.data(), len * sizeof(double));
    return SFV_OK;
}

sfv_status sfv_saliency_bound_check(const sfv_saliency_pair* pair, int which,
                                    int* out_pass) {
    if (!pair || !out_pass) return fail_invalid("null argument");
    const sfv::SaliencyMap* map = select_map(pair, which);
    if (!map) return fail_invalid("which must be 0 or 1");
    *out_pass = sfv::check_bound(*map).pass ? 1 : 0;
    return SFV_OK;
}

sfv_status sfv_saliency_render(const sfv_saliency_pair* pair, int which,
                               const sfv_image* image, const char* path) {
    if (!pair || !image || !path) return fail_invalid("null argument");
    const sfv::SaliencyMap* map = select_map(pair, which);
    if (!map) return fail_invalid("which must be 0 or 1");
    return guarded([&] { sfv::render_overlay(image->image, map->values, path); });
}

void sfv_saliency_pair_free(sfv_saliency_pair* pair) { delete pair; }

sfv_status sfv_config_load(const char* path, sfv_config** out) {
    if (!path || !out) return fail_invalid("null argument");
    return guarded([&] { *out = new sfv_config{sfv::load_pipeline_config(path)}; });
}

sfv_status sfv_config_set_seed(sfv_config* config, uint64_t seed) {
    if (!config) return fail_invalid("null argument");
    config->config.seed = seed;
    config->config.train.seed = seed;
    return SFV_OK;
}

sfv_status sfv_config_set_out_dir(sfv_config* config, const char* out_dir) {
    if (!config || !out_dir) return fail_invalid("null argument");
    config->config.out_dir = out_dir;
    return SFV_OK;
}

void sfv_config_free(sfv_config* config) { delete config; }

sfv_status sfv_cmd_fit(const sfv_config* config, char* summary, size_t summary_len) {
    if (!config) return fail_invalid("null argument");
    return guarded([&] {
        const sfv::CommandResult res = sfv::cmd_fit(config->config);
        copy_summary(res.report.text(), summary, summary_len);
    });
}

sfv_status sfv_cmd_eval(const sfv_config* config, const char* readout_path, char* summary,
                        size_t summary_len) {
    if (!config || !readout_path) return fail_invalid("null argument");
    return guarded([&] {
        const sfv::CommandResult res = sfv::cmd_eval(config->config, readout_path);
        copy_summary(res.report.text(), summary, summary_len);
    });
}

sfv_status sfv_cmd_select_reference(const sfv_config* config, const char* readout_path,
                                    const char* query, char* summary, size_t summary_len) {
    if (!config || !readout_path || !query) return fail_invalid("null argument");
    return guarded([&] {
        const sfv::CommandResult res =
            sfv::cmd_select_reference(config->config, readout_path, query);
        copy_summary(res.report.text(), summary, summary_len);
    });
}

sfv_status sfv_cmd_visualize(const sfv_config* config, const char* readout_path,
                             const char* outside_id, const char* within_id, char* summary,
                             size_t summary_len) {
    if (!config) return fail_invalid("null argument");
    return guarded([&] {
        sfv::VisualizeOptions options;
        if (readout_path) options.readout_path = readout_path;
        if (outside_id) options.outside_id = outside_id;
        if (within_id) options.within_id = within_id;
        const sfv::CommandResult res = sfv::cmd_visualize(config->config, options);
        copy_summary(res.report.text(), summary, summary_len);
    });
}

sfv_status sfv_cmd_synth_neuron(const sfv_config* config, const char* within_manifest,
                                const char* outside_manifest, double noise_std,
                                const char* emit_responses_path, char* summary,
                                size_t summary_len) {
    if (!config || !within_manifest || !outside_manifest) {
        return fail_invalid("null argument");
    }
    return guarded([&] {
        sfv::SynthNeuronOptions options;
        options.within_manifest = within_manifest;
        options.outside_manifest = outside_manifest;
        options.noise_std = noise_std;
        if (emit_responses_path) options.emit_responses_path = emit_responses_path;
        const sfv::CommandResult res = sfv::cmd_synth_neuron(config->config, options);
        copy_summary(res.report.text(), summary, summary_len);
    });
}

sfv_status sfv_cmd_gradcheck(size_t seeds, uint64_t base_seed, char* summary,
                             size_t summary_len) {
    return guarded([&] {
        const sfv::GradCheckReport report = sfv::run_gradient_checks(seeds, base_seed);
        std::string text = "checks=" + std::to_string(report.lines.size()) + "\n";
        text += "step=" + sfv::fmt_g17(report.step) + "\n";
        text += "tolerance=" + sfv::fmt_g17(report.tolerance) + "\n";
        double worst = 0.0;
        for (const auto& line : report.lines) {
            text += "check." + line.name + "." + std::to_string(line.seed) + "=" +
                    sfv::fmt_g17(line.max_rel_err) + ":" + (line.pass ? "pass" : "FAIL") +
                    "\n";
            worst = std::max(worst, line.max_rel_err);
        }
        text += "max_rel_err=" + sfv::fmt_g17(worst) + "\n";
        text += std::string("pass=") + (report.pass ? "1" : "0") + "\n";
        copy_summary(text, summary, summary_len);
        if (!report.pass) {
            throw sfv::Error(sfv::ErrorCode::numeric,
                             "gradient checks failed (worst relative error " +
                                 sfv::fmt_g17(worst) + ")");
        }
    });
}

}  // extern "C"
