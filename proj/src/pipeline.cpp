#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "errors.hpp"
#include "image.hpp"
#include "rng.hpp"
#include "saliency.hpp"
#include "similarity.hpp"
#include "stats.hpp"
#include "synth.hpp"

namespace sfv {

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void Report::add(const std::string& key, const std::string& value) {
    fields_.emplace_back(key, value);
}
void Report::add(const std::string& key, const char* value) {
    fields_.emplace_back(key, std::string(value));
}
void Report::add(const std::string& key, double value) { add(key, fmt_g17(value)); }
void Report::add(const std::string& key, std::size_t value) {
    add(key, std::to_string(value));
}
void Report::add(const std::string& key, bool value) {
    add(key, std::string(value ? "1" : "0"));
}

std::string Report::text() const {
    std::string out;
    for (const auto& [key, value] : fields_) {
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

const std::string* Report::find(const std::string& key) const {
    for (const auto& [k, v] : fields_) {
        if (k == key) return &v;
    }
    return nullptr;
}

namespace {

namespace fs = std::filesystem;

// Tracks files created by a command so a failing stage can clean up.
class OutputTracker {
public:
    std::string track(const std::string& path) {
        paths_.push_back(path);
        return path;
    }
    void remove_all() {
        for (const auto& p : paths_) {
            std::error_code ec;
            fs::remove(p, ec);
        }
    }

private:
    std::vector<std::string> paths_;
};

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

std::string out_path(const PipelineConfig& config, const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
}

void ensure_out_dir(const PipelineConfig& config) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) {
        throw Error(ErrorCode::io,
                    "cannot create output directory '" + config.out_dir + "': " + ec.message());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
    }
    out << text;
    out.flush();
    if (!out) {
        throw Error(ErrorCode::io, "write failed for '" + path + "'");
    }
}

std::shared_ptr<const BackboneModel> load_backbone_checked(const PipelineConfig& config) {
    if (config.backbone_weights.empty()) {
        throw Error(ErrorCode::invalid_argument, "config has no backbone_weights path");
    }
    auto backbone = std::make_shared<BackboneModel>(load_backbone(config.backbone_weights));
    if (config.input_size && *config.input_size != backbone->input_size) {
        throw Error(ErrorCode::invalid_argument,
                    "config input_size " + std::to_string(*config.input_size) +
                        " does not match backbone input size " +
                        std::to_string(backbone->input_size));
    }
    return backbone;
}

// Sampled feature vectors for a set of manifest entries, extracted in
// parallel; per-image results are independent so thread count cannot change
// any value.
std::vector<Candidate> candidate_features(const ResponseManifest& manifest,
                                          const std::vector<std::size_t>& indices,
                                          const BackboneModel& backbone, double u, double v) {
    std::vector<Candidate> out(indices.size());
    const std::size_t n_threads = std::min<std::size_t>(
        std::max(1u, std::thread::hardware_concurrency()), std::max<std::size_t>(indices.size(), 1));
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        workers.emplace_back([&, t]() {
            try {
                for (std::size_t k = t; k < indices.size(); k += n_threads) {
                    const ManifestEntry& entry = manifest.entries[indices[k]];
                    const Image img =
                        load_image(manifest.resolve_path(entry), backbone.input_size);
                    out[k].id = entry.id;
                    out[k].features = features_at(backbone, img.pixels, u, v);
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
    return out;
}

std::vector<std::size_t> all_indices(const ResponseManifest& manifest) {
    std::vector<std::size_t> idx(manifest.entries.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

const ManifestEntry& entry_by_id(const ResponseManifest& manifest, const std::string& id) {
    for (const auto& e : manifest.entries) {
        if (e.id == id) return e;
    }
    throw Error(ErrorCode::invalid_argument, "stimulus id '" + id + "' not found in manifest");
}

void write_training_log(const std::string& path, const std::vector<EpochLog>& log) {
    std::string text = "epoch\ttrain_loss\tval_mse\n";
    for (std::size_t i = 0; i < log.size(); ++i) {
        text += std::to_string(i + 1);
        text += '\t';
        text += fmt_g17(log[i].train_loss);
        text += '\t';
        text += fmt_g17(log[i].val_mse);
        text += '\n';
    }
    write_text(path, text);
}

std::size_t near_zero_count(const std::vector<double>& w, double tol = 1e-3) {
    std::size_t n = 0;
    for (double wi : w) {
        if (std::fabs(wi) < tol) ++n;
    }
    return n;
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct EvalOutcome {
    bool ran = false;
    std::string skip_reason;
    std::size_t n = 0;
    double r = 0.0;
    double threshold = 0.0;
    bool significant = false;
};

EvalOutcome evaluate_test_split(const ResponseManifest& manifest, const ReadoutModel& model,
                                double alpha) {
    EvalOutcome outcome;
    const auto test_idx = manifest.split_indices(Split::test);
    if (test_idx.size() < 4) {
        outcome.skip_reason = "test split has fewer than 4 entries";
        return outcome;
    }
    const std::vector<Candidate> cands =
        candidate_features(manifest, test_idx, *model.backbone, model.u, model.v);
    std::vector<double> pred(test_idx.size()), obs(test_idx.size());
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
        pred[i] = predict(model, cands[i].features);
        obs[i] = manifest.entries[test_idx[i]].response;
    }
    outcome.n = test_idx.size();
    outcome.r = pearson_r(pred, obs);
    outcome.threshold = correlation_significance(outcome.n, alpha);
    outcome.significant = outcome.r > outcome.threshold;
    outcome.ran = true;
    return outcome;
}

struct FitArtifacts {
    FitResult fit;
    std::string readout_path;
};

FitArtifacts run_fit_stage(const PipelineConfig& config,
                           std::shared_ptr<const BackboneModel> backbone,
                           OutputTracker& tracker) {
    if (config.within_manifest.empty()) {
        throw Error(ErrorCode::invalid_argument, "config has no within_manifest path");
    }
    const ResponseManifest manifest = load_manifest(config.within_manifest);
    FitArtifacts artifacts;
    artifacts.fit = fit_readout(manifest, std::move(backbone), config.train);
    artifacts.readout_path = tracker.track(out_path(config, "readout.sfvw"));
    save_readout(artifacts.fit.model, artifacts.readout_path);
    write_training_log(tracker.track(out_path(config, "training_log.tsv")),
                       artifacts.fit.log);
    return artifacts;
}

void add_beta_top10(Report& report, const std::vector<double>& beta) {
    std::vector<std::size_t> order(beta.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return beta[a] > beta[b]; });
    const std::size_t take = std::min<std::size_t>(10, order.size());
    for (std::size_t r = 0; r < take; ++r) {
        report.add("beta.top." + std::to_string(r + 1),
                   std::to_string(order[r]) + ":" + fmt_g17(beta[order[r]]));
    }
}

}  // namespace

CommandResult cmd_fit(const PipelineConfig& config) {
    config.validate();
    ensure_out_dir(config);
    OutputTracker tracker;
    try {
        auto backbone = stage("load-backbone", [&] { return load_backbone_checked(config); });
        FitArtifacts artifacts =
            stage("fit", [&] { return run_fit_stage(config, backbone, tracker); });

        CommandResult result;
        Report& report = result.report;
        report.add("command", "fit");
        report.add("seed", static_cast<std::size_t>(config.train.seed));
        report.add("fit.epochs", artifacts.fit.log.size());
        report.add("fit.selected_epoch", artifacts.fit.selected_epoch);
        report.add("fit.selected_val_mse", artifacts.fit.selected_val_mse);
        report.add("fit.final_train_loss", artifacts.fit.log.back().train_loss);
        report.add("fit.readout_u", artifacts.fit.model.u);
        report.add("fit.readout_v", artifacts.fit.model.v);
        report.add("fit.weights_near_zero", near_zero_count(artifacts.fit.model.weights));
        report.add("fit.feature_dim", artifacts.fit.model.weights.size());
        report.add("artifact.readout", "readout.sfvw");
        report.add("artifact.training_log", "training_log.tsv");

        result.report_path = tracker.track(out_path(config, "fit_report.txt"));
        stage("report", [&] { write_text(result.report_path, report.text()); return 0; });
        return result;
    } catch (...) {
        tracker.remove_all();
        throw;
    }
}

CommandResult cmd_eval(const PipelineConfig& config, const std::string& readout_path) {
    config.validate();
    ensure_out_dir(config);
    OutputTracker tracker;
    try {
        auto backbone = stage("load-backbone", [&] { return load_backbone_checked(config); });
        const ReadoutModel model =
            stage("load-readout", [&] { return load_readout(readout_path, backbone); });
        const ResponseManifest manifest = stage("load-manifest", [&] {
            if (config.within_manifest.empty()) {
                throw Error(ErrorCode::invalid_argument, "config has no within_manifest path");
            }
            return load_manifest(config.within_manifest);
        });

        const auto test_idx = manifest.split_indices(Split::test);
        const EvalOutcome outcome = stage("evaluate", [&] {
            if (test_idx.empty()) {
                throw Error(ErrorCode::invalid_argument, "manifest has an empty test split");
            }
            return evaluate_test_split(manifest, model, config.significance_alpha);
        });
        if (!outcome.ran) {
            throw PipelineError("evaluate", outcome.skip_reason);
        }

        // Per-stimulus predictions for inspection.
        const std::vector<Candidate> cands = stage("predictions", [&] {
            return candidate_features(manifest, test_idx, *model.backbone, model.u, model.v);
        });
        std::string tsv = "stimulus_id\tpredicted\tobserved\n";
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            tsv += cands[i].id + '\t' + fmt_g17(predict(model, cands[i].features)) + '\t' +
                   fmt_g17(manifest.entries[test_idx[i]].response) + '\n';
        }
        write_text(tracker.track(out_path(config, "predictions.tsv")), tsv);

        CommandResult result;
        Report& report = result.report;
        report.add("command", "eval");
        report.add("eval.test_n", outcome.n);
        report.add("eval.pearson_r", outcome.r);
        report.add("eval.significance_alpha", config.significance_alpha);
        report.add("eval.significance_threshold", outcome.threshold);
        report.add("eval.significant", outcome.significant);
        report.add("artifact.predictions", "predictions.tsv");

        result.report_path = tracker.track(out_path(config, "eval_report.txt"));
        stage("report", [&] { write_text(result.report_path, report.text()); return 0; });
        return result;
    } catch (...) {
        tracker.remove_all();
        throw;
    }
}

CommandResult cmd_select_reference(const PipelineConfig& config,
                                   const std::string& readout_path,
                                   const std::string& query) {
    config.validate();
    ensure_out_dir(config);
    OutputTracker tracker;
    try {
        auto backbone = stage("load-backbone", [&] { return load_backbone_checked(config); });
        const ReadoutModel model =
            stage("load-readout", [&] { return load_readout(readout_path, backbone); });

        // Resolve the query: a stimulus id from the outside manifest, or a
        // direct image path.
        std::string query_id = query;
        const std::vector<double> query_features = stage("query", [&] {
            if (!config.outside_manifest.empty()) {
                const ResponseManifest outside = load_manifest(config.outside_manifest);
                for (const auto& e : outside.entries) {
                    if (e.id == query) {
                        const Image img =
                            load_image(outside.resolve_path(e), backbone->input_size);
                        return features_at(*backbone, img.pixels, model.u, model.v);
                    }
                }
            }
            const Image img = load_image(query, backbone->input_size);
            query_id = fs::path(query).stem().string();
            return features_at(*backbone, img.pixels, model.u, model.v);
        });

        const ResponseManifest within = stage("load-manifest", [&] {
            if (config.within_manifest.empty()) {
                throw Error(ErrorCode::invalid_argument, "config has no within_manifest path");
            }
            return load_manifest(config.within_manifest);
        });
        std::vector<Candidate> candidates = stage("candidates-within", [&] {
            return candidate_features(within, all_indices(within), *backbone, model.u, model.v);
        });
        if (config.within_top_k > 0) {
            const TopKResult top = top_k_activators(model, candidates, config.within_top_k);
            std::vector<Candidate> filtered;
            for (std::size_t idx : top.indices) filtered.push_back(candidates[idx]);
            candidates = std::move(filtered);
        }

        const std::size_t best = stage("select-reference", [&] {
            return select_reference(query_features, candidates, model.weights);
        });
        const double s =
            neuron_similarity(query_features, candidates[best].features, model.weights);

        CommandResult result;
        Report& report = result.report;
        report.add("command", "select-reference");
        report.add("query.id", query_id);
        report.add("selection.id", candidates[best].id);
        report.add("selection.similarity", s);
        report.add("selection.candidates", candidates.size());
        report.add("selection.within_top_k", config.within_top_k);

        result.report_path = tracker.track(out_path(config, "selection_report.txt"));
        stage("report", [&] { write_text(result.report_path, report.text()); return 0; });
        return result;
    } catch (...) {
        tracker.remove_all();
        throw;
    }
}

CommandResult cmd_visualize(const PipelineConfig& config, const VisualizeOptions& options) {
    config.validate();
    ensure_out_dir(config);
    OutputTracker tracker;
    try {
        auto backbone = stage("load-backbone", [&] { return load_backbone_checked(config); });

        CommandResult result;
        Report& report = result.report;
        report.add("command", "visualize");
        report.add("seed", static_cast<std::size_t>(config.seed));

        // Stage 1: model neuron (fit or load).
        ReadoutModel model;
        if (options.readout_path.empty()) {
            FitArtifacts artifacts =
                stage("fit", [&] { return run_fit_stage(config, backbone, tracker); });
            model = std::move(artifacts.fit.model);
            report.add("fit.enabled", true);
            report.add("fit.epochs", artifacts.fit.log.size());
            report.add("fit.selected_epoch", artifacts.fit.selected_epoch);
            report.add("fit.selected_val_mse", artifacts.fit.selected_val_mse);
            report.add("fit.weights_near_zero", near_zero_count(model.weights));
        } else {
            model = stage("load-readout",
                          [&] { return load_readout(options.readout_path, backbone); });
            report.add("fit.enabled", false);
        }
        report.add("readout.u", model.u);
        report.add("readout.v", model.v);

        // Stage 2: held-out evaluation of the within-category fit.
        const ResponseManifest within = stage("load-within-manifest", [&] {
            if (config.within_manifest.empty()) {
                throw Error(ErrorCode::invalid_argument, "config has no within_manifest path");
            }
            return load_manifest(config.within_manifest);
        });
        const EvalOutcome eval = stage("evaluate", [&] {
            EvalOutcome outcome;
            try {
                outcome = evaluate_test_split(within, model, config.significance_alpha);
            } catch (const Error& e) {
                outcome.ran = false;
                outcome.skip_reason = e.what();
            }
            return outcome;
        });
        if (eval.ran) {
            report.add("eval.test_n", eval.n);
            report.add("eval.pearson_r", eval.r);
            report.add("eval.significance_alpha", config.significance_alpha);
            report.add("eval.significance_threshold", eval.threshold);
            report.add("eval.significant", eval.significant);
        } else {
            report.add("eval.skipped", eval.skip_reason);
        }

        // Stage 3: top out-of-category activators.
        const ResponseManifest outside = stage("load-outside-manifest", [&] {
            if (config.outside_manifest.empty()) {
                throw Error(ErrorCode::invalid_argument, "config has no outside_manifest path");
            }
            return load_manifest(config.outside_manifest);
        });
        const std::vector<Candidate> outside_cands = stage("candidates-outside", [&] {
            if (outside.entries.empty()) {
                throw Error(ErrorCode::invalid_argument,
                            "outside manifest '" + config.outside_manifest + "' has no entries");
            }
            return candidate_features(outside, all_indices(outside), *backbone, model.u,
                                      model.v);
        });
        std::size_t driver_index = 0;
        stage("top-k", [&] {
            const TopKResult top = top_k_activators(model, outside_cands, config.top_k);
            for (std::size_t r = 0; r < top.indices.size(); ++r) {
                report.add("topk." + std::to_string(r + 1),
                           outside_cands[top.indices[r]].id + ":" +
                               fmt_g17(top.predictions[r]));
            }
            if (options.outside_id.empty()) {
                driver_index = top.indices[0];
            } else {
                for (std::size_t i = 0; i < outside_cands.size(); ++i) {
                    if (outside_cands[i].id == options.outside_id) {
                        driver_index = i;
                        return 0;
                    }
                }
                throw Error(ErrorCode::invalid_argument, "outside id '" + options.outside_id +
                                                             "' not found in outside manifest");
            }
            return 0;
        });
        const Candidate& driver = outside_cands[driver_index];
        report.add("pair.outside_id", driver.id);
        report.add("pair.outside_pred", predict(model, driver.features));

        // Stage 4: reference selection among within-category images.
        std::vector<Candidate> within_cands = stage("candidates-within", [&] {
            return candidate_features(within, all_indices(within), *backbone, model.u,
                                      model.v);
        });
        if (config.within_top_k > 0) {
            const TopKResult top = top_k_activators(model, within_cands, config.within_top_k);
            std::vector<Candidate> filtered;
            for (std::size_t idx : top.indices) filtered.push_back(within_cands[idx]);
            within_cands = std::move(filtered);
        }
        std::size_t reference_index = 0;
        stage("select-reference", [&] {
            if (options.within_id.empty()) {
                reference_index = select_reference(driver.features, within_cands, model.weights);
            } else {
                for (std::size_t i = 0; i < within_cands.size(); ++i) {
                    if (within_cands[i].id == options.within_id) {
                        reference_index = i;
                        return 0;
                    }
                }
                throw Error(ErrorCode::invalid_argument, "within id '" + options.within_id +
                                                             "' not found among candidates");
            }
            return 0;
        });
        const Candidate& reference = within_cands[reference_index];
        report.add("pair.within_id", reference.id);

        // Stage 5: paired saliency maps.
        const Image driver_img = stage("load-pair-images", [&] {
            return load_image(outside.resolve_path(entry_by_id(outside, driver.id)),
                              backbone->input_size);
        });
        const Image reference_img = stage("load-pair-images", [&] {
            return load_image(within.resolve_path(entry_by_id(within, reference.id)),
                              backbone->input_size);
        });
        const ParallelSaliency sal = stage("saliency", [&] {
            return parallel_saliency(model, driver_img.pixels, reference_img.pixels,
                                     config.attribution, driver.id, reference.id);
        });
        report.add("similarity", sal.similarity.value);
        report.add("saliency.method", config.attribution.method == AttributionMethod::vanilla
                                          ? "vanilla"
                                          : "integrated_gradients");
        report.add("saliency.out.l2_norm", sal.map_out.l2_norm);
        report.add("saliency.in.l2_norm", sal.map_in.l2_norm);
        report.add("saliency.bound", sal.map_out.bound);

        const BoundReport bound_out = check_bound(sal.map_out);
        const BoundReport bound_in = check_bound(sal.map_in);
        report.add("saliency.out.bound_pass", bound_out.pass);
        report.add("saliency.in.bound_pass", bound_in.pass);
        double beta_sum = 0.0;
        for (double b : sal.beta) beta_sum += b;
        report.add("beta.sum", beta_sum);
        add_beta_top10(report, sal.beta);

        // Stage 6: render artifacts.
        stage("render", [&] {
            save_saliency_pgm(sal.map_out.values,
                              tracker.track(out_path(config, "saliency_out.pgm")));
            save_saliency_pgm(sal.map_in.values,
                              tracker.track(out_path(config, "saliency_in.pgm")));
            render_overlay(driver_img, sal.map_out.values,
                           tracker.track(out_path(config, "overlay_out.ppm")));
            render_overlay(reference_img, sal.map_in.values,
                           tracker.track(out_path(config, "overlay_in.ppm")));

            Report sidecar;
            sidecar.add("pair.outside_id", sal.similarity.id_a);
            sidecar.add("pair.within_id", sal.similarity.id_b);
            sidecar.add("similarity", sal.similarity.value);
            sidecar.add("saliency.out.l2_norm", sal.map_out.l2_norm);
            sidecar.add("saliency.in.l2_norm", sal.map_in.l2_norm);
            sidecar.add("bound", sal.map_out.bound);
            add_beta_top10(sidecar, sal.beta);
            write_text(tracker.track(out_path(config, "saliency_report.txt")), sidecar.text());
            return 0;
        });
        report.add("artifact.saliency_out", "saliency_out.pgm");
        report.add("artifact.saliency_in", "saliency_in.pgm");
        report.add("artifact.overlay_out", "overlay_out.ppm");
        report.add("artifact.overlay_in", "overlay_in.ppm");
        report.add("artifact.saliency_report", "saliency_report.txt");
        report.add("pipeline.status", "ok");

        result.report_path = tracker.track(out_path(config, "run_report.txt"));
        stage("report", [&] { write_text(result.report_path, report.text()); return 0; });
        return result;
    } catch (...) {
        tracker.remove_all();
        throw;
    }
}

CommandResult cmd_synth_neuron(const PipelineConfig& config,
                               const SynthNeuronOptions& options) {
    config.validate();
    ensure_out_dir(config);
    OutputTracker tracker;
    try {
        auto backbone = stage("load-backbone", [&] { return load_backbone_checked(config); });

        const ResponseManifest within = stage("load-within-manifest", [&] {
            if (options.within_manifest.empty()) {
                throw Error(ErrorCode::invalid_argument, "synth-neuron needs a within manifest");
            }
            return load_manifest(options.within_manifest);
        });
        const ResponseManifest outside = stage("load-outside-manifest", [&] {
            if (options.outside_manifest.empty()) {
                throw Error(ErrorCode::invalid_argument, "synth-neuron needs an outside manifest");
            }
            return load_manifest(options.outside_manifest);
        });

        // Random readout location drawn from the run seed, kept away from the
        // map border where bilinear support degenerates.
        Rng rng(config.seed);
        const double u = rng.uniform(0.2, 0.8);
        const double v = rng.uniform(0.2, 0.8);

        const auto build_matrix = [&](const ResponseManifest& manifest, const char* which) {
            if (manifest.entries.empty()) {
                throw Error(ErrorCode::invalid_argument,
                            std::string(which) + " manifest has no entries");
            }
            std::vector<Tensor> images;
            std::vector<std::string> ids;
            images.reserve(manifest.entries.size());
            for (const auto& e : manifest.entries) {
                images.push_back(load_image(manifest.resolve_path(e), backbone->input_size).pixels);
                ids.push_back(e.id);
            }
            return activation_matrix(*backbone, images, ids, u, v);
        };
        const ActivationMatrix a_in =
            stage("activations-within", [&] { return build_matrix(within, "within"); });
        const ActivationMatrix a_out =
            stage("activations-outside", [&] { return build_matrix(outside, "outside"); });

        const SyntheticNeuron neuron =
            stage("eigenproblem", [&] { return build_synthetic_neuron(a_in, a_out); });

        // Selectivity check: predicted responses per class, rank-sum test.
        const auto responses_for = [&](const ActivationMatrix& m) {
            std::vector<double> r(m.rows());
            for (std::size_t i = 0; i < m.rows(); ++i) {
                const auto row = m.row(i);
                double y = 0.0;
                for (std::size_t j = 0; j < row.size(); ++j) y += row[j] * neuron.weights[j];
                r[i] = y;
            }
            return r;
        };
        const std::vector<double> resp_in = responses_for(a_in);
        const std::vector<double> resp_out = responses_for(a_out);
        const MannWhitneyResult mw =
            stage("selectivity-test", [&] { return mann_whitney_u(resp_in, resp_out); });

        ReadoutModel model;
        model.weights = neuron.weights;
        model.u = u;
        model.v = v;
        model.backbone = backbone;
        const std::string readout_path = tracker.track(out_path(config, "synth_readout.sfvw"));
        stage("save-readout", [&] {
            save_readout(model, readout_path);
            return 0;
        });

        if (!options.emit_responses_path.empty()) {
            stage("emit-responses", [&] {
                const std::vector<SyntheticResponse> synth = generate_synthetic_responses(
                    neuron.weights, a_in, options.noise_std, config.seed);
                ResponseManifest out_manifest;
                out_manifest.base_dir = within.base_dir;
                const std::size_t n = synth.size();
                const std::size_t n_train = std::max<std::size_t>(1, (n * 8) / 10);
                const std::size_t n_val = std::max<std::size_t>(1, n / 10);
                for (std::size_t i = 0; i < n; ++i) {
                    ManifestEntry e = within.entries[i];
                    e.response = synth[i].response;
                    e.split = i < n_train ? Split::train
                                          : (i < n_train + n_val ? Split::val : Split::test);
                    out_manifest.entries.push_back(std::move(e));
                }
                save_manifest(out_manifest, tracker.track(options.emit_responses_path));
                return 0;
            });
        }

        CommandResult result;
        Report& report = result.report;
        report.add("command", "synth-neuron");
        report.add("seed", static_cast<std::size_t>(config.seed));
        report.add("readout.u", u);
        report.add("readout.v", v);
        report.add("neuron.top_eigenvalue", neuron.top_eigenvalue);
        report.add("neuron.degenerate", neuron.degenerate);
        report.add("selectivity.n_within", resp_in.size());
        report.add("selectivity.n_outside", resp_out.size());
        report.add("selectivity.median_within", median_of(resp_in));
        report.add("selectivity.median_outside", median_of(resp_out));
        report.add("selectivity.mw_u", mw.u1);
        report.add("selectivity.mw_p", mw.p_two_sided);
        report.add("selectivity.mw_approx_unreliable", mw.approx_unreliable);
        report.add("artifact.readout", "synth_readout.sfvw");
        if (!options.emit_responses_path.empty()) {
            report.add("artifact.responses", options.emit_responses_path);
        }

        result.report_path = tracker.track(out_path(config, "selectivity_report.txt"));
        stage("report", [&] { write_text(result.report_path, report.text()); return 0; });
        return result;
    } catch (...) {
        tracker.remove_all();
        throw;
    }
}

}  // namespace sfv
