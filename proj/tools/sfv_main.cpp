// Command-line front end. Talks to the core exclusively through the C API in
// sfv/sfv.h.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sfv/sfv.h"

namespace {

constexpr std::size_t kSummaryLen = 1 << 16;

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;
    std::int64_t seed = -1;
    bool has_seed = false;
};

class ConfigHandle {
public:
    ~ConfigHandle() { sfv_config_free(handle_); }

    sfv_status open(const GlobalOptions& opts) {
        if (opts.config_path.empty()) {
            std::fprintf(stderr, "error: this command requires --config <path>\n");
            return SFV_ERR_INVALID_ARGUMENT;
        }
        sfv_status status = sfv_config_load(opts.config_path.c_str(), &handle_);
        if (status != SFV_OK) return status;
        if (opts.has_seed) {
            status = sfv_config_set_seed(handle_, static_cast<std::uint64_t>(opts.seed));
            if (status != SFV_OK) return status;
        }
        if (!opts.out_dir.empty()) {
            status = sfv_config_set_out_dir(handle_, opts.out_dir.c_str());
            if (status != SFV_OK) return status;
        }
        return SFV_OK;
    }

    const sfv_config* get() const { return handle_; }

private:
    sfv_config* handle_ = nullptr;
};

int finish(sfv_status status, const std::vector<char>& summary) {
    if (status == SFV_OK) {
        std::fputs(summary.data(), stdout);
        return 0;
    }
    std::fprintf(stderr, "error [%s]: %s\n", sfv_status_name(status), sfv_last_error());
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shared-feature visualization for model neurons"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--config", global.config_path, "path to the JSON run configuration");
    auto* seed_opt =
        app.add_option("--seed", global.seed, "override the run and training seed");
    app.add_option("--out", global.out_dir, "override the output directory");

    auto* fit = app.add_subcommand("fit", "train the readout on the within-category set");

    auto* eval = app.add_subcommand("eval", "held-out correlation for a stored readout");
    std::string eval_readout;
    eval->add_option("--readout", eval_readout, "path to a stored readout container")
        ->required();

    auto* select = app.add_subcommand("select-reference",
                                      "most similar within-category image for a query");
    std::string select_readout, select_query;
    select->add_option("--readout", select_readout, "path to a stored readout container")
        ->required();
    select->add_option("--query", select_query, "stimulus id from the outside manifest, or an image path")
        ->required();

    auto* visualize =
        app.add_subcommand("visualize", "run the full pipeline and render saliency pairs");
    std::string vis_readout, vis_outside, vis_within;
    visualize->add_option("--readout", vis_readout,
                          "reuse a stored readout instead of fitting");
    visualize->add_option("--outside", vis_outside,
                          "use this outside stimulus id instead of the top activator");
    visualize->add_option("--within", vis_within,
                          "use this within stimulus id instead of the most similar one");

    auto* synth = app.add_subcommand("synth-neuron",
                                     "build a category-selective readout from two image sets");
    std::string synth_within, synth_outside, synth_emit;
    double synth_noise = 0.0;
    synth->add_option("--within-manifest", synth_within, "within-category manifest")
        ->required();
    synth->add_option("--outside-manifest", synth_outside, "out-of-category manifest")
        ->required();
    synth->add_option("--noise-std", synth_noise,
                      "stddev of the noise added to emitted responses");
    synth->add_option("--emit-responses", synth_emit,
                      "write a manifest with synthetic responses to this path");

    auto* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference validation of all gradients");
    std::size_t gc_seeds = 20;
    std::int64_t gc_base_seed = 1;
    gradcheck->add_option("--seeds", gc_seeds, "number of random seeds per check");
    gradcheck->add_option("--base-seed", gc_base_seed, "first seed value");

    CLI11_PARSE(app, argc, argv);
    global.has_seed = seed_opt->count() > 0;

    std::vector<char> summary(kSummaryLen, '\0');

    if (gradcheck->parsed()) {
        const std::uint64_t base = global.has_seed ? static_cast<std::uint64_t>(global.seed)
                                                   : static_cast<std::uint64_t>(gc_base_seed);
        const sfv_status status =
            sfv_cmd_gradcheck(gc_seeds, base, summary.data(), summary.size());
        // gradcheck reports its lines even on failure
        std::fputs(summary.data(), stdout);
        if (status != SFV_OK) {
            std::fprintf(stderr, "error [%s]: %s\n", sfv_status_name(status),
                         sfv_last_error());
            return static_cast<int>(status);
        }
        return 0;
    }

    ConfigHandle config;
    const sfv_status cfg_status = config.open(global);
    if (cfg_status != SFV_OK) {
        if (cfg_status != SFV_ERR_INVALID_ARGUMENT || !global.config_path.empty()) {
            std::fprintf(stderr, "error [%s]: %s\n", sfv_status_name(cfg_status),
                         sfv_last_error());
        }
        return static_cast<int>(cfg_status);
    }

    sfv_status status = SFV_ERR_INVALID_ARGUMENT;
    if (fit->parsed()) {
        status = sfv_cmd_fit(config.get(), summary.data(), summary.size());
    } else if (eval->parsed()) {
        status = sfv_cmd_eval(config.get(), eval_readout.c_str(), summary.data(),
                              summary.size());
    } else if (select->parsed()) {
        status = sfv_cmd_select_reference(config.get(), select_readout.c_str(),
                                          select_query.c_str(), summary.data(),
                                          summary.size());
    } else if (visualize->parsed()) {
        status = sfv_cmd_visualize(config.get(),
                                   vis_readout.empty() ? nullptr : vis_readout.c_str(),
                                   vis_outside.empty() ? nullptr : vis_outside.c_str(),
                                   vis_within.empty() ? nullptr : vis_within.c_str(),
                                   summary.data(), summary.size());
    } else if (synth->parsed()) {
        status = sfv_cmd_synth_neuron(config.get(), synth_within.c_str(),
                                      synth_outside.c_str(), synth_noise,
                                      synth_emit.empty() ? nullptr : synth_emit.c_str(),
                                      summary.data(), summary.size());
    }
    return finish(status, summary);
}
