#pragma once

#include <string>
#include <utility>
#include <vector>

#include "config.hpp"

namespace sfv {

// Deterministic double formatting used by every report and log writer; the
// 17 significant digits round-trip exactly, so identical runs produce
// identical bytes.
std::string fmt_g17(double v);

// Ordered key=value report, one pair per line.
class Report {
public:
    void add(const std::string& key, const std::string& value);
    void add(const std::string& key, const char* value);
    void add(const std::string& key, double value);
    void add(const std::string& key, std::size_t value);
    void add(const std::string& key, bool value);

    const std::vector<std::pair<std::string, std::string>>& fields() const {
        return fields_;
    }
    std::string text() const;
    const std::string* find(const std::string& key) const;

private:
    std::vector<std::pair<std::string, std::string>> fields_;
};

struct CommandResult {
    Report report;
    std::string report_path;
};

// fit: trains the readout on the within-category manifest and stores the
// model, the per-epoch log and a summary report in out_dir.
CommandResult cmd_fit(const PipelineConfig& config);

// eval: held-out test-split correlation for a stored readout.
CommandResult cmd_eval(const PipelineConfig& config, const std::string& readout_path);

// select-reference: most similar within-category image for a query, where
// query is a stimulus id from the outside manifest or a path to a P6 image.
CommandResult cmd_select_reference(const PipelineConfig& config,
                                   const std::string& readout_path,
                                   const std::string& query);

struct VisualizeOptions {
    std::string readout_path;  // skip the fit stage and load this readout
    std::string outside_id;    // skip the top-k stage and use this driver
    std::string within_id;     // skip reference selection and use this image
};

// visualize: the full pipeline. Fits (or loads) the readout, finds the top
// out-of-category driver, selects the most similar within-category reference,
// computes the paired saliency maps and renders every artifact. Any stage
// failure removes partial outputs and reports the stage name.
CommandResult cmd_visualize(const PipelineConfig& config,
                            const VisualizeOptions& options = {});

struct SynthNeuronOptions {
    std::string within_manifest;
    std::string outside_manifest;
    double noise_std = 0.0;
    std::string emit_responses_path;  // optional synthetic manifest output
};

// synth-neuron: builds a category-selective readout from two image sets via
// the difference-matrix eigenproblem and reports its selectivity.
CommandResult cmd_synth_neuron(const PipelineConfig& config,
                               const SynthNeuronOptions& options);

}  // namespace sfv
