#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "readout.hpp"
#include "saliency.hpp"

namespace sfv {

// Run configuration, loaded from a JSON file. Paths inside the file resolve
// relative to the file's directory; out_dir is used as given.
struct PipelineConfig {
    std::string backbone_weights;
    std::string within_manifest;
    std::string outside_manifest;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::optional<std::size_t> input_size;  // must match the backbone when set
    std::size_t top_k = 5;
    std::size_t within_top_k = 0;  // 0: consider every within-category image
    double significance_alpha = 0.05;
    TrainConfig train;
    AttributionConfig attribution;

    void validate() const;
};

PipelineConfig load_pipeline_config(const std::string& path);

}  // namespace sfv
