#pragma once

#include <string>
#include <vector>

namespace sfv {

enum class Split { train, val, test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct ManifestEntry {
    std::string id;
    std::string image_path;  // relative to the manifest's directory
    double response = 0.0;
    Split split = Split::train;
};

// Stimulus list with recorded (or synthetic) responses and split labels.
// On-disk format: UTF-8 lines of tab-separated
//   stimulus_id <TAB> relative_image_path <TAB> response <TAB> split
// Lines starting with '#' and blank lines are ignored.
struct ResponseManifest {
    std::vector<ManifestEntry> entries;
    std::string base_dir;  // directory the image paths resolve against

    std::string resolve_path(const ManifestEntry& entry) const;
    std::vector<std::size_t> split_indices(Split s) const;
};

ResponseManifest load_manifest(const std::string& path);
void save_manifest(const ResponseManifest& manifest, const std::string& path);

}  // namespace sfv
