#include "manifest.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "errors.hpp"

namespace sfv {

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw Error(ErrorCode::format,
                "unknown split '" + name + "' (expected train, val or test)");
}

std::string ResponseManifest::resolve_path(const ManifestEntry& entry) const {
    std::filesystem::path p(entry.image_path);
    if (p.is_absolute() || base_dir.empty()) return entry.image_path;
    return (std::filesystem::path(base_dir) / p).string();
}

std::vector<std::size_t> ResponseManifest::split_indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].split == s) out.push_back(i);
    }
    return out;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

}  // namespace

ResponseManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open manifest '" + path + "'");
    }
    ResponseManifest manifest;
    manifest.base_dir = std::filesystem::path(path).parent_path().string();

    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> fields = split_tabs(line);
        if (fields.size() != 4) {
            throw Error(ErrorCode::format, "manifest '" + path + "' line " +
                                               std::to_string(line_no) + ": expected 4 tab-separated columns, got " +
                                               std::to_string(fields.size()));
        }
        ManifestEntry entry;
        entry.id = fields[0];
        entry.image_path = fields[1];
        if (entry.id.empty() || entry.image_path.empty()) {
            throw Error(ErrorCode::format, "manifest '" + path + "' line " +
                                               std::to_string(line_no) + ": empty id or path");
        }
        if (!seen_ids.insert(entry.id).second) {
            throw Error(ErrorCode::format, "manifest '" + path + "' line " +
                                               std::to_string(line_no) + ": duplicate stimulus id '" +
                                               entry.id + "'");
        }
        char* end = nullptr;
        entry.response = std::strtod(fields[2].c_str(), &end);
        if (end == fields[2].c_str() || *end != '\0') {
            throw Error(ErrorCode::format, "manifest '" + path + "' line " +
                                               std::to_string(line_no) + ": bad response '" +
                                               fields[2] + "'");
        }
        entry.split = split_from_name(fields[3]);
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void save_manifest(const ResponseManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
    }
    for (const auto& e : manifest.entries) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", e.response);
        out << e.id << '\t' << e.image_path << '\t' << buf << '\t' << split_name(e.split)
            << '\n';
    }
    out.flush();
    if (!out) {
        throw Error(ErrorCode::io, "write failed for '" + path + "'");
    }
}

}  // namespace sfv
