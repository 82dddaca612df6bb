#include "container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight container I/O assumes a little-endian host");

namespace sfv {

namespace {

constexpr char kMagic[4] = {'S', 'F', 'V', 'W'};

bool valid_name(const std::string& name) {
    if (name.empty()) return false;
    for (char ch : name) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') return false;
    }
    return true;
}

}  // namespace

void WeightContainer::add(std::string name, Tensor value) {
    if (!valid_name(name)) {
        throw Error(ErrorCode::invalid_argument,
                    "tensor name must be non-empty and contain no whitespace: '" + name + "'");
    }
    if (find(name) != nullptr) {
        throw Error(ErrorCode::invalid_argument, "duplicate tensor name '" + name + "'");
    }
    tensors.push_back({std::move(name), std::move(value)});
}

const Tensor* WeightContainer::find(std::string_view name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t.value;
    }
    return nullptr;
}

const Tensor& WeightContainer::require(std::string_view name) const {
    const Tensor* t = find(name);
    if (!t) {
        throw Error(ErrorCode::format,
                    "container is missing required tensor '" + std::string(name) + "'");
    }
    return *t;
}

double WeightContainer::scalar(std::string_view name) const {
    const Tensor& t = require(name);
    if (t.size() != 1) {
        throw Error(ErrorCode::format, "tensor '" + std::string(name) +
                                           "' expected to be a scalar, has shape " +
                                           shape_str(t.shape));
    }
    return t.data[0];
}

void save_container(const WeightContainer& container, const std::string& path) {
    std::ostringstream header;
    std::size_t offset = 0;
    for (const auto& t : container.tensors) {
        header << t.name << ' ' << t.value.rank();
        for (std::size_t d : t.value.shape) header << ' ' << d;
        header << ' ' << offset << '\n';
        offset += t.value.size() * sizeof(double);
    }
    const std::string header_text = header.str();
    if (header_text.size() > 0xffffffffull) {
        throw Error(ErrorCode::invalid_argument, "container header too large");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
    }
    out.write(kMagic, 4);
    const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& t : container.tensors) {
        out.write(reinterpret_cast<const char*>(t.value.data.data()),
                  static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    }
    out.flush();
    if (!out) {
        throw Error(ErrorCode::io, "write failed for '" + path + "'");
    }
}

WeightContainer load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open '" + path + "' for reading");
    }
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 8) {
        throw Error(ErrorCode::format, "container file too short for magic and header length");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error(ErrorCode::format, "bad magic: expected 'SFVW'");
    }
    std::uint32_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + 4, 4);
    if (bytes.size() < 8ull + header_len) {
        throw Error(ErrorCode::format, "truncated header: declared " +
                                           std::to_string(header_len) + " bytes, file has " +
                                           std::to_string(bytes.size() - 8));
    }
    const std::string header_text = bytes.substr(8, header_len);
    const char* payload = bytes.data() + 8 + header_len;
    const std::size_t payload_len = bytes.size() - 8 - header_len;

    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t offset;
        std::size_t nbytes;
    };
    std::vector<Entry> entries;

    std::istringstream header(header_text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(header, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Entry e;
        std::size_t ndim = 0;
        if (!(ls >> e.name >> ndim)) {
            throw Error(ErrorCode::format,
                        "malformed header entry at line " + std::to_string(line_no));
        }
        if (ndim > 8) {
            throw Error(ErrorCode::format, "tensor '" + e.name + "' declares " +
                                               std::to_string(ndim) + " dims (max 8)");
        }
        e.shape.resize(ndim);
        std::size_t numel = 1;
        for (std::size_t i = 0; i < ndim; ++i) {
            if (!(ls >> e.shape[i]) || e.shape[i] == 0) {
                throw Error(ErrorCode::format,
                            "bad dimension in header entry for '" + e.name + "'");
            }
            numel *= e.shape[i];
        }
        if (!(ls >> e.offset)) {
            throw Error(ErrorCode::format, "missing offset in header entry for '" + e.name + "'");
        }
        std::string extra;
        if (ls >> extra) {
            throw Error(ErrorCode::format,
                        "trailing tokens in header entry for '" + e.name + "'");
        }
        e.nbytes = numel * sizeof(double);
        if (e.offset + e.nbytes > payload_len) {
            throw Error(ErrorCode::format, "truncated payload: tensor '" + e.name + "' needs bytes [" +
                                               std::to_string(e.offset) + ", " +
                                               std::to_string(e.offset + e.nbytes) +
                                               ") but payload has " + std::to_string(payload_len));
        }
        entries.push_back(std::move(e));
    }

    // Reject overlapping payload ranges.
    std::vector<const Entry*> sorted;
    sorted.reserve(entries.size());
    for (const auto& e : entries) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const Entry* a, const Entry* b) { return a->offset < b->offset; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i - 1]->offset + sorted[i - 1]->nbytes > sorted[i]->offset) {
            throw Error(ErrorCode::format, "overlapping payload ranges for tensors '" +
                                               sorted[i - 1]->name + "' and '" + sorted[i]->name +
                                               "'");
        }
    }

    WeightContainer container;
    for (const auto& e : entries) {
        std::vector<double> values(e.nbytes / sizeof(double));
        std::memcpy(values.data(), payload + e.offset, e.nbytes);
        container.add(e.name, Tensor::from_data(e.shape, std::move(values)));
    }
    return container;
}

}  // namespace sfv
