#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tensor.hpp"

namespace sfv {

// Portable named-tensor store. File layout:
//   bytes 0..3   magic "SFVW"
//   bytes 4..7   header length L, unsigned 32-bit little-endian
//   bytes 8..8+L UTF-8 header, one entry per line:
//                  <name> <ndim> <d0> ... <dk> <offset>
//                where <offset> is the byte offset of the tensor's values
//                relative to the start of the payload (byte 8+L)
//   remainder    raw IEEE-754 float64 little-endian values
struct NamedTensor {
    std::string name;
    Tensor value;
};

struct WeightContainer {
    std::vector<NamedTensor> tensors;

    void add(std::string name, Tensor value);
    const Tensor* find(std::string_view name) const;
    const Tensor& require(std::string_view name) const;
    double scalar(std::string_view name) const;
};

WeightContainer load_container(const std::string& path);
void save_container(const WeightContainer& container, const std::string& path);

}  // namespace sfv
