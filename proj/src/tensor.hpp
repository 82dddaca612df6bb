#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace sfv {

// Dense row-major tensor of doubles. All numerics in this project are 64-bit.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape_in, double fill = 0.0);
    static Tensor from_data(std::vector<std::size_t> shape_in,
                            std::vector<double> data_in);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // (c, y, x) accessor for rank-3 tensors.
    double& at3(std::size_t c, std::size_t y, std::size_t x) {
        return data[(c * shape[1] + y) * shape[2] + x];
    }
    double at3(std::size_t c, std::size_t y, std::size_t x) const {
        return data[(c * shape[1] + y) * shape[2] + x];
    }

    bool all_finite() const;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);
bool same_shape(const Tensor& a, const Tensor& b);

// --- Differentiable primitives -------------------------------------------

// Cross-correlation with zero padding.
// input: c_in x h x w, kernel: c_out x c_in x k x k, bias: c_out.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding);

Tensor relu(const Tensor& input);

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride);

// Bilinear interpolation of a c x h x w feature map at normalized
// location (u, v) in [0,1]^2; u indexes width, v indexes height.
std::vector<double> bilinear_sample(const Tensor& featmap, double u, double v);

// Sampled value plus analytic derivatives w.r.t. (u, v), per channel.
struct BilinearGrad {
    std::vector<double> value;
    std::vector<double> d_u;
    std::vector<double> d_v;
};
BilinearGrad bilinear_sample_with_grad(const Tensor& featmap, double u, double v);

// --- Reverse-mode tape ----------------------------------------------------

struct ConvNode {
    Tensor kernel;  // snapshot; weights are immutable during a forward pass
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::vector<std::size_t> in_shape;
    std::vector<std::size_t> out_shape;
};

struct ReluNode {
    Tensor input;  // snapshot; backward masks on the stored sign pattern
};

struct MaxPoolNode {
    std::vector<std::size_t> in_shape;
    std::vector<std::size_t> out_shape;
    // Flat input index of the winning cell per output element. Ties were
    // resolved at forward time to the first maximal element in row-major
    // order, so replay is deterministic.
    std::vector<std::size_t> argmax;
};

struct BilinearNode {
    std::vector<std::size_t> in_shape;
    double u = 0.0;
    double v = 0.0;
};

using RecordNode = std::variant<ConvNode, ReluNode, MaxPoolNode, BilinearNode>;

// Ordered trace of one forward pass. Immutable once built; safe to replay
// concurrently from multiple threads.
struct ComputationRecord {
    std::vector<RecordNode> nodes;
    std::vector<std::size_t> input_shape;
    std::vector<std::size_t> output_shape;
};

// Recording variants used by the backbone forward pass.
Tensor conv2d_rec(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                  std::size_t stride, std::size_t padding, ComputationRecord& rec);
Tensor relu_rec(const Tensor& input, ComputationRecord& rec);
Tensor maxpool2d_rec(const Tensor& input, std::size_t window, std::size_t stride,
                     ComputationRecord& rec);
std::vector<double> bilinear_sample_rec(const Tensor& featmap, double u, double v,
                                        ComputationRecord& rec);

// Exact reverse-mode adjoint of the recorded composite function.
Tensor vjp(const ComputationRecord& record, const Tensor& output_adjoint);

// Central finite differences (f(x+he) - f(x-he)) / (2h), elementwise.
Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double step);

}  // namespace sfv
