#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace sfv {

Tensor::Tensor(std::vector<std::size_t> shape_in, double fill)
    : shape(std::move(shape_in)) {
    for (std::size_t d : shape) {
        if (d == 0) {
            throw Error(ErrorCode::shape, "tensor dimension must be positive, got shape " +
                                              shape_str(shape));
        }
    }
    data.assign(shape_size(shape), fill);
}

Tensor Tensor::from_data(std::vector<std::size_t> shape_in, std::vector<double> data_in) {
    Tensor t;
    t.shape = std::move(shape_in);
    t.data = std::move(data_in);
    if (shape_size(t.shape) != t.data.size()) {
        throw Error(ErrorCode::shape,
                    "tensor data length " + std::to_string(t.data.size()) +
                        " does not match shape " + shape_str(t.shape));
    }
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

namespace {

struct ConvDims {
    std::size_t c_in, h, w;
    std::size_t c_out, k;
    std::size_t h_out, w_out;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                   std::size_t stride, std::size_t padding) {
    if (input.rank() != 3) {
        throw Error(ErrorCode::shape,
                    "conv2d input must be rank 3 (c,h,w), got " + shape_str(input.shape));
    }
    if (kernel.rank() != 4) {
        throw Error(ErrorCode::shape, "conv2d kernel must be rank 4 (c_out,c_in,k,k), got " +
                                          shape_str(kernel.shape));
    }
    ConvDims d;
    d.c_in = input.shape[0];
    d.h = input.shape[1];
    d.w = input.shape[2];
    d.c_out = kernel.shape[0];
    d.k = kernel.shape[2];
    if (kernel.shape[3] != d.k) {
        throw Error(ErrorCode::shape,
                    "conv2d kernel must be square, got " + shape_str(kernel.shape));
    }
    if (kernel.shape[1] != d.c_in) {
        throw Error(ErrorCode::shape, "conv2d channel mismatch: input has " +
                                          std::to_string(d.c_in) + " channels, kernel expects " +
                                          std::to_string(kernel.shape[1]));
    }
    if (bias.rank() != 1 || bias.shape[0] != d.c_out) {
        throw Error(ErrorCode::shape, "conv2d bias must have shape [" +
                                          std::to_string(d.c_out) + "], got " +
                                          shape_str(bias.shape));
    }
    if (stride == 0) {
        throw Error(ErrorCode::invalid_argument, "conv2d stride must be positive");
    }
    if (d.k > d.h + 2 * padding || d.k > d.w + 2 * padding) {
        throw Error(ErrorCode::shape, "conv2d kernel size " + std::to_string(d.k) +
                                          " exceeds padded input " +
                                          std::to_string(d.h + 2 * padding) + "x" +
                                          std::to_string(d.w + 2 * padding));
    }
    d.h_out = (d.h + 2 * padding - d.k) / stride + 1;
    d.w_out = (d.w + 2 * padding - d.k) / stride + 1;
    return d;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
    const ConvDims d = conv_dims(input, kernel, bias, stride, padding);
    Tensor out({d.c_out, d.h_out, d.w_out});

    const double* in = input.data.data();
    const double* ker = kernel.data.data();
    double* dst = out.data.data();

    const std::size_t in_plane = d.h * d.w;
    const std::size_t ker_plane = d.k * d.k;
    const std::size_t ker_block = d.c_in * ker_plane;

    const auto clip_lo = [](long i0) -> std::size_t {
        return i0 < 0 ? static_cast<std::size_t>(-i0) : 0;
    };
    const auto clip_hi = [](long i0, std::size_t k, std::size_t extent) -> std::size_t {
        const long hi = std::min<long>(static_cast<long>(k), static_cast<long>(extent) - i0);
        return hi < 0 ? 0 : static_cast<std::size_t>(hi);
    };

    for (std::size_t co = 0; co < d.c_out; ++co) {
        const double b = bias.data[co];
        for (std::size_t oy = 0; oy < d.h_out; ++oy) {
            // Input row range covered by this output row, clipped to bounds.
            const long iy0 = static_cast<long>(oy * stride) - static_cast<long>(padding);
            const std::size_t ky_lo = clip_lo(iy0);
            const std::size_t ky_hi = clip_hi(iy0, d.k, d.h);
            for (std::size_t ox = 0; ox < d.w_out; ++ox) {
                const long ix0 = static_cast<long>(ox * stride) - static_cast<long>(padding);
                const std::size_t kx_lo = clip_lo(ix0);
                const std::size_t kx_hi = clip_hi(ix0, d.k, d.w);
                double acc = b;
                for (std::size_t ci = 0; ci < d.c_in; ++ci) {
                    const double* in_c = in + ci * in_plane;
                    const double* ker_c = ker + co * ker_block + ci * ker_plane;
                    for (std::size_t ky = ky_lo; ky < ky_hi; ++ky) {
                        const std::size_t iy = static_cast<std::size_t>(iy0 + static_cast<long>(ky));
                        const double* in_row = in_c + iy * d.w + static_cast<std::size_t>(ix0 + static_cast<long>(kx_lo));
                        const double* ker_row = ker_c + ky * d.k + kx_lo;
                        for (std::size_t kx = kx_lo; kx < kx_hi; ++kx) {
                            acc += *in_row++ * *ker_row++;
                        }
                    }
                }
                *dst++ = acc;
            }
        }
    }
    return out;
}

namespace {

Tensor conv2d_backward_input(const ConvNode& node, const Tensor& d_out) {
    const std::size_t c_in = node.in_shape[0];
    const std::size_t h = node.in_shape[1];
    const std::size_t w = node.in_shape[2];
    const std::size_t c_out = node.out_shape[0];
    const std::size_t h_out = node.out_shape[1];
    const std::size_t w_out = node.out_shape[2];
    const std::size_t k = node.kernel.shape[2];

    Tensor d_in(node.in_shape);
    const double* ker = node.kernel.data.data();
    const double* g = d_out.data.data();
    double* dst = d_in.data.data();

    const std::size_t in_plane = h * w;
    const std::size_t ker_plane = k * k;
    const std::size_t ker_block = c_in * ker_plane;

    for (std::size_t co = 0; co < c_out; ++co) {
        for (std::size_t oy = 0; oy < h_out; ++oy) {
            const long iy0 = static_cast<long>(oy * node.stride) - static_cast<long>(node.padding);
            for (std::size_t ox = 0; ox < w_out; ++ox) {
                const long ix0 = static_cast<long>(ox * node.stride) - static_cast<long>(node.padding);
                const double go = g[(co * h_out + oy) * w_out + ox];
                if (go == 0.0) continue;
                for (std::size_t ci = 0; ci < c_in; ++ci) {
                    double* din_c = dst + ci * in_plane;
                    const double* ker_c = ker + co * ker_block + ci * ker_plane;
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const long iy = iy0 + static_cast<long>(ky);
                        if (iy < 0 || iy >= static_cast<long>(h)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long ix = ix0 + static_cast<long>(kx);
                            if (ix < 0 || ix >= static_cast<long>(w)) continue;
                            din_c[static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix)] +=
                                ker_c[ky * k + kx] * go;
                        }
                    }
                }
            }
        }
    }
    return d_in;
}

}  // namespace

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
    ComputationRecord dummy;
    return maxpool2d_rec(input, window, stride, dummy);
}

namespace {

void check_location(double u, double v) {
    if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::domain, "bilinear_sample location (" + std::to_string(u) + ", " +
                                           std::to_string(v) + ") outside [0,1]^2");
    }
}

struct BilinearCells {
    std::size_t x0, x1, y0, y1;
    double tx, ty;      // fractional weights toward x1/y1
    double sx, sy;      // d(grid coordinate)/d(u or v)
};

BilinearCells bilinear_cells_hw(std::size_t h, std::size_t w, double u, double v) {
    check_location(u, v);
    BilinearCells c;
    c.sx = static_cast<double>(w - 1);
    c.sy = static_cast<double>(h - 1);
    const double gx = u * c.sx;
    const double gy = v * c.sy;
    c.x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), w > 1 ? w - 2 : 0);
    c.y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), h > 1 ? h - 2 : 0);
    c.x1 = w > 1 ? c.x0 + 1 : c.x0;
    c.y1 = h > 1 ? c.y0 + 1 : c.y0;
    c.tx = gx - static_cast<double>(c.x0);
    c.ty = gy - static_cast<double>(c.y0);
    return c;
}

BilinearCells bilinear_cells(const Tensor& featmap, double u, double v) {
    if (featmap.rank() != 3) {
        throw Error(ErrorCode::shape, "bilinear_sample expects a rank-3 feature map, got " +
                                          shape_str(featmap.shape));
    }
    return bilinear_cells_hw(featmap.shape[1], featmap.shape[2], u, v);
}

}  // namespace

std::vector<double> bilinear_sample(const Tensor& featmap, double u, double v) {
    const BilinearCells c = bilinear_cells(featmap, u, v);
    const std::size_t ch = featmap.shape[0];
    std::vector<double> out(ch);
    for (std::size_t i = 0; i < ch; ++i) {
        const double f00 = featmap.at3(i, c.y0, c.x0);
        const double f01 = featmap.at3(i, c.y0, c.x1);
        const double f10 = featmap.at3(i, c.y1, c.x0);
        const double f11 = featmap.at3(i, c.y1, c.x1);
        out[i] = (1.0 - c.ty) * ((1.0 - c.tx) * f00 + c.tx * f01) +
                 c.ty * ((1.0 - c.tx) * f10 + c.tx * f11);
    }
    return out;
}

BilinearGrad bilinear_sample_with_grad(const Tensor& featmap, double u, double v) {
    const BilinearCells c = bilinear_cells(featmap, u, v);
    const std::size_t ch = featmap.shape[0];
    BilinearGrad g;
    g.value.resize(ch);
    g.d_u.resize(ch);
    g.d_v.resize(ch);
    for (std::size_t i = 0; i < ch; ++i) {
        const double f00 = featmap.at3(i, c.y0, c.x0);
        const double f01 = featmap.at3(i, c.y0, c.x1);
        const double f10 = featmap.at3(i, c.y1, c.x0);
        const double f11 = featmap.at3(i, c.y1, c.x1);
        g.value[i] = (1.0 - c.ty) * ((1.0 - c.tx) * f00 + c.tx * f01) +
                     c.ty * ((1.0 - c.tx) * f10 + c.tx * f11);
        const double d_gx = (1.0 - c.ty) * (f01 - f00) + c.ty * (f11 - f10);
        const double d_gy = (1.0 - c.tx) * (f10 - f00) + c.tx * (f11 - f01);
        g.d_u[i] = d_gx * c.sx;
        g.d_v[i] = d_gy * c.sy;
    }
    return g;
}

Tensor conv2d_rec(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                  std::size_t stride, std::size_t padding, ComputationRecord& rec) {
    Tensor out = conv2d(input, kernel, bias, stride, padding);
    ConvNode node;
    node.kernel = kernel;
    node.stride = stride;
    node.padding = padding;
    node.in_shape = input.shape;
    node.out_shape = out.shape;
    if (rec.nodes.empty()) rec.input_shape = input.shape;
    rec.output_shape = out.shape;
    rec.nodes.push_back(std::move(node));
    return out;
}

Tensor relu_rec(const Tensor& input, ComputationRecord& rec) {
    Tensor out = relu(input);
    ReluNode node;
    node.input = input;
    if (rec.nodes.empty()) rec.input_shape = input.shape;
    rec.output_shape = out.shape;
    rec.nodes.push_back(std::move(node));
    return out;
}

Tensor maxpool2d_rec(const Tensor& input, std::size_t window, std::size_t stride,
                     ComputationRecord& rec) {
    if (input.rank() != 3) {
        throw Error(ErrorCode::shape, "maxpool2d input must be rank 3 (c,h,w), got " +
                                          shape_str(input.shape));
    }
    if (window == 0 || stride == 0) {
        throw Error(ErrorCode::invalid_argument, "maxpool2d window and stride must be positive");
    }
    const std::size_t c = input.shape[0];
    const std::size_t h = input.shape[1];
    const std::size_t w = input.shape[2];
    if (window > h || window > w) {
        throw Error(ErrorCode::shape, "maxpool2d window " + std::to_string(window) +
                                          " larger than spatial extent " + std::to_string(h) +
                                          "x" + std::to_string(w));
    }
    const std::size_t h_out = (h - window) / stride + 1;
    const std::size_t w_out = (w - window) / stride + 1;

    Tensor out({c, h_out, w_out});
    MaxPoolNode node;
    node.in_shape = input.shape;
    node.out_shape = out.shape;
    node.argmax.resize(out.size());

    const double* in = input.data.data();
    std::size_t o = 0;
    for (std::size_t ci = 0; ci < c; ++ci) {
        const std::size_t base = ci * h * w;
        for (std::size_t oy = 0; oy < h_out; ++oy) {
            for (std::size_t ox = 0; ox < w_out; ++ox) {
                const std::size_t y0 = oy * stride;
                const std::size_t x0 = ox * stride;
                double best = in[base + y0 * w + x0];
                std::size_t best_idx = base + y0 * w + x0;
                for (std::size_t dy = 0; dy < window; ++dy) {
                    for (std::size_t dx = 0; dx < window; ++dx) {
                        const std::size_t idx = base + (y0 + dy) * w + (x0 + dx);
                        if (in[idx] > best) {  // strict: first maximum wins
                            best = in[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.data[o] = best;
                node.argmax[o] = best_idx;
                ++o;
            }
        }
    }
    if (rec.nodes.empty()) rec.input_shape = input.shape;
    rec.output_shape = out.shape;
    rec.nodes.push_back(std::move(node));
    return out;
}

std::vector<double> bilinear_sample_rec(const Tensor& featmap, double u, double v,
                                        ComputationRecord& rec) {
    std::vector<double> out = bilinear_sample(featmap, u, v);
    BilinearNode node;
    node.in_shape = featmap.shape;
    node.u = u;
    node.v = v;
    if (rec.nodes.empty()) rec.input_shape = featmap.shape;
    rec.output_shape = {out.size()};
    rec.nodes.push_back(std::move(node));
    return out;
}

namespace {

struct BackwardVisitor {
    const Tensor& grad_out;

    Tensor operator()(const ConvNode& n) const { return conv2d_backward_input(n, grad_out); }

    Tensor operator()(const ReluNode& n) const {
        Tensor g = grad_out;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (n.input.data[i] <= 0.0) g.data[i] = 0.0;
        }
        return g;
    }

    Tensor operator()(const MaxPoolNode& n) const {
        Tensor g(n.in_shape);
        for (std::size_t i = 0; i < grad_out.size(); ++i) {
            g.data[n.argmax[i]] += grad_out.data[i];
        }
        return g;
    }

    Tensor operator()(const BilinearNode& n) const {
        const BilinearCells c = bilinear_cells_hw(n.in_shape[1], n.in_shape[2], n.u, n.v);
        Tensor g(n.in_shape);
        const std::size_t ch = n.in_shape[0];
        for (std::size_t i = 0; i < ch; ++i) {
            const double go = grad_out.data[i];
            g.at3(i, c.y0, c.x0) += (1.0 - c.ty) * (1.0 - c.tx) * go;
            g.at3(i, c.y0, c.x1) += (1.0 - c.ty) * c.tx * go;
            g.at3(i, c.y1, c.x0) += c.ty * (1.0 - c.tx) * go;
            g.at3(i, c.y1, c.x1) += c.ty * c.tx * go;
        }
        return g;
    }
};

std::vector<std::size_t> node_out_shape(const RecordNode& node) {
    if (const auto* c = std::get_if<ConvNode>(&node)) return c->out_shape;
    if (const auto* r = std::get_if<ReluNode>(&node)) return r->input.shape;
    if (const auto* m = std::get_if<MaxPoolNode>(&node)) return m->out_shape;
    const auto& b = std::get<BilinearNode>(node);
    return {b.in_shape[0]};
}

}  // namespace

Tensor vjp(const ComputationRecord& record, const Tensor& output_adjoint) {
    if (record.nodes.empty()) {
        throw Error(ErrorCode::invalid_argument, "vjp on an empty computation record");
    }
    if (output_adjoint.shape != record.output_shape) {
        throw Error(ErrorCode::shape, "vjp adjoint shape " + shape_str(output_adjoint.shape) +
                                          " does not match recorded output " +
                                          shape_str(record.output_shape));
    }
    Tensor g = output_adjoint;
    for (auto it = record.nodes.rbegin(); it != record.nodes.rend(); ++it) {
        if (g.shape != node_out_shape(*it)) {
            throw Error(ErrorCode::shape, "vjp internal shape mismatch at node");
        }
        g = std::visit(BackwardVisitor{g}, *it);
    }
    return g;
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f, const Tensor& x,
                   double step) {
    if (!(step > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "finite_diff step must be positive");
    }
    Tensor grad(x.shape);
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe.data[i];
        probe.data[i] = orig + step;
        const double fp = f(probe);
        probe.data[i] = orig - step;
        const double fm = f(probe);
        probe.data[i] = orig;
        grad.data[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

}  // namespace sfv
