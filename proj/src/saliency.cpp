#include "saliency.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <thread>

#include "errors.hpp"

namespace sfv {

void AttributionConfig::validate() const {
    if (ig_steps < 1) {
        throw Error(ErrorCode::invalid_argument, "ig_steps must be at least 1");
    }
    if (!(smoothing_sigma >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "smoothing_sigma must be nonnegative");
    }
    if (!(norm_floor >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "norm_floor must be nonnegative");
    }
}

Tensor gaussian_smooth(const Tensor& map, double sigma) {
    if (map.rank() != 2) {
        throw Error(ErrorCode::shape, "gaussian_smooth expects a rank-2 map, got " +
                                          shape_str(map.shape));
    }
    if (!(sigma >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "sigma must be nonnegative");
    }
    if (sigma == 0.0) return map;

    const long radius = static_cast<long>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double k = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = k;
        sum += k;
    }
    for (double& k : kernel) k /= sum;

    const long h = static_cast<long>(map.shape[0]);
    const long w = static_cast<long>(map.shape[1]);

    // Separable passes, zero padding outside the map.
    Tensor horizontal(map.shape);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            const long lo = std::max<long>(-radius, -x);
            const long hi = std::min<long>(radius, w - 1 - x);
            for (long i = lo; i <= hi; ++i) {
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       map.data[static_cast<std::size_t>(y * w + x + i)];
            }
            horizontal.data[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    Tensor out(map.shape);
    for (long y = 0; y < h; ++y) {
        const long lo = std::max<long>(-radius, -y);
        const long hi = std::min<long>(radius, h - 1 - y);
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            for (long i = lo; i <= hi; ++i) {
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       horizontal.data[static_cast<std::size_t>((y + i) * w + x)];
            }
            out.data[static_cast<std::size_t>(y * w + x)] = acc;
        }
    }
    return out;
}

Tensor simple_gradient_map(const ReadoutModel& model, const Tensor& image) {
    if (!model.backbone) {
        throw Error(ErrorCode::invalid_argument, "readout model has no backbone");
    }
    FeatureResult fr = extract_features_at(*model.backbone, image, model.u, model.v);
    if (fr.features.size() != model.weights.size()) {
        throw Error(ErrorCode::shape, "weight length does not match feature dimension");
    }
    Tensor adjoint = Tensor::from_data(
        {model.weights.size()},
        std::vector<double>(model.weights.begin(), model.weights.end()));
    return vjp(fr.record, adjoint);
}

namespace {

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t n_threads =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        workers.emplace_back([&, t]() {
            try {
                for (std::size_t i = t; i < n; i += n_threads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& worker : workers) worker.join();
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
}

// Raw attribution rows (|indices| x 3 x h x w) for one image at a fixed
// readout location, per the configured backbone method.
Tensor attribution_rows(const BackboneModel& backbone, const Tensor& image, double u,
                        double v, const AttributionConfig& config,
                        const std::vector<std::size_t>& indices) {
    if (config.method == AttributionMethod::vanilla) {
        return jacobian_rows_at(backbone, image, u, v, indices);
    }
    return integrated_gradients_rows_at(backbone, image, u, v, config.ig_steps, indices);
}

struct ProcessedRows {
    Tensor rows;  // |indices| x h x w
    std::vector<std::uint8_t> degenerate;
};

// Collapse color channels by summation, smooth, then normalize to unit L2.
ProcessedRows process_rows(const Tensor& raw, const AttributionConfig& config) {
    const std::size_t n = raw.shape[0];
    const std::size_t h = raw.shape[2];
    const std::size_t w = raw.shape[3];
    ProcessedRows out;
    out.rows = Tensor({n, h, w});
    out.degenerate.assign(n, 0);

    parallel_for(n, [&](std::size_t r) {
        Tensor collapsed({h, w});
        const std::size_t plane = h * w;
        const double* src = raw.data.data() + r * 3 * plane;
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t i = 0; i < plane; ++i) {
                collapsed.data[i] += src[c * plane + i];
            }
        }
        Tensor smoothed = gaussian_smooth(collapsed, config.smoothing_sigma);
        double norm = 0.0;
        for (double vv : smoothed.data) norm += vv * vv;
        norm = std::sqrt(norm);
        double* dst = out.rows.data.data() + r * plane;
        if (norm < config.norm_floor) {
            out.degenerate[r] = 1;  // leave the row identically zero
        } else {
            for (std::size_t i = 0; i < plane; ++i) dst[i] = smoothed.data[i] / norm;
        }
    });
    return out;
}

double l2_norm(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.data) acc += v * v;
    return std::sqrt(acc);
}

}  // namespace

Tensor integrated_gradients_rows_at(const BackboneModel& model, const Tensor& image,
                                    double u, double v, std::size_t m,
                                    const std::vector<std::size_t>& feature_indices) {
    if (m < 1) {
        throw Error(ErrorCode::invalid_argument, "integrated gradients require m >= 1");
    }
    if (feature_indices.empty()) {
        throw Error(ErrorCode::invalid_argument,
                    "integrated_gradients_rows needs at least one feature index");
    }
    const std::size_t h = image.shape[1];
    const std::size_t w = image.shape[2];
    Tensor rows({feature_indices.size(), 3, h, w});
    const std::size_t row_len = 3 * h * w;
    const double inv_m = 1.0 / static_cast<double>(m);

    const std::size_t c = model.feature_dim();
    for (std::size_t idx : feature_indices) {
        if (idx >= c) {
            throw Error(ErrorCode::invalid_argument,
                        "feature index " + std::to_string(idx) + " out of range [0, " +
                            std::to_string(c) + ")");
        }
    }

    // Fixed k order keeps the accumulation bit-stable; rows are independent
    // and filled by the worker pool.
    for (std::size_t k = 1; k <= m; ++k) {
        const double scale = static_cast<double>(k) * inv_m;
        Tensor scaled = image;
        for (double& p : scaled.data) p *= scale;
        FeatureResult fr = extract_features_at(model, scaled, u, v);
        parallel_for(feature_indices.size(), [&](std::size_t r) {
            Tensor adjoint({c});
            adjoint.data[feature_indices[r]] = 1.0;
            const Tensor g = vjp(fr.record, adjoint);
            double* dst = rows.data.data() + r * row_len;
            for (std::size_t i = 0; i < row_len; ++i) {
                dst[i] += inv_m * g.data[i];
            }
        });
    }
    return rows;
}

Tensor integrated_gradients_rows(const BackboneModel& model, const Tensor& image,
                                 std::size_t m,
                                 const std::vector<std::size_t>& feature_indices) {
    return integrated_gradients_rows_at(model, image, model.readout_u, model.readout_v, m,
                                        feature_indices);
}

PerFeatureMaps per_feature_maps(const ReadoutModel& model, const Tensor& image,
                                const AttributionConfig& config) {
    config.validate();
    if (!model.backbone) {
        throw Error(ErrorCode::invalid_argument, "readout model has no backbone");
    }
    const std::size_t c = model.backbone->feature_dim();
    std::vector<std::size_t> indices(c);
    for (std::size_t i = 0; i < c; ++i) indices[i] = i;
    const Tensor raw = attribution_rows(*model.backbone, image, model.u, model.v, config,
                                        indices);
    ProcessedRows processed = process_rows(raw, config);
    return {std::move(processed.rows), std::move(processed.degenerate)};
}

std::vector<double> beta_weights(std::span<const double> a_in,
                                 std::span<const double> a_out,
                                 std::span<const double> w) {
    if (a_in.size() != w.size() || a_out.size() != w.size()) {
        throw Error(ErrorCode::shape, "beta_weights dimension mismatch");
    }
    double n_in = 0.0, n_out = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double x = a_in[i] * w[i];
        const double y = a_out[i] * w[i];
        n_in += x * x;
        n_out += y * y;
    }
    if (n_in == 0.0 || n_out == 0.0) {
        throw Error(ErrorCode::domain,
                    std::string("beta_weights: zero weighted norm for a_") +
                        (n_in == 0.0 ? "in" : "out"));
    }
    const double denom = std::sqrt(n_in) * std::sqrt(n_out);
    std::vector<double> beta(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        beta[i] = (a_in[i] * w[i]) * (a_out[i] * w[i]) / denom;
    }
    return beta;
}

ParallelSaliency parallel_saliency(const ReadoutModel& model, const Tensor& image_out,
                                   const Tensor& image_in, const AttributionConfig& config,
                                   const std::string& id_out, const std::string& id_in) {
    config.validate();
    if (!model.backbone) {
        throw Error(ErrorCode::invalid_argument, "readout model has no backbone");
    }
    const BackboneModel& backbone = *model.backbone;
    const std::vector<double> a_out = features_at(backbone, image_out, model.u, model.v);
    const std::vector<double> a_in = features_at(backbone, image_in, model.u, model.v);

    const auto weighted_norm = [&](const std::vector<double>& a) {
        double n = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double x = a[i] * model.weights[i];
            n += x * x;
        }
        return n;
    };
    if (weighted_norm(a_out) == 0.0) {
        throw Error(ErrorCode::domain,
                    "parallel_saliency: degenerate weighted activations for '" + id_out + "'");
    }
    if (weighted_norm(a_in) == 0.0) {
        throw Error(ErrorCode::domain,
                    "parallel_saliency: degenerate weighted activations for '" + id_in + "'");
    }

    const double s = neuron_similarity(a_out, a_in, model.weights);
    std::vector<double> beta = beta_weights(a_in, a_out, model.weights);

    // Features with beta exactly zero contribute nothing; their rows are
    // never computed.
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        if (beta[i] != 0.0) active.push_back(i);
    }

    ParallelSaliency result;
    result.similarity = {s, id_out, id_in};
    result.beta = std::move(beta);
    result.degenerate_out.assign(model.weights.size(), 0);
    result.degenerate_in.assign(model.weights.size(), 0);

    const auto build_map = [&](const Tensor& image, std::vector<std::uint8_t>& degenerate,
                               const std::string& image_id) {
        Tensor map({image.shape[1], image.shape[2]});
        if (!active.empty()) {
            const Tensor raw =
                attribution_rows(backbone, image, model.u, model.v, config, active);
            const ProcessedRows rows = process_rows(raw, config);
            const std::size_t plane = image.shape[1] * image.shape[2];
            for (std::size_t r = 0; r < active.size(); ++r) {
                const double b = result.beta[active[r]];
                const double* src = rows.rows.data.data() + r * plane;
                for (std::size_t i = 0; i < plane; ++i) map.data[i] += b * src[i];
                degenerate[active[r]] = rows.degenerate[r];
            }
        }
        SaliencyMap sm;
        sm.l2_norm = l2_norm(map);
        sm.values = std::move(map);
        sm.bound = s;
        sm.image_id = image_id;
        return sm;
    };

    result.map_out = build_map(image_out, result.degenerate_out, id_out);
    result.map_in = build_map(image_in, result.degenerate_in, id_in);
    return result;
}

BoundReport check_bound(const SaliencyMap& map) {
    BoundReport report;
    report.l2_norm = map.l2_norm;
    report.bound = map.bound;
    report.pass = map.l2_norm <= map.bound + 1e-9;
    return report;
}

}  // namespace sfv
