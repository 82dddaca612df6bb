#include "synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "errors.hpp"
#include "rng.hpp"

namespace sfv {

ActivationMatrix activation_matrix(const BackboneModel& backbone,
                                   const std::vector<Tensor>& images,
                                   const std::vector<std::string>& ids, double u, double v) {
    if (images.empty()) {
        throw Error(ErrorCode::invalid_argument, "activation_matrix requires at least one image");
    }
    if (images.size() != ids.size()) {
        throw Error(ErrorCode::invalid_argument, "activation_matrix: ids/images length mismatch");
    }
    ActivationMatrix m;
    m.ids = ids;
    m.feature_dim = backbone.feature_dim();
    m.values.assign(images.size() * m.feature_dim, 0.0);
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::vector<double> a;
        try {
            a = features_at(backbone, images[i], u, v);
        } catch (const Error& e) {
            throw Error(e.code(), "activation_matrix: extraction failed for '" + ids[i] +
                                      "': " + e.what());
        }
        std::copy(a.begin(), a.end(), m.values.begin() + i * m.feature_dim);
    }
    return m;
}

std::vector<double> EigenDecomposition::eigenvector(std::size_t k) const {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = vectors[i * n + k];
    return v;
}

EigenDecomposition symmetric_eigendecomp(std::span<const double> matrix, std::size_t n) {
    if (n == 0 || matrix.size() != n * n) {
        throw Error(ErrorCode::shape, "symmetric_eigendecomp: matrix size " +
                                          std::to_string(matrix.size()) +
                                          " does not match n = " + std::to_string(n));
    }
    double max_abs = 0.0;
    for (double v : matrix) max_abs = std::max(max_abs, std::fabs(v));
    const double sym_tol = 1e-10 * std::max(1.0, max_abs);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::fabs(matrix[i * n + j] - matrix[j * n + i]) > sym_tol) {
                throw Error(ErrorCode::domain,
                            "symmetric_eigendecomp: matrix is not symmetric at (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }

    // Symmetrize on entry, then run cyclic-by-row Jacobi sweeps.
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a[i * n + j] = 0.5 * (matrix[i * n + j] + matrix[j * n + i]);
        }
    }
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    const auto off_norm = [&]() {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                acc += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        return std::sqrt(acc);
    };
    double fro = 0.0;
    for (double x : a) fro += x * x;
    fro = std::sqrt(fro);
    const double stop = std::max(1e-300, 1e-15 * fro);

    constexpr int kMaxSweeps = 64;
    for (int sweep = 0; sweep < kMaxSweeps && off_norm() > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (apq == 0.0) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = 0.5 * (aqq - app) / apq;
                double t = 1.0 / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                if (theta < 0.0) t = -t;
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p];
                    const double akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k];
                    const double aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if (off_norm() > std::max(1e-10, 1e-12 * std::max(1.0, fro))) {
        throw Error(ErrorCode::numeric, "Jacobi eigendecomposition did not converge");
    }

    // Sort eigenpairs descending by algebraic eigenvalue.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return a[x * n + x] > a[y * n + y];
    });

    EigenDecomposition dec;
    dec.n = n;
    dec.eigenvalues.resize(n);
    dec.vectors.assign(n * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t src = order[k];
        dec.eigenvalues[k] = a[src * n + src];
        // Sign convention: first nonzero component positive.
        double flip = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = v[i * n + src];
            if (x != 0.0) {
                flip = x > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            dec.vectors[i * n + k] = flip * v[i * n + src];
        }
    }
    return dec;
}

SyntheticNeuron build_synthetic_neuron(const ActivationMatrix& a_in,
                                       const ActivationMatrix& a_out) {
    if (a_in.feature_dim != a_out.feature_dim || a_in.feature_dim == 0) {
        throw Error(ErrorCode::shape, "build_synthetic_neuron: feature dims differ (" +
                                          std::to_string(a_in.feature_dim) + " vs " +
                                          std::to_string(a_out.feature_dim) + ")");
    }
    const std::size_t c = a_in.feature_dim;

    // D = A_in^T A_in - A_out^T A_out. The two Gram matrices are accumulated
    // separately so identical inputs cancel exactly, which makes the
    // degenerate case detectable as a true zero matrix.
    const auto gram = [c](const ActivationMatrix& m) {
        std::vector<double> g(c * c, 0.0);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const auto row = m.row(r);
            for (std::size_t i = 0; i < c; ++i) {
                const double ri = row[i];
                if (ri == 0.0) continue;
                for (std::size_t j = 0; j < c; ++j) {
                    g[i * c + j] += ri * row[j];
                }
            }
        }
        return g;
    };
    const std::vector<double> g_in = gram(a_in);
    const std::vector<double> g_out = gram(a_out);
    std::vector<double> d(c * c);
    for (std::size_t k = 0; k < c * c; ++k) d[k] = g_in[k] - g_out[k];

    double max_abs = 0.0;
    for (double x : d) max_abs = std::max(max_abs, std::fabs(x));

    SyntheticNeuron neuron;
    if (max_abs == 0.0) {
        // Zero difference matrix: every unit vector is a maximizer; return
        // the canonical first basis vector and flag the degeneracy.
        neuron.weights.assign(c, 0.0);
        neuron.weights[0] = 1.0;
        neuron.top_eigenvalue = 0.0;
        neuron.degenerate = true;
        return neuron;
    }

    const EigenDecomposition dec = symmetric_eigendecomp(d, c);
    neuron.weights = dec.eigenvector(0);
    neuron.top_eigenvalue = dec.eigenvalues[0];
    neuron.degenerate = false;
    return neuron;
}

std::vector<SyntheticResponse> generate_synthetic_responses(
    std::span<const double> w, const ActivationMatrix& features, double noise_std,
    std::uint64_t seed) {
    if (!(noise_std >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "noise_std must be nonnegative");
    }
    if (w.size() != features.feature_dim) {
        throw Error(ErrorCode::shape, "generate_synthetic_responses: weight length mismatch");
    }
    Rng rng(seed);
    std::vector<SyntheticResponse> out;
    out.reserve(features.rows());
    for (std::size_t r = 0; r < features.rows(); ++r) {
        const auto row = features.row(r);
        double y = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) y += row[i] * w[i];
        if (noise_std > 0.0) y += rng.normal(0.0, noise_std);
        out.push_back({features.ids[r], y});
    }
    return out;
}

Tensor make_texture_image(std::size_t size, const TextureParams& params,
                          std::uint64_t seed) {
    if (size == 0) {
        throw Error(ErrorCode::invalid_argument, "texture size must be positive");
    }
    Rng rng(seed);
    Tensor img({3, size, size}, 0.5);

    struct Wave {
        double kx, ky, phase, amp;
        double mix[3];
    };
    std::vector<Wave> waves(params.waves);
    for (auto& wave : waves) {
        const double theta =
            (params.orientation_deg + rng.uniform(-params.orientation_jitter_deg,
                                                  params.orientation_jitter_deg)) *
            std::numbers::pi / 180.0;
        const double cycles = rng.uniform(params.min_cycles, params.max_cycles);
        const double k = 2.0 * std::numbers::pi * cycles / static_cast<double>(size);
        wave.kx = k * std::cos(theta);
        wave.ky = k * std::sin(theta);
        wave.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        wave.amp = rng.uniform(0.12, 0.3);
        for (double& m : wave.mix) m = rng.uniform(0.4, 1.0);
    }

    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            double mixed[3] = {0.0, 0.0, 0.0};
            for (const Wave& wave : waves) {
                const double s = wave.amp * std::sin(wave.kx * static_cast<double>(x) +
                                                     wave.ky * static_cast<double>(y) +
                                                     wave.phase);
                for (std::size_t ch = 0; ch < 3; ++ch) mixed[ch] += s * wave.mix[ch];
            }
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double noise = params.noise > 0.0 ? rng.normal(0.0, params.noise) : 0.0;
                img.at3(ch, y, x) = std::clamp(0.5 + mixed[ch] + noise, 0.0, 1.0);
            }
        }
    }
    return img;
}

}  // namespace sfv
