#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "backbone.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace sfv {

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;
constexpr double kGradFloor = 1e-8;

double max_rel_err(const Tensor& analytic, const Tensor& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double g = analytic.data[i];
        if (std::fabs(g) <= kGradFloor) continue;
        worst = std::max(worst, std::fabs(fd.data[i] - g) / std::fabs(g));
    }
    return worst;
}

Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng, double lo,
                     double hi) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tensor random_normal_tensor(const std::vector<std::size_t>& shape, Rng& rng,
                            double scale) {
    Tensor t(shape);
    for (double& v : t.data) v = scale * rng.normal();
    return t;
}

// Values on a shuffled lattice with small jitter: pairwise gaps stay well
// above the finite-difference step, so max-pool argmaxes cannot flip and
// relu inputs stay away from the kink.
Tensor well_separated_tensor(const std::vector<std::size_t>& shape, Rng& rng) {
    const std::size_t n = shape_size(shape);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(perm[i - 1], perm[rng.index(i)]);
    }
    Tensor t(shape);
    const double cell = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        t.data[i] = (static_cast<double>(perm[i]) + 0.1 + 0.8 * rng.uniform()) * cell;
    }
    return t;
}

GradCheckLine check_conv(std::uint64_t seed) {
    Rng rng(seed);
    const Tensor input = random_tensor({3, 10, 10}, rng, -1.0, 1.0);
    const Tensor kernel = random_normal_tensor({4, 3, 3, 3}, rng, 0.5);
    const Tensor bias = random_normal_tensor({4}, rng, 0.1);
    ComputationRecord rec;
    const Tensor out = conv2d_rec(input, kernel, bias, 1, 1, rec);
    const Tensor proj = random_normal_tensor(out.shape, rng, 1.0);

    const Tensor analytic = vjp(rec, proj);
    const Tensor fd = finite_diff(
        [&](const Tensor& x) {
            const Tensor y = conv2d(x, kernel, bias, 1, 1);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += y.data[i] * proj.data[i];
            return acc;
        },
        input, kStep);
    const double err = max_rel_err(analytic, fd);
    return {"conv2d", seed, err, err < kTol};
}

GradCheckLine check_relu(std::uint64_t seed) {
    Rng rng(seed);
    // Magnitudes bounded away from the kink.
    Tensor input({4, 5, 5});
    for (double& v : input.data) {
        const double mag = rng.uniform(0.2, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    ComputationRecord rec;
    const Tensor out = relu_rec(input, rec);
    const Tensor proj = random_normal_tensor(out.shape, rng, 1.0);

    const Tensor analytic = vjp(rec, proj);
    const Tensor fd = finite_diff(
        [&](const Tensor& x) {
            const Tensor y = relu(x);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += y.data[i] * proj.data[i];
            return acc;
        },
        input, kStep);
    const double err = max_rel_err(analytic, fd);
    return {"relu", seed, err, err < kTol};
}

GradCheckLine check_maxpool(std::uint64_t seed) {
    Rng rng(seed);
    const Tensor input = well_separated_tensor({2, 6, 6}, rng);
    ComputationRecord rec;
    const Tensor out = maxpool2d_rec(input, 2, 2, rec);
    const Tensor proj = random_normal_tensor(out.shape, rng, 1.0);

    const Tensor analytic = vjp(rec, proj);
    const Tensor fd = finite_diff(
        [&](const Tensor& x) {
            const Tensor y = maxpool2d(x, 2, 2);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += y.data[i] * proj.data[i];
            return acc;
        },
        input, kStep);
    const double err = max_rel_err(analytic, fd);
    return {"maxpool2d", seed, err, err < kTol};
}

GradCheckLine check_bilinear(std::uint64_t seed) {
    Rng rng(seed);
    const Tensor featmap = random_tensor({5, 7, 7}, rng, -1.0, 1.0);
    // Interior location away from grid lines, where the surface is smooth.
    const double u = rng.uniform(0.05, 0.95);
    const double v = rng.uniform(0.05, 0.95);
    ComputationRecord rec;
    const std::vector<double> out = bilinear_sample_rec(featmap, u, v, rec);
    Tensor proj({out.size()});
    for (double& p : proj.data) p = rng.normal();

    const Tensor analytic = vjp(rec, proj);
    const Tensor fd = finite_diff(
        [&](const Tensor& x) {
            const std::vector<double> y = bilinear_sample(x, u, v);
            double acc = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * proj.data[i];
            return acc;
        },
        featmap, kStep);
    const double err = max_rel_err(analytic, fd);
    return {"bilinear_sample", seed, err, err < kTol};
}

GradCheckLine check_backbone(std::uint64_t seed) {
    Rng rng(seed);
    const std::vector<LayerDef> arch = {
        LayerDef::conv(4, 3, 2, 1), LayerDef::relu(),       LayerDef::maxpool(2, 2),
        LayerDef::conv(6, 3, 1, 1), LayerDef::relu(),
    };
    BackboneModel model = make_random_backbone(arch, 11, seed * 7919 + 13);
    model.readout_u = rng.uniform(0.1, 0.9);
    model.readout_v = rng.uniform(0.1, 0.9);
    const Tensor image = random_tensor({3, 11, 11}, rng, 0.0, 1.0);

    FeatureResult fr = extract_features(model, image);
    Tensor proj({fr.features.size()});
    for (double& p : proj.data) p = rng.normal();

    const Tensor analytic = vjp(fr.record, proj);
    const Tensor fd = finite_diff(
        [&](const Tensor& x) {
            const std::vector<double> a = features_at(model, x, model.readout_u, model.readout_v);
            double acc = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * proj.data[i];
            return acc;
        },
        image, kStep);
    const double err = max_rel_err(analytic, fd);
    return {"backbone", seed, err, err < kTol};
}

}  // namespace

GradCheckReport run_gradient_checks(std::size_t seeds, std::uint64_t base_seed) {
    GradCheckReport report;
    report.tolerance = kTol;
    report.step = kStep;
    for (std::size_t k = 0; k < seeds; ++k) {
        const std::uint64_t seed = base_seed + k;
        for (const auto& line : {check_conv(seed), check_relu(seed), check_maxpool(seed),
                                 check_bilinear(seed), check_backbone(seed)}) {
            report.pass = report.pass && line.pass;
            report.lines.push_back(line);
        }
    }
    return report;
}

}  // namespace sfv
