#include <doctest.h>

#include <cmath>

#include "backbone.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "test_support.hpp"

using namespace sfv;
using test::random_tensor;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("conv2d 1x1 identity kernel reproduces the input") {
    Rng rng(3);
    const Tensor input = random_tensor({1, 4, 4}, rng, -1.0, 1.0);
    const Tensor kernel = Tensor::from_data({1, 1, 1, 1}, {1.0});
    const Tensor bias({1});
    const Tensor out = conv2d(input, kernel, bias, 1, 0);
    REQUIRE(out.shape == input.shape);
    for (std::size_t i = 0; i < input.size(); ++i) {
        CHECK(out.data[i] == input.data[i]);
    }
}

TEST_CASE("conv2d all-ones 2x2 kernel sums the entries") {
    const Tensor input = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
    const Tensor kernel = Tensor::from_data({1, 1, 2, 2}, {1, 1, 1, 1});
    const Tensor bias({1});
    const Tensor out = conv2d(input, kernel, bias, 1, 0);
    REQUIRE(out.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(out.data[0] == 10.0);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    Rng rng(11);
    const Tensor input = random_tensor({2, 5, 5}, rng, -1.0, 1.0);
    Tensor kernel({3, 2, 3, 3});
    for (double& v : kernel.data) v = rng.normal();
    Tensor bias({3});
    for (double& v : bias.data) v = rng.normal();

    const std::pair<std::size_t, std::size_t> settings[] = {{1, 0}, {1, 1}, {2, 1}, {1, 2}};
    for (const auto& [stride, padding] : settings) {
        const Tensor got = conv2d(input, kernel, bias, stride, padding);
        const Tensor want = test::conv2d_oracle(input, kernel, bias, stride, padding);
        REQUIRE(got.shape == want.shape);
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(std::fabs(got.data[i] - want.data[i]) < 1e-12);
        }
    }
}

TEST_CASE("conv2d rejects inconsistent shapes with named dimensions") {
    const Tensor input({2, 4, 4});
    const Tensor kernel({3, 5, 3, 3});  // expects 5 input channels
    const Tensor bias({3});
    CHECK_THROWS_WITH_AS(conv2d(input, kernel, bias, 1, 0),
                         doctest::Contains("channel mismatch"), Error);

    const Tensor big_kernel({3, 2, 7, 7});
    CHECK_THROWS_WITH_AS(conv2d(input, big_kernel, bias, 1, 0),
                         doctest::Contains("exceeds padded input"), Error);
}

TEST_CASE("relu clamps negatives and keeps positives") {
    const Tensor input = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
    const Tensor out = relu(input);
    CHECK(out.data == std::vector<double>{0.0, 0.0, 2.0});

    Tensor negatives({2, 3, 3});
    for (double& v : negatives.data) v = -0.5;
    const Tensor zeros = relu(negatives);
    for (double v : zeros.data) CHECK(v == 0.0);
}

TEST_CASE("relu agrees with the elementwise scalar oracle") {
    Rng rng(5);
    const Tensor input = random_tensor({4, 3, 2}, rng, -2.0, 2.0);
    const Tensor out = relu(input);
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double v = input.data[i];
        CHECK(out.data[i] == (v > 0.0 ? v : 0.0));
        CHECK(out.data[i] >= 0.0);
    }
}

TEST_CASE("maxpool2d window 1 stride 1 is the identity") {
    Rng rng(7);
    const Tensor input = random_tensor({2, 3, 3}, rng, -1.0, 1.0);
    const Tensor out = maxpool2d(input, 1, 1);
    REQUIRE(out.shape == input.shape);
    CHECK(out.data == input.data);
}

TEST_CASE("maxpool2d full-window reduction") {
    const Tensor input = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
    const Tensor out = maxpool2d(input, 2, 2);
    REQUIRE(out.shape == std::vector<std::size_t>{1, 1, 1});
    CHECK(out.data[0] == 4.0);
}

TEST_CASE("maxpool2d matches the nested-loop oracle") {
    Rng rng(13);
    const Tensor input = random_tensor({3, 8, 8}, rng, -1.0, 1.0);
    const Tensor got = maxpool2d(input, 2, 2);
    const Tensor want = test::maxpool2d_oracle(input, 2, 2);
    REQUIRE(got.shape == want.shape);
    CHECK(got.data == want.data);
}

TEST_CASE("maxpool2d rejects windows larger than the input") {
    const Tensor input({1, 3, 3});
    CHECK_THROWS_WITH_AS(maxpool2d(input, 4, 1), doctest::Contains("larger than"), Error);
}

TEST_CASE("bilinear_sample on a grid node returns that node") {
    Rng rng(17);
    const Tensor map = random_tensor({4, 5, 7}, rng, -1.0, 1.0);
    // (u, v) = (2/6, 3/4) lands exactly on grid node x=2, y=3.
    const std::vector<double> got = bilinear_sample(map, 2.0 / 6.0, 3.0 / 4.0);
    for (std::size_t c = 0; c < 4; ++c) {
        CHECK(got[c] == doctest::Approx(map.at3(c, 3, 2)).epsilon(1e-14));
    }
}

TEST_CASE("bilinear_sample midpoint average") {
    const Tensor map = Tensor::from_data({1, 2, 2}, {0.0, 1.0, 0.0, 1.0});
    const std::vector<double> got = bilinear_sample(map, 0.5, 0.5);
    CHECK(got[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("bilinear_sample matches the closed-form oracle") {
    Rng rng(19);
    const Tensor map = random_tensor({6, 9, 4}, rng, -2.0, 2.0);
    for (int i = 0; i < 25; ++i) {
        const double u = rng.uniform();
        const double v = rng.uniform();
        const std::vector<double> got = bilinear_sample(map, u, v);
        const std::vector<double> want = test::bilinear_oracle(map, u, v);
        for (std::size_t c = 0; c < got.size(); ++c) {
            CHECK(std::fabs(got[c] - want[c]) < 1e-12);
        }
    }
}

TEST_CASE("bilinear_sample rejects out-of-range locations") {
    const Tensor map({1, 2, 2});
    CHECK_THROWS_AS((void)bilinear_sample(map, 1.2, 0.5), Error);
    CHECK_THROWS_AS((void)bilinear_sample(map, 0.5, -0.1), Error);
}

TEST_CASE("vjp of a zero adjoint is a zero gradient") {
    Rng rng(23);
    const BackboneModel model = make_random_backbone(test::small_architecture(), 32, 91);
    const Tensor image = random_tensor({3, 32, 32}, rng, 0.0, 1.0);
    FeatureResult fr = extract_features(model, image);
    const Tensor zero_adj({fr.features.size()});
    const Tensor grad = vjp(fr.record, zero_adj);
    REQUIRE(grad.shape == image.shape);
    for (double v : grad.data) CHECK(v == 0.0);
}

TEST_CASE("vjp through a single relu node is the positive-input indicator") {
    const Tensor input = Tensor::from_data({5}, {-2.0, -0.1, 0.0, 0.3, 7.0});
    ComputationRecord rec;
    (void)relu_rec(input, rec);
    Tensor ones({5}, 1.0);
    const Tensor grad = vjp(rec, ones);
    CHECK(grad.data == std::vector<double>{0.0, 0.0, 0.0, 1.0, 1.0});
}

TEST_CASE("vjp rejects an adjoint of the wrong shape") {
    const Tensor input = Tensor::from_data({3}, {1.0, 2.0, 3.0});
    ComputationRecord rec;
    (void)relu_rec(input, rec);
    const Tensor bad({4}, 1.0);
    CHECK_THROWS_WITH_AS((void)vjp(rec, bad), doctest::Contains("adjoint shape"), Error);
}

TEST_CASE("vjp matches finite differences through the composed model") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Rng rng(seed);
        const BackboneModel model =
            make_random_backbone(test::small_architecture(8), 16, seed + 100);
        const Tensor image = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
        FeatureResult fr = extract_features(model, image);
        const std::size_t c = fr.features.size();
        const std::size_t pick = rng.index(c);
        Tensor adjoint({c});
        adjoint.data[pick] = 1.0;
        const Tensor analytic = vjp(fr.record, adjoint);
        const Tensor fd = finite_diff(
            [&](const Tensor& x) {
                return features_at(model, x, model.readout_u, model.readout_v)[pick];
            },
            image, 1e-5);
        double worst = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            if (std::fabs(analytic.data[i]) <= 1e-8) continue;
            worst = std::max(worst, std::fabs(fd.data[i] - analytic.data[i]) /
                                        std::fabs(analytic.data[i]));
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("vjp is linear in the adjoint") {
    Rng rng(29);
    const BackboneModel model =
        make_random_backbone(test::small_architecture(8), 16, 55);
    const Tensor image = random_tensor({3, 16, 16}, rng, 0.0, 1.0);
    FeatureResult fr = extract_features(model, image);
    const std::size_t c = fr.features.size();

    Tensor u({c}), v({c});
    for (double& x : u.data) x = rng.normal();
    for (double& x : v.data) x = rng.normal();
    const double alpha = rng.uniform(-2.0, 2.0);
    const double beta = rng.uniform(-2.0, 2.0);

    Tensor combo({c});
    for (std::size_t i = 0; i < c; ++i) combo.data[i] = alpha * u.data[i] + beta * v.data[i];

    const Tensor g_combo = vjp(fr.record, combo);
    const Tensor g_u = vjp(fr.record, u);
    const Tensor g_v = vjp(fr.record, v);
    for (std::size_t i = 0; i < g_combo.size(); ++i) {
        CHECK(std::fabs(g_combo.data[i] - (alpha * g_u.data[i] + beta * g_v.data[i])) <
              1e-12);
    }
}

TEST_CASE("forward and backward keep finite values on finite inputs") {
    Rng rng(31);
    const BackboneModel model = make_random_backbone(test::small_architecture(), 32, 77);
    const Tensor image = random_tensor({3, 32, 32}, rng, 0.0, 1.0);
    FeatureResult fr = extract_features(model, image);
    Tensor adjoint({fr.features.size()});
    for (double& x : adjoint.data) x = rng.normal();
    const Tensor grad = vjp(fr.record, adjoint);
    CHECK(grad.all_finite());
    for (double f : fr.features) CHECK(std::isfinite(f));
}

TEST_CASE("jacobian_rows of a dead feature is all zeros") {
    // One conv channel with a strongly negative bias dies under the relu.
    BackboneModel model;
    ConvLayer conv;
    conv.kernel = Tensor({2, 3, 1, 1});
    conv.kernel.data = {1.0, 0.5, 0.25, 0.3, 0.3, 0.3};
    conv.bias = Tensor::from_data({2}, {0.0, -100.0});
    model.layers.emplace_back(std::move(conv));
    model.layers.emplace_back(ReluLayer{});
    model.input_size = 4;
    model.validate();

    Rng rng(37);
    const Tensor image = random_tensor({3, 4, 4}, rng, 0.0, 1.0);
    const Tensor rows = jacobian_rows(model, image, {1});
    for (double v : rows.data) CHECK(v == 0.0);
}

TEST_CASE("jacobian_rows of an identity backbone gives readout indicators") {
    BackboneModel model;
    ConvLayer conv;
    conv.kernel = Tensor({3, 3, 1, 1});
    for (std::size_t o = 0; o < 3; ++o) {
        for (std::size_t i = 0; i < 3; ++i) {
            conv.kernel.data[o * 3 + i] = o == i ? 1.0 : 0.0;
        }
    }
    conv.bias = Tensor({3});
    model.layers.emplace_back(std::move(conv));
    model.layers.emplace_back(ReluLayer{});
    model.input_size = 4;
    model.readout_u = 0.4;
    model.readout_v = 0.7;
    model.validate();

    Rng rng(41);
    const Tensor image = random_tensor({3, 4, 4}, rng, 0.1, 1.0);  // strictly positive
    const Tensor rows = jacobian_rows(model, image, {0, 1, 2});

    // Expected: the bilinear scatter weights at the readout location, on the
    // matching channel only.
    const double gx = 0.4 * 3.0, gy = 0.7 * 3.0;
    const std::size_t x0 = 1, y0 = 2;  // floor(1.2), floor(2.1)
    const double tx = gx - 1.0, ty = gy - 2.0;
    Tensor expected({3, 3, 4, 4});
    for (std::size_t ch = 0; ch < 3; ++ch) {
        expected.data[((ch * 3 + ch) * 4 + y0) * 4 + x0] = (1.0 - tx) * (1.0 - ty);
        expected.data[((ch * 3 + ch) * 4 + y0) * 4 + x0 + 1] = tx * (1.0 - ty);
        expected.data[((ch * 3 + ch) * 4 + y0 + 1) * 4 + x0] = (1.0 - tx) * ty;
        expected.data[((ch * 3 + ch) * 4 + y0 + 1) * 4 + x0 + 1] = tx * ty;
    }
    REQUIRE(rows.shape == expected.shape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("jacobian_rows equals stacked single-feature vjp calls bit-for-bit") {
    Rng rng(43);
    const BackboneModel model = make_random_backbone(test::small_architecture(), 32, 99);
    const Tensor image = random_tensor({3, 32, 32}, rng, 0.0, 1.0);

    std::vector<std::size_t> indices;
    for (int i = 0; i < 8; ++i) indices.push_back(rng.index(model.feature_dim()));

    const Tensor rows = jacobian_rows(model, image, indices);
    FeatureResult fr = extract_features(model, image);
    const std::size_t row_len = 3 * 32 * 32;
    for (std::size_t r = 0; r < indices.size(); ++r) {
        Tensor adjoint({model.feature_dim()});
        adjoint.data[indices[r]] = 1.0;
        const Tensor single = vjp(fr.record, adjoint);
        for (std::size_t i = 0; i < row_len; ++i) {
            CHECK(rows.data[r * row_len + i] == single.data[i]);
        }
    }
}

TEST_CASE("jacobian_rows rejects out-of-range feature indices") {
    const BackboneModel model = make_random_backbone(test::small_architecture(), 32, 1);
    Rng rng(47);
    const Tensor image = random_tensor({3, 32, 32}, rng, 0.0, 1.0);
    CHECK_THROWS_WITH_AS((void)jacobian_rows(model, image, {model.feature_dim()}),
                         doctest::Contains("out of range"), Error);
}

TEST_CASE("finite_diff of a sum is all ones") {
    Rng rng(53);
    const Tensor x = random_tensor({2, 3}, rng, -1.0, 1.0);
    const Tensor grad = finite_diff(
        [](const Tensor& t) {
            double acc = 0.0;
            for (double v : t.data) acc += v;
            return acc;
        },
        x, 1e-5);
    for (double v : grad.data) {
        CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("finite_diff recovers the analytic derivative of x^2") {
    const Tensor x = Tensor::from_data({1}, {3.0});
    const Tensor grad =
        finite_diff([](const Tensor& t) { return t.data[0] * t.data[0]; }, x, 1e-5);
    CHECK(std::fabs(grad.data[0] - 6.0) < 1e-8);
}

TEST_SUITE_END();
