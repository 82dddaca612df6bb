#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "rng.hpp"
#include "similarity.hpp"
#include "test_support.hpp"

using namespace sfv;

namespace {

std::vector<double> random_nonneg(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(0.0, 2.0);
    return v;
}

std::vector<double> random_weights(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// Direct recomputation used as the brute-force scan oracle.
double similarity_oracle(const std::vector<double>& a1, const std::vector<double>& a2,
                         const std::vector<double>& w) {
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        dot += (a1[i] * w[i]) * (a2[i] * w[i]);
        n1 += (a1[i] * w[i]) * (a1[i] * w[i]);
        n2 += (a2[i] * w[i]) * (a2[i] * w[i]);
    }
    return dot / (std::sqrt(n1) * std::sqrt(n2));
}

}  // namespace

TEST_SUITE_BEGIN("similarity");

TEST_CASE("identical activations have similarity 1") {
    Rng rng(3);
    const std::vector<double> a = random_nonneg(16, rng);
    const std::vector<double> w = random_weights(16, rng);
    CHECK(neuron_similarity(a, a, w) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("disjoint weighted supports have similarity 0") {
    // a1 only occupies the first half, a2 only the second.
    std::vector<double> a1(8, 0.0), a2(8, 0.0), w(8, 1.0);
    for (std::size_t i = 0; i < 4; ++i) a1[i] = 1.0 + static_cast<double>(i);
    for (std::size_t i = 4; i < 8; ++i) a2[i] = 2.0;
    CHECK(neuron_similarity(a1, a2, w) == 0.0);
}

TEST_CASE("hand-computed similarity of a 2-vector pair") {
    const std::vector<double> a1 = {1.0, 2.0};
    const std::vector<double> a2 = {2.0, 1.0};
    const std::vector<double> w = {1.0, 1.0};
    CHECK(neuron_similarity(a1, a2, w) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("similarity is symmetric, scale invariant and weight-sign invariant") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 12;
        const std::vector<double> a1 = random_nonneg(n, rng);
        const std::vector<double> a2 = random_nonneg(n, rng);
        const std::vector<double> w = random_weights(n, rng);

        const double s = neuron_similarity(a1, a2, w);
        CHECK(std::fabs(s) <= 1.0 + 1e-12);
        CHECK(std::fabs(neuron_similarity(a2, a1, w) - s) < 1e-12);

        const double alpha = rng.uniform(0.1, 5.0);
        std::vector<double> a1_scaled = a1;
        for (double& x : a1_scaled) x *= alpha;
        CHECK(std::fabs(neuron_similarity(a1_scaled, a2, w) - s) < 1e-12);

        std::vector<double> w_neg = w;
        for (double& x : w_neg) x = -x;
        CHECK(std::fabs(neuron_similarity(a1, a2, w_neg) - s) < 1e-12);
    }
}

TEST_CASE("dimensions with zero weight are ignored exactly") {
    Rng rng(7);
    const std::size_t n = 10;
    std::vector<double> a1 = random_nonneg(n, rng);
    const std::vector<double> a2 = random_nonneg(n, rng);
    std::vector<double> w = random_weights(n, rng);
    w[3] = 0.0;
    w[8] = 0.0;
    const double s = neuron_similarity(a1, a2, w);
    a1[3] = 123.0;
    a1[8] = -55.0;
    CHECK(neuron_similarity(a1, a2, w) == s);
}

TEST_CASE("zero weighted norm raises a domain error naming the side") {
    const std::vector<double> zeros(4, 0.0);
    const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> w(4, 1.0);
    CHECK_THROWS_WITH_AS((void)neuron_similarity(zeros, a, w), doctest::Contains("first"),
                         Error);
    CHECK_THROWS_WITH_AS((void)neuron_similarity(a, zeros, w), doctest::Contains("second"),
                         Error);
}

TEST_CASE("select_reference returns the query itself when present") {
    Rng rng(11);
    const std::size_t n = 8;
    const std::vector<double> w = random_weights(n, rng);
    const std::vector<double> query = random_nonneg(n, rng);
    std::vector<Candidate> candidates;
    for (int i = 0; i < 5; ++i) {
        candidates.push_back({"c" + std::to_string(i), random_nonneg(n, rng)});
    }
    candidates.push_back({"query", query});
    const std::size_t best = select_reference(query, candidates, w);
    CHECK(candidates[best].id == "query");
}

TEST_CASE("select_reference with a single candidate returns it") {
    const std::vector<double> w = {1.0, 1.0};
    const std::vector<double> query = {1.0, 0.5};
    const std::vector<Candidate> candidates = {{"only", {0.5, 1.0}}};
    CHECK(select_reference(query, candidates, w) == 0);
}

TEST_CASE("select_reference matches the exhaustive-scan oracle") {
    Rng rng(13);
    const std::size_t n = 16;
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<double> w = random_weights(n, rng);
        const std::vector<double> query = random_nonneg(n, rng);
        std::vector<Candidate> candidates;
        for (int i = 0; i < 20; ++i) {
            candidates.push_back({"c" + std::to_string(i), random_nonneg(n, rng)});
        }
        const std::size_t got = select_reference(query, candidates, w);

        double best_s = -2.0;
        std::size_t want = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const double s = similarity_oracle(query, candidates[i].features, w);
            if (s > best_s) {
                best_s = s;
                want = i;
            }
        }
        CHECK(got == want);
    }
}

TEST_CASE("select_reference skips zero-norm candidates and keeps the first tie") {
    const std::vector<double> w = {1.0, 0.0};
    const std::vector<double> query = {1.0, 0.0};
    // First candidate is dead under w (only the zero-weighted dim is active);
    // the remaining two tie exactly, so the earlier one wins.
    const std::vector<Candidate> candidates = {
        {"dead", {0.0, 5.0}}, {"first", {2.0, 0.0}}, {"second", {4.0, 0.0}}};
    const std::size_t best = select_reference(query, candidates, w);
    CHECK(candidates[best].id == "first");
}

TEST_CASE("select_reference fails when every candidate is degenerate") {
    const std::vector<double> w = {1.0, 0.0};
    const std::vector<double> query = {1.0, 0.0};
    const std::vector<Candidate> candidates = {{"a", {0.0, 1.0}}, {"b", {0.0, 2.0}}};
    CHECK_THROWS_WITH_AS((void)select_reference(query, candidates, w),
                         doctest::Contains("every candidate"), Error);
}

TEST_CASE("select_reference argmax is invariant under positive rescaling") {
    Rng rng(17);
    const std::size_t n = 12;
    const std::vector<double> w = random_weights(n, rng);
    const std::vector<double> query = random_nonneg(n, rng);
    std::vector<Candidate> candidates;
    for (int i = 0; i < 15; ++i) {
        candidates.push_back({"c" + std::to_string(i), random_nonneg(n, rng)});
    }
    const std::size_t base = select_reference(query, candidates, w);

    std::vector<Candidate> rescaled = candidates;
    for (auto& cand : rescaled) {
        const double alpha = rng.uniform(0.2, 4.0);
        for (double& x : cand.features) x *= alpha;
    }
    CHECK(select_reference(query, rescaled, w) == base);
}

TEST_CASE("top_k_activators picks the argmax for k = 1") {
    ReadoutModel model;
    model.weights = {1.0, -1.0};
    const std::vector<Candidate> candidates = {
        {"a", {1.0, 0.0}}, {"b", {3.0, 0.0}}, {"c", {2.0, 0.0}}};
    const TopKResult top = top_k_activators(model, candidates, 1);
    REQUIRE(top.indices.size() == 1);
    CHECK(candidates[top.indices[0]].id == "b");
    CHECK(!top.truncated);
}

TEST_CASE("top_k_activators breaks ties by the lowest index") {
    ReadoutModel model;
    model.weights = {1.0};
    const std::vector<Candidate> candidates = {{"a", {2.0}}, {"b", {2.0}}, {"c", {2.0}}};
    const TopKResult top = top_k_activators(model, candidates, 2);
    CHECK(top.indices == std::vector<std::size_t>{0, 1});
}

TEST_CASE("top_k_activators equals the full-sort oracle prefix") {
    Rng rng(19);
    ReadoutModel model;
    model.weights = random_weights(6, rng);
    std::vector<Candidate> candidates;
    for (int i = 0; i < 30; ++i) {
        candidates.push_back({"c" + std::to_string(i), random_nonneg(6, rng)});
    }
    const TopKResult top = top_k_activators(model, candidates, 5);

    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        scored.emplace_back(predict(model, candidates[i].features), i);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first > b.first;
    });
    REQUIRE(top.indices.size() == 5);
    for (std::size_t r = 0; r < 5; ++r) {
        CHECK(top.indices[r] == scored[r].second);
        CHECK(top.predictions[r] == scored[r].first);
    }
}

TEST_CASE("top_k_activators flags truncation when k exceeds the population") {
    ReadoutModel model;
    model.weights = {1.0};
    const std::vector<Candidate> candidates = {{"a", {1.0}}, {"b", {2.0}}};
    const TopKResult top = top_k_activators(model, candidates, 10);
    CHECK(top.truncated);
    CHECK(top.indices.size() == 2);
    CHECK(candidates[top.indices[0]].id == "b");
}

TEST_SUITE_END();
