#include "similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "errors.hpp"

namespace sfv {

namespace {

void check_dims(std::size_t a, std::size_t b, std::size_t w) {
    if (a != w || b != w) {
        throw Error(ErrorCode::shape, "similarity dimension mismatch: activations " +
                                          std::to_string(a) + "/" + std::to_string(b) +
                                          ", weights " + std::to_string(w));
    }
}

}  // namespace

double neuron_similarity(std::span<const double> a1, std::span<const double> a2,
                         std::span<const double> w) {
    check_dims(a1.size(), a2.size(), w.size());
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double x = a1[i] * w[i];
        const double y = a2[i] * w[i];
        dot += x * y;
        n1 += x * x;
        n2 += y * y;
    }
    if (n1 == 0.0 || n2 == 0.0) {
        throw Error(ErrorCode::domain,
                    std::string("neuron_similarity: zero weighted norm for ") +
                        (n1 == 0.0 ? "first" : "second") + " activation vector");
    }
    return dot / (std::sqrt(n1) * std::sqrt(n2));
}

std::size_t select_reference(std::span<const double> query_features,
                             const std::vector<Candidate>& candidates,
                             std::span<const double> w) {
    if (candidates.empty()) {
        throw Error(ErrorCode::invalid_argument, "select_reference: empty candidate set");
    }
    bool found = false;
    std::size_t best_index = 0;
    double best_s = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double s = 0.0;
        try {
            s = neuron_similarity(query_features, candidates[i].features, w);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::domain) continue;  // dead candidate, skip
            throw;
        }
        if (!found || s > best_s) {
            found = true;
            best_s = s;
            best_index = i;
        }
    }
    if (!found) {
        throw Error(ErrorCode::domain,
                    "select_reference: every candidate has zero weighted norm");
    }
    return best_index;
}

TopKResult top_k_activators(const ReadoutModel& model,
                            const std::vector<Candidate>& candidates, std::size_t k) {
    if (k == 0) {
        throw Error(ErrorCode::invalid_argument, "top_k_activators requires k >= 1");
    }
    if (candidates.empty()) {
        throw Error(ErrorCode::invalid_argument, "top_k_activators: empty candidate set");
    }
    std::vector<double> preds(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        preds[i] = predict(model, candidates[i].features);
    }
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preds[a] > preds[b]; });

    TopKResult result;
    result.truncated = k > candidates.size();
    const std::size_t take = std::min(k, candidates.size());
    result.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    result.predictions.reserve(take);
    for (std::size_t idx : result.indices) result.predictions.push_back(preds[idx]);
    return result;
}

}  // namespace sfv
