#pragma once

#include <span>
#include <string>
#include <vector>

#include "readout.hpp"

namespace sfv {

struct SimilarityScore {
    double value = 0.0;
    std::string id_a;
    std::string id_b;
};

// Cosine similarity of the weighted activation vectors a1*w and a2*w.
// Throws a domain error naming the degenerate side if a weighted norm is
// zero; callers scanning candidate sets may skip such pairs.
double neuron_similarity(std::span<const double> a1, std::span<const double> a2,
                         std::span<const double> w);

struct Candidate {
    std::string id;
    std::vector<double> features;
};

// Index of the candidate most similar to the query under the neuron metric.
// Candidates with zero weighted norm are skipped; ties keep the lowest index.
std::size_t select_reference(std::span<const double> query_features,
                             const std::vector<Candidate>& candidates,
                             std::span<const double> w);

struct TopKResult {
    std::vector<std::size_t> indices;      // into the candidate list, descending response
    std::vector<double> predictions;       // matching predicted responses
    bool truncated = false;                // k exceeded the population
};

// k highest predicted responses, descending; ties keep the lowest index.
TopKResult top_k_activators(const ReadoutModel& model,
                            const std::vector<Candidate>& candidates, std::size_t k);

}  // namespace sfv
