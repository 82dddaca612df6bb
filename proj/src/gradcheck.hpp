#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sfv {

struct GradCheckLine {
    std::string name;
    std::uint64_t seed = 0;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckLine> lines;
    bool pass = true;
    double tolerance = 1e-4;
    double step = 1e-5;
};

// Central finite-difference validation of every differentiable primitive and
// of the composed feature extractor, over `seeds` seeds each. Relative error
// is measured on elements whose analytic gradient exceeds 1e-8.
GradCheckReport run_gradient_checks(std::size_t seeds, std::uint64_t base_seed);

}  // namespace sfv
