#pragma once

#include <span>
#include <vector>

namespace sfv {

double normal_cdf(double z);

// Regularized incomplete beta I_x(a, b) via continued fraction.
double incomplete_beta(double a, double b, double x);

// CDF and quantile of Student's t with df degrees of freedom.
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);

double pearson_r(std::span<const double> pred, std::span<const double> obs);

// Two-sided critical |r| at level alpha under the null rho = 0, using the
// transform r * sqrt((n-2)/(1-r^2)) ~ t_{n-2}.
double correlation_significance(std::size_t n, double alpha);

struct MannWhitneyResult {
    double u1 = 0.0;  // rank-sum statistic for sample a
    double u2 = 0.0;
    double p_two_sided = 1.0;  // tie-corrected normal approximation
    bool approx_unreliable = false;  // either sample smaller than 8
};

MannWhitneyResult mann_whitney_u(std::span<const double> sample_a,
                                 std::span<const double> sample_b);

}  // namespace sfv
