#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "errors.hpp"

namespace sfv {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

// Lentz continued fraction for the incomplete beta (Numerical Recipes form).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw Error(ErrorCode::numeric, "incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0 && b > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "incomplete_beta requires a, b > 0");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
    if (!(df > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "student_t_cdf requires df > 0");
    }
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) {
        throw Error(ErrorCode::invalid_argument, "student_t_quantile requires p in (0,1)");
    }
    if (p == 0.5) return 0.0;
    // Symmetric: solve for the upper half and mirror.
    if (p < 0.5) return -student_t_quantile(1.0 - p, df);

    double lo = 0.0;
    double hi = 1.0;
    while (student_t_cdf(hi, df) < p) {
        hi *= 2.0;
        if (hi > 1e12) {
            throw Error(ErrorCode::numeric, "student_t_quantile bracket failure");
        }
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

double pearson_r(std::span<const double> pred, std::span<const double> obs) {
    if (pred.size() != obs.size()) {
        throw Error(ErrorCode::shape, "pearson_r requires equal lengths, got " +
                                          std::to_string(pred.size()) + " and " +
                                          std::to_string(obs.size()));
    }
    const std::size_t n = pred.size();
    if (n < 3) {
        throw Error(ErrorCode::invalid_argument,
                    "pearson_r requires at least 3 samples, got " + std::to_string(n));
    }
    const double mean_p = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(n);
    const double mean_o = std::accumulate(obs.begin(), obs.end(), 0.0) / static_cast<double>(n);
    double spo = 0.0, spp = 0.0, soo = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = pred[i] - mean_p;
        const double dobs = obs[i] - mean_o;
        spo += dp * dobs;
        spp += dp * dp;
        soo += dobs * dobs;
    }
    if (spp == 0.0 || soo == 0.0) {
        throw Error(ErrorCode::domain, "pearson_r undefined: zero variance in " +
                                           std::string(spp == 0.0 ? "predictions" : "observations"));
    }
    return spo / std::sqrt(spp * soo);
}

double correlation_significance(std::size_t n, double alpha) {
    if (n < 4) {
        throw Error(ErrorCode::invalid_argument,
                    "correlation_significance requires n >= 4, got " + std::to_string(n));
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "alpha must be in (0, 1]");
    }
    if (alpha == 1.0) return 0.0;
    const double df = static_cast<double>(n - 2);
    const double t = student_t_quantile(1.0 - 0.5 * alpha, df);
    return t / std::sqrt(df + t * t);
}

MannWhitneyResult mann_whitney_u(std::span<const double> sample_a,
                                 std::span<const double> sample_b) {
    const std::size_t n1 = sample_a.size();
    const std::size_t n2 = sample_b.size();
    if (n1 == 0 || n2 == 0) {
        throw Error(ErrorCode::invalid_argument, "mann_whitney_u requires non-empty samples");
    }

    struct Tagged {
        double value;
        bool from_a;
    };
    std::vector<Tagged> pooled;
    pooled.reserve(n1 + n2);
    for (double v : sample_a) pooled.push_back({v, true});
    for (double v : sample_b) pooled.push_back({v, false});
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const Tagged& a, const Tagged& b) { return a.value < b.value; });

    // Midranks; accumulate the tie-correction term sum(t^3 - t).
    const std::size_t n = pooled.size();
    double rank_sum_a = 0.0;
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[j + 1].value == pooled[i].value) ++j;
        const double t = static_cast<double>(j - i + 1);
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        if (t > 1.0) tie_term += t * t * t - t;
        for (std::size_t k = i; k <= j; ++k) {
            if (pooled[k].from_a) rank_sum_a += midrank;
        }
        i = j + 1;
    }

    MannWhitneyResult res;
    const double dn1 = static_cast<double>(n1);
    const double dn2 = static_cast<double>(n2);
    res.u1 = rank_sum_a - dn1 * (dn1 + 1.0) / 2.0;
    res.u2 = dn1 * dn2 - res.u1;
    res.approx_unreliable = n1 < 8 || n2 < 8;

    const double mean_u = dn1 * dn2 / 2.0;
    const double dn = dn1 + dn2;
    const double var_u =
        dn1 * dn2 / 12.0 * ((dn + 1.0) - tie_term / (dn * (dn - 1.0)));
    if (var_u <= 0.0) {
        res.p_two_sided = 1.0;  // every observation tied
        return res;
    }
    const double z = (res.u1 - mean_u) / std::sqrt(var_u);
    res.p_two_sided = std::min(1.0, 2.0 * normal_cdf(-std::fabs(z)));
    return res;
}

}  // namespace sfv
