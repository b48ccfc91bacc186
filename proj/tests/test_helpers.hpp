#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "abplan/model.hpp"

namespace testutil {

inline double rel_diff(double a, double b) {
    return std::fabs(a - b) / std::fabs(b);
}

// Default additive scenario: weekly-seasonal means around 100, a 2% lift,
// and a 0.6 UTC (sigma_A^2 = 6, sigma_E^2 = 4).
inline abplan::model::ModelParams default_additive_params(int t_days, int t0_days = 0,
                                                          double amplitude = 0.1) {
    abplan::model::ModelParams params;
    params.theta = 0.02;
    params.sigma = {6.0, 4.0};
    params.daily_means_c = abplan::model::weekly_sinusoid_means(100.0, amplitude, t_days, t0_days);
    return params;
}

// Default correlated numerator/denominator scenario. The error covariance
// block is proportional to the random-effect block (factor 1.5), which
// makes the summed-metric correlation equal to the decay-rate parameter;
// the implied UTC is 0.4.
inline abplan::model::ModelParams default_ratio_params() {
    abplan::model::ModelParams params;
    params.theta = 0.05;
    params.sigma = {0.0, 1.0};  // unused by the ratio path
    abplan::formulas::RatioVarianceComponents comps;
    comps.sigma_a2_n = 4.0;
    comps.sigma_a2_d = 2.0;
    comps.sigma_a_nd = 1.5;
    comps.sigma_e2_n = 6.0;
    comps.sigma_e2_d = 3.0;
    comps.sigma_e_nd = 2.25;
    comps.mbar_n = 20.0;
    comps.mbar_d = 50.0;
    params.ratio_part = comps;
    return params;
}

// Pearson correlation.
inline double sample_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double sample_variance(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return ss / (static_cast<double>(x.size()) - 1.0);
}

inline double mean(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    return m / static_cast<double>(x.size());
}

}  // namespace testutil
