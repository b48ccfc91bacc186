#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "abplan/errors.hpp"
#include "abplan/math.hpp"
#include "abplan/model.hpp"

namespace abplan::utc {

enum class UtcMethod { panel, widths, pooled };

inline const char* to_string(UtcMethod m) {
    switch (m) {
        case UtcMethod::panel: return "panel";
        case UtcMethod::widths: return "widths";
        default: return "pooled";
    }
}

struct UTCEstimate {
    double rho_hat = 0.0;
    UtcMethod method = UtcMethod::panel;
    int n_experiments = 1;
    std::optional<int> max_lag;
    double weight = 1.0;            // sample-size weight for pooling
    double clamped_fraction = 0.0;  // fraction of raw estimates clamped into [0,1]

    bool clamped() const { return clamped_fraction > 0.0; }
};

// Daily CI widths observed in one historical experiment. The day-1 width
// anchors the decay curve; days must be strictly increasing.
struct WidthPoint {
    int day = 0;
    double width = 0.0;
};

struct WidthSeries {
    std::string experiment_id;
    std::vector<WidthPoint> points;

    void validate() const {
        if (points.size() < 2)
            throw std::invalid_argument("WidthSeries: need at least 2 days");
        if (points.front().day != 1)
            throw std::invalid_argument("WidthSeries: a day-1 entry is required");
        int prev = 0;
        for (const auto& p : points) {
            if (p.day <= prev)
                throw std::invalid_argument("WidthSeries: days must be strictly increasing");
            if (!(p.width > 0.0))
                throw std::invalid_argument("WidthSeries: widths must be positive");
            prev = p.day;
        }
    }
};

// ---------------------------------------------------------------------------
// Panel-based estimation
// ---------------------------------------------------------------------------

// Estimates rho by averaging the across-user sample correlations of day
// pairs (t, t'), t < t', pooled over both arms. When max_lag is set only
// pairs with t' - t <= max_lag contribute; restricting to short lags gives
// conservative (upward biased) estimates when errors are serially
// correlated. For ratio metrics the correlated series is numerator +
// denominator. The average is clamped into [0, 1].
inline UTCEstimate estimate_utc_from_panel(const model::MetricPanel& panel,
                                           std::optional<int> max_lag = std::nullopt) {
    const int n = panel.n_users;
    const int t = panel.n_days;
    if (t < 2)
        throw std::invalid_argument("estimate_utc_from_panel: need at least 2 days");
    if (n < 3)
        throw std::invalid_argument("estimate_utc_from_panel: need at least 3 users per arm");
    if (max_lag && *max_lag < 1)
        throw std::invalid_argument("estimate_utc_from_panel: max_lag must be >= 1");

    std::vector<double> series(static_cast<std::size_t>(t) * n);
    KahanSum corr_sum;
    long n_pairs = 0;

    for (int a = 0; a < model::kArms; ++a) {
        // Centered per-day values for this arm.
        for (int d = 0; d < t; ++d) {
            const std::size_t base = (static_cast<std::size_t>(a) * t + d) * n;
            KahanSum s;
            for (int u = 0; u < n; ++u) {
                double v = panel.value[base + u];
                if (panel.is_ratio()) v += panel.denom[base + u];
                series[static_cast<std::size_t>(d) * n + u] = v;
                s.add(v);
            }
            const double mean = s.value() / n;
            for (int u = 0; u < n; ++u) series[static_cast<std::size_t>(d) * n + u] -= mean;
        }
        std::vector<double> ss(static_cast<std::size_t>(t), 0.0);
        for (int d = 0; d < t; ++d) {
            KahanSum s;
            const double* col = series.data() + static_cast<std::size_t>(d) * n;
            for (int u = 0; u < n; ++u) s.add(col[u] * col[u]);
            ss[d] = s.value();
        }
        for (int d1 = 0; d1 < t; ++d1) {
            const int last = max_lag ? std::min(t - 1, d1 + *max_lag) : t - 1;
            for (int d2 = d1 + 1; d2 <= last; ++d2) {
                if (ss[d1] == 0.0 || ss[d2] == 0.0) continue;  // degenerate day
                const double* x = series.data() + static_cast<std::size_t>(d1) * n;
                const double* y = series.data() + static_cast<std::size_t>(d2) * n;
                KahanSum dot;
                for (int u = 0; u < n; ++u) dot.add(x[u] * y[u]);
                corr_sum.add(dot.value() / std::sqrt(ss[d1] * ss[d2]));
                ++n_pairs;
            }
        }
    }
    if (n_pairs == 0)
        throw estimation_error("estimate_utc_from_panel: no day pair with cross-user variance");

    UTCEstimate est;
    est.method = UtcMethod::panel;
    est.max_lag = max_lag;
    est.n_experiments = 1;
    est.weight = 2.0 * n;
    const double raw = corr_sum.value() / static_cast<double>(n_pairs);
    est.rho_hat = std::clamp(raw, 0.0, 1.0);
    est.clamped_fraction = est.rho_hat == raw ? 0.0 : 1.0;
    return est;
}

// ---------------------------------------------------------------------------
// Width-based estimation
// ---------------------------------------------------------------------------

// Solves the decay formula for rho from the CI widths at two distinct
// days. With r2 = (w2/w1)^2:
//   rho = (1/t2 - r2/t1) / (r2*(t1-1)/t1 - (t2-1)/t2)
// Returns the unclamped solution; nullopt when the denominator is
// degenerate (the pair carries no information about rho).
inline std::optional<double> utc_from_width_pair(int t1, double w1, int t2, double w2) {
    if (t1 < 1 || t2 < 1)
        throw std::domain_error("utc_from_width_pair: days must be >= 1");
    if (t1 >= t2)
        throw std::domain_error("utc_from_width_pair: need t1 < t2");
    if (!(w1 > 0.0) || !(w2 > 0.0))
        throw std::domain_error("utc_from_width_pair: widths must be positive");
    const double r2 = (w2 / w1) * (w2 / w1);
    const double a1 = static_cast<double>(t1);
    const double a2 = static_cast<double>(t2);
    const double den = r2 * (a1 - 1.0) / a1 - (a2 - 1.0) / a2;
    if (std::fabs(den) < 1e-12)
        return std::nullopt;
    return (1.0 / a2 - r2 / a1) / den;
}

// Averages utc_from_width_pair over all day pairs within each experiment,
// then averages the per-experiment means (so long experiments do not
// dominate). Raw pair estimates outside [0, 1] are clamped before
// averaging; the clamped fraction is reported.
inline UTCEstimate estimate_utc_from_widths(const std::vector<WidthSeries>& series) {
    if (series.empty())
        throw std::invalid_argument("estimate_utc_from_widths: no series given");
    KahanSum experiment_means;
    long n_experiments = 0;
    long n_pair = 0, n_clamped = 0;
    for (const auto& s : series) {
        s.validate();
        KahanSum pair_sum;
        long pairs = 0;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            for (std::size_t j = i + 1; j < s.points.size(); ++j) {
                const auto rho = utc_from_width_pair(s.points[i].day, s.points[i].width,
                                                     s.points[j].day, s.points[j].width);
                if (!rho) continue;
                const double clamped = std::clamp(*rho, 0.0, 1.0);
                if (clamped != *rho) ++n_clamped;
                pair_sum.add(clamped);
                ++pairs;
                ++n_pair;
            }
        }
        if (pairs == 0) continue;
        experiment_means.add(pair_sum.value() / static_cast<double>(pairs));
        ++n_experiments;
    }
    if (n_experiments == 0)
        throw estimation_error("estimate_utc_from_widths: no usable day pair in any series");

    UTCEstimate est;
    est.method = UtcMethod::widths;
    est.n_experiments = static_cast<int>(n_experiments);
    est.weight = static_cast<double>(n_experiments);
    est.rho_hat = std::clamp(experiment_means.value() / static_cast<double>(n_experiments), 0.0, 1.0);
    est.clamped_fraction = n_pair > 0 ? static_cast<double>(n_clamped) / static_cast<double>(n_pair) : 0.0;
    return est;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

// Weighted mean of UTC estimates, weights proportional to sample sizes.
// Defaults to each estimate's own weight. Compensated summation keeps the
// result independent of pooling order.
inline UTCEstimate pool_utc_estimates(const std::vector<UTCEstimate>& estimates,
                                      const std::vector<double>* weights = nullptr) {
    if (estimates.empty())
        throw std::invalid_argument("pool_utc_estimates: empty list");
    if (weights && weights->size() != estimates.size())
        throw std::invalid_argument("pool_utc_estimates: weight count mismatch");

    KahanSum num, den, clamped;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const double w = weights ? (*weights)[i] : estimates[i].weight;
        if (!(w > 0.0))
            throw std::invalid_argument("pool_utc_estimates: weights must be positive");
        num.add(w * estimates[i].rho_hat);
        clamped.add(w * estimates[i].clamped_fraction);
        den.add(w);
    }

    UTCEstimate out;
    out.rho_hat = std::clamp(num.value() / den.value(), 0.0, 1.0);
    out.clamped_fraction = clamped.value() / den.value();
    out.weight = den.value();
    out.method = estimates.front().method;
    out.max_lag = estimates.front().max_lag;
    out.n_experiments = 0;
    for (const auto& e : estimates) {
        out.n_experiments += e.n_experiments;
        if (e.method != out.method) out.method = UtcMethod::pooled;
        if (e.max_lag != out.max_lag) out.max_lag = std::nullopt;
    }
    return out;
}

}  // namespace abplan::utc
