#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "abplan/errors.hpp"
#include "abplan/formulas.hpp"
#include "abplan/math.hpp"
#include "abplan/model.hpp"
#include "abplan/rng.hpp"

namespace abplan::estimators {

enum class Method { plain, prepost };
enum class VarianceMethod { plugin, jackknife };

struct EffectEstimate {
    double theta_hat = 0.0;
    std::optional<double> variance_hat;  // Var(theta_hat) estimate, already /N
    int n_per_arm = 0;
    int t_days = 0;
    Method method = Method::plain;
    VarianceMethod variance_method = VarianceMethod::plugin;
    // Set when a degenerate pre-period (zero variance) forced the plain path.
    bool prepost_fallback = false;
};

struct ConfidenceInterval {
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;

    double width() const { return upper - lower; }
};

namespace detail {

using model::Arm;
using model::MetricPanel;

inline double arm_sum(const MetricPanel& p, int a, const std::vector<double>& v) {
    KahanSum s;
    const std::size_t base = static_cast<std::size_t>(a) * p.n_days * p.n_users;
    const std::size_t count = static_cast<std::size_t>(p.n_days) * p.n_users;
    for (std::size_t i = 0; i < count; ++i) s.add(v[base + i]);
    return s.value();
}

// Per-user time averages for one arm, plus their mean.
inline void user_averages(const MetricPanel& p, int a, const std::vector<double>& v,
                          std::vector<double>& out, double& mean) {
    out.assign(static_cast<std::size_t>(p.n_users), 0.0);
    for (int d = 0; d < p.n_days; ++d) {
        const std::size_t base = (static_cast<std::size_t>(a) * p.n_days + d) * p.n_users;
        for (int u = 0; u < p.n_users; ++u) out[u] += v[base + u];
    }
    KahanSum s;
    for (int u = 0; u < p.n_users; ++u) {
        out[u] /= p.n_days;
        s.add(out[u]);
    }
    mean = s.value() / p.n_users;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Point estimate
// ---------------------------------------------------------------------------

// Ratio treatment effect: mean_r / mean_c - 1 for an additive metric, the
// double ratio (mean_rn/mean_rd) / (mean_cn/mean_cd) - 1 for a ratio metric.
inline EffectEstimate estimate_theta(const model::MetricPanel& panel) {
    EffectEstimate est;
    est.n_per_arm = panel.n_users;
    est.t_days = panel.n_days;
    const int r = model::arm_index(model::Arm::treatment);
    const int c = model::arm_index(model::Arm::control);
    if (!panel.is_ratio()) {
        const double sum_r = detail::arm_sum(panel, r, panel.value);
        const double sum_c = detail::arm_sum(panel, c, panel.value);
        if (sum_c == 0.0)
            throw estimation_error("estimate_theta: control mean is zero");
        est.theta_hat = sum_r / sum_c - 1.0;
    } else {
        const double rn = detail::arm_sum(panel, r, panel.value);
        const double rd = detail::arm_sum(panel, r, panel.denom);
        const double cn = detail::arm_sum(panel, c, panel.value);
        const double cd = detail::arm_sum(panel, c, panel.denom);
        if (rd == 0.0 || cd == 0.0)
            throw estimation_error("estimate_theta: denominator average is zero");
        if (cn == 0.0)
            throw estimation_error("estimate_theta: control ratio is zero");
        est.theta_hat = (rn / rd) / (cn / cd) - 1.0;
    }
    return est;
}

// ---------------------------------------------------------------------------
// Plug-in variance
// ---------------------------------------------------------------------------

// Plug-in estimate of Var(theta_hat): the asymptotic variance formula with
// sample moments substituted. sigma_A^2 + sigma_E^2/T is estimated by the
// across-user sample variance of the user-level time averages, pooled
// across arms (the model shares variance components between arms); means
// stay per-arm. Returned on the /N scale.
inline double estimate_variance_plugin(const model::MetricPanel& panel) {
    const int n = panel.n_users;
    if (n < 2)
        throw estimation_error("estimate_variance_plugin: need at least 2 users per arm");
    const int r = model::arm_index(model::Arm::treatment);
    const int c = model::arm_index(model::Arm::control);

    if (!panel.is_ratio()) {
        std::vector<double> avg;
        double mean[model::kArms];
        double ss = 0.0;
        for (int a = 0; a < model::kArms; ++a) {
            detail::user_averages(panel, a, panel.value, avg, mean[a]);
            KahanSum s;
            for (int u = 0; u < n; ++u) {
                const double d = avg[u] - mean[a];
                s.add(d * d);
            }
            ss += s.value();
        }
        const double s2 = ss / (2.0 * n - 2.0);
        if (mean[r] == 0.0 || mean[c] == 0.0)
            throw estimation_error("estimate_variance_plugin: zero arm mean");
        const double lift = mean[r] / mean[c];
        const double v = lift * lift * s2 *
                         (1.0 / (mean[r] * mean[r]) + 1.0 / (mean[c] * mean[c]));
        return v / n;
    }

    // Ratio metric: pooled covariance block of the per-user time averages.
    std::vector<double> avg_n[model::kArms], avg_d[model::kArms];
    double mean_n[model::kArms], mean_d[model::kArms];
    double ss_n = 0.0, ss_d = 0.0, ss_nd = 0.0;
    for (int a = 0; a < model::kArms; ++a) {
        detail::user_averages(panel, a, panel.value, avg_n[a], mean_n[a]);
        detail::user_averages(panel, a, panel.denom, avg_d[a], mean_d[a]);
        KahanSum sn, sd, snd;
        for (int u = 0; u < n; ++u) {
            const double dn = avg_n[a][u] - mean_n[a];
            const double dd = avg_d[a][u] - mean_d[a];
            sn.add(dn * dn);
            sd.add(dd * dd);
            snd.add(dn * dd);
        }
        ss_n += sn.value();
        ss_d += sd.value();
        ss_nd += snd.value();
    }
    const double denom = 2.0 * n - 2.0;
    const double s2_n = ss_n / denom, s2_d = ss_d / denom, s_nd = ss_nd / denom;
    for (int a = 0; a < model::kArms; ++a)
        if (mean_n[a] == 0.0 || mean_d[a] == 0.0)
            throw estimation_error("estimate_variance_plugin: zero arm mean in ratio metric");
    const double theta1 = (mean_n[r] / mean_d[r]) / (mean_n[c] / mean_d[c]);
    double sum = 0.0;
    for (int a = 0; a < model::kArms; ++a)
        sum += s2_n / (mean_n[a] * mean_n[a]) + s2_d / (mean_d[a] * mean_d[a]) -
               2.0 * s_nd / (mean_n[a] * mean_d[a]);
    return theta1 * theta1 * sum / n;
}

// ---------------------------------------------------------------------------
// Jackknife variance
// ---------------------------------------------------------------------------

// Delete-one-bucket jackknife over z random user buckets per arm. Buckets
// are assigned by seeded hashing of the user index, so assignments are
// reproducible. Estimates Var(theta_hat) directly (the /N scale).
inline double estimate_variance_jackknife(const model::MetricPanel& panel, int z,
                                          std::uint64_t seed) {
    const int n = panel.n_users;
    if (z < 2)
        throw estimation_error("estimate_variance_jackknife: need at least 2 buckets");
    if (z > n)
        throw std::invalid_argument("estimate_variance_jackknife: more buckets than users");

    const int streams = panel.is_ratio() ? 2 : 1;
    // Per-(arm,bucket) totals over all days, for value and denominator.
    std::vector<double> totals(static_cast<std::size_t>(model::kArms) * z * streams, 0.0);
    double grand[model::kArms][2] = {{0.0, 0.0}, {0.0, 0.0}};

    for (int a = 0; a < model::kArms; ++a) {
        for (int u = 0; u < n; ++u) {
            const int b = static_cast<int>(
                derive_stream(seed, 0x1acc, (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(u)) %
                static_cast<std::uint64_t>(z));
            double sum_v = 0.0, sum_d = 0.0;
            for (int d = 0; d < panel.n_days; ++d) {
                const std::size_t i = (static_cast<std::size_t>(a) * panel.n_days + d) * n + u;
                sum_v += panel.value[i];
                if (streams == 2) sum_d += panel.denom[i];
            }
            totals[(static_cast<std::size_t>(a) * z + b) * streams] += sum_v;
            grand[a][0] += sum_v;
            if (streams == 2) {
                totals[(static_cast<std::size_t>(a) * z + b) * streams + 1] += sum_d;
                grand[a][1] += sum_d;
            }
        }
    }

    const int r = model::arm_index(model::Arm::treatment);
    const int c = model::arm_index(model::Arm::control);
    const auto theta_from = [&](double rv, double rd, double cv, double cd) {
        if (streams == 1) {
            if (cv == 0.0) throw estimation_error("estimate_variance_jackknife: zero control sum");
            return rv / cv - 1.0;
        }
        if (rd == 0.0 || cd == 0.0 || cv == 0.0)
            throw estimation_error("estimate_variance_jackknife: zero sum in a leave-out replicate");
        return (rv / rd) / (cv / cd) - 1.0;
    };

    std::vector<double> replicates(static_cast<std::size_t>(z));
    KahanSum mean_acc;
    for (int b = 0; b < z; ++b) {
        const std::size_t ri = (static_cast<std::size_t>(r) * z + b) * streams;
        const std::size_t ci = (static_cast<std::size_t>(c) * z + b) * streams;
        const double rv = grand[r][0] - totals[ri];
        const double cv = grand[c][0] - totals[ci];
        const double rd = streams == 2 ? grand[r][1] - totals[ri + 1] : 0.0;
        const double cd = streams == 2 ? grand[c][1] - totals[ci + 1] : 0.0;
        replicates[b] = theta_from(rv, rd, cv, cd);
        mean_acc.add(replicates[b]);
    }
    const double mean = mean_acc.value() / z;
    KahanSum ss;
    for (int b = 0; b < z; ++b) {
        const double d = replicates[b] - mean;
        ss.add(d * d);
    }
    return (static_cast<double>(z) - 1.0) / z * ss.value();
}

// ---------------------------------------------------------------------------
// Confidence interval
// ---------------------------------------------------------------------------

// theta_hat +/- z_{1-alpha/2} * sqrt(variance_hat).
inline ConfidenceInterval confidence_interval(const EffectEstimate& est, double alpha) {
    if (!est.variance_hat)
        throw estimation_error("confidence_interval: variance not set");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("confidence_interval: alpha must be in (0, 1)");
    const double half = z_two_sided(alpha) * std::sqrt(*est.variance_hat);
    return ConfidenceInterval{est.theta_hat - half, est.theta_hat + half, alpha};
}

// Plain estimate with its plug-in variance attached.
inline EffectEstimate estimate_plain(const model::MetricPanel& panel) {
    EffectEstimate est = estimate_theta(panel);
    est.variance_hat = estimate_variance_plugin(panel);
    return est;
}

// ---------------------------------------------------------------------------
// Pre-post estimator
// ---------------------------------------------------------------------------

// Joint-likelihood pre-post estimator for additive metrics. Two-step
// plug-in: the covariance block of (X_u, a-bar_u) is estimated by pooled
// within-arm sample moments, then the treatment and control means are
// regression-adjusted by the pre-period imbalance:
//   m_j = abar_j - (lambda*sigma(T)/sigma_X) * (Xbar_j - Xbar)
//   theta_PP = m_r / m_c - 1
// The variance estimate is the pre-post asymptotic variance with the same
// plug-ins. A pre-period with zero variance falls back to the plain
// estimator with `prepost_fallback` set.
inline EffectEstimate estimate_theta_prepost(const model::MetricPanel& panel,
                                             const model::PrePeriodPanel& pre) {
    if (panel.is_ratio())
        throw std::invalid_argument("estimate_theta_prepost: additive metrics only");
    if (pre.n_users != panel.n_users)
        throw estimation_error("estimate_theta_prepost: pre-period covers a different user set");
    const int n = panel.n_users;
    if (n < 2)
        throw estimation_error("estimate_theta_prepost: need at least 2 users per arm");

    std::vector<double> avg[model::kArms];
    double post_mean[model::kArms], pre_mean[model::kArms];
    for (int a = 0; a < model::kArms; ++a) {
        detail::user_averages(panel, a, panel.value, avg[a], post_mean[a]);
        KahanSum s;
        for (int u = 0; u < n; ++u) s.add(pre.pre_mean[static_cast<std::size_t>(a) * n + u]);
        pre_mean[a] = s.value() / n;
    }
    const double m_x = (pre_mean[0] + pre_mean[1]) / 2.0;

    // Pooled within-arm second moments of (X, abar).
    double ss_xx = 0.0, ss_aa = 0.0, ss_xa = 0.0;
    for (int a = 0; a < model::kArms; ++a) {
        KahanSum xx, aa, xa;
        for (int u = 0; u < n; ++u) {
            const double dx = pre.pre_mean[static_cast<std::size_t>(a) * n + u] - pre_mean[a];
            const double da = avg[a][u] - post_mean[a];
            xx.add(dx * dx);
            aa.add(da * da);
            xa.add(dx * da);
        }
        ss_xx += xx.value();
        ss_aa += aa.value();
        ss_xa += xa.value();
    }
    const double denom = 2.0 * n - 2.0;
    const double var_x = ss_xx / denom;
    const double var_a = ss_aa / denom;
    const double cov_xa = ss_xa / denom;

    if (var_x == 0.0) {
        EffectEstimate est = estimate_plain(panel);
        est.prepost_fallback = true;
        return est;
    }

    const double slope = cov_xa / var_x;  // = lambda * sigma(T) / sigma_X
    double lambda = var_a > 0.0 ? cov_xa / std::sqrt(var_x * var_a) : 0.0;
    lambda = std::clamp(std::fabs(lambda), 0.0, 1.0);

    const int r = model::arm_index(model::Arm::treatment);
    const int c = model::arm_index(model::Arm::control);
    const double m_r = post_mean[r] - slope * (pre_mean[r] - m_x);
    const double m_c = post_mean[c] - slope * (pre_mean[c] - m_x);
    if (m_c == 0.0)
        throw estimation_error("estimate_theta_prepost: adjusted control mean is zero");

    EffectEstimate est;
    est.n_per_arm = n;
    est.t_days = panel.n_days;
    est.method = Method::prepost;
    est.theta_hat = m_r / m_c - 1.0;
    est.variance_hat = formulas::prepost_variance(est.theta_hat, var_a, lambda, m_r, m_c) / n;
    return est;
}

// Pre-post estimator on bucket-aggregated data: buckets act as the
// sampling units, which restores approximate normality for heavy-tailed
// metrics. With z == n this is exactly the user-level estimator.
inline EffectEstimate estimate_theta_prepost_bucketed(const model::MetricPanel& bucketed,
                                                      const model::PrePeriodPanel& bucketed_pre) {
    return estimate_theta_prepost(bucketed, bucketed_pre);
}

}  // namespace abplan::estimators
