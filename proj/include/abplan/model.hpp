#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "abplan/formulas.hpp"
#include "abplan/rng.hpp"

namespace abplan::model {

inline constexpr int kArms = 2;

enum class Arm { treatment = 0, control = 1 };

inline int arm_index(Arm a) { return static_cast<int>(a); }

enum class Diversion { user, user_day };

enum class ErrorDistribution { gaussian, shifted_lognormal };

// ---------------------------------------------------------------------------
// Parameters and designs
// ---------------------------------------------------------------------------

// Ground-truth generative parameters. Control-arm daily means cover the
// pre-period followed by the experiment period; treatment means are the
// control means scaled by (theta + 1) on experiment days, so the treatment
// effect is constant over time. Ratio metrics take their (constant) means
// from ratio_part and scale only the numerator by (theta + 1).
struct ModelParams {
    double theta = 0.0;
    std::vector<double> daily_means_c;  // days -T0..-1 then 1..T
    formulas::VarianceComponents sigma;
    std::optional<formulas::RatioVarianceComponents> ratio_part;
    ErrorDistribution error_distribution = ErrorDistribution::gaussian;

    bool is_ratio() const { return ratio_part.has_value(); }
};

// Convenience daily-mean sequence: base * (1 + amplitude * sin(2*pi*t/7))
// evaluated at t = -t0_days..-1 then 1..t_days.
inline std::vector<double> weekly_sinusoid_means(double base, double amplitude,
                                                 int t_days, int t0_days = 0) {
    if (!(base > 0.0))
        throw std::invalid_argument("weekly_sinusoid_means: base must be positive");
    if (!(std::fabs(amplitude) < 1.0))
        throw std::invalid_argument("weekly_sinusoid_means: |amplitude| must be < 1");
    if (t_days < 1 || t0_days < 0)
        throw std::invalid_argument("weekly_sinusoid_means: bad day counts");
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(t_days + t0_days));
    const double w = 2.0 * 3.14159265358979323846 / 7.0;
    for (int t = -t0_days; t <= -1; ++t)
        means.push_back(base * (1.0 + amplitude * std::sin(w * t)));
    for (int t = 1; t <= t_days; ++t)
        means.push_back(base * (1.0 + amplitude * std::sin(w * t)));
    return means;
}

struct ExperimentDesign {
    int n_per_arm = 0;
    int t_days = 0;
    int t0_days = 0;  // 0 = no pre-period
    Diversion diversion = Diversion::user;
    std::optional<int> buckets;

    void validate() const {
        if (n_per_arm < 2)
            throw std::invalid_argument("ExperimentDesign: n_per_arm must be >= 2");
        if (t_days < 1)
            throw std::invalid_argument("ExperimentDesign: t_days must be >= 1");
        if (t0_days < 0)
            throw std::invalid_argument("ExperimentDesign: t0_days must be >= 0");
        if (buckets) {
            if (*buckets < 2)
                throw std::invalid_argument("ExperimentDesign: buckets must be >= 2");
            if (*buckets > n_per_arm)
                throw std::invalid_argument("ExperimentDesign: buckets must be <= n_per_arm");
        }
        if (diversion == Diversion::user_day && t0_days > 0)
            throw std::invalid_argument(
                "ExperimentDesign: a user-day experiment has no persistent users, "
                "so a pre-period is meaningless (t0_days must be 0)");
    }
};

// ---------------------------------------------------------------------------
// Panels
// ---------------------------------------------------------------------------

// Rectangular user x day x arm panel. Values are stored day-major per arm
// so per-day passes over users are contiguous. For ratio metrics `value`
// holds the numerator and `denom` the denominator.
struct MetricPanel {
    int n_users = 0;
    int n_days = 0;
    std::vector<double> value;
    std::vector<double> denom;

    bool is_ratio() const { return !denom.empty(); }

    std::size_t cell(Arm a, int day_index, int user) const {
        return (static_cast<std::size_t>(arm_index(a)) * n_days + day_index) * n_users + user;
    }
    double at(Arm a, int day_index, int user) const { return value[cell(a, day_index, user)]; }
    double denom_at(Arm a, int day_index, int user) const { return denom[cell(a, day_index, user)]; }
};

// Per-user pre-period averages X_uj (one value per user per arm).
struct PrePeriodPanel {
    int n_users = 0;
    int t0_days = 0;
    std::vector<double> pre_mean;  // [arm][user]

    std::size_t cell(Arm a, int user) const {
        return static_cast<std::size_t>(arm_index(a)) * n_users + user;
    }
    double at(Arm a, int user) const { return pre_mean[cell(a, user)]; }
};

struct SimulatedExperiment {
    MetricPanel panel;
    std::optional<PrePeriodPanel> pre;
};

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace detail {

// Draws a mean-zero error with the configured variance. The lognormal
// variant is exp(mu + Z) - exp(mu + 1/2) with mu chosen so the variance
// matches sigma_e2 (shape parameter fixed at 1).
struct ErrorSampler {
    ErrorDistribution dist;
    double sigma_e;
    double log_mu = 0.0;
    double log_shift = 0.0;

    ErrorSampler(ErrorDistribution d, double sigma_e2) : dist(d), sigma_e(std::sqrt(sigma_e2)) {
        if (dist == ErrorDistribution::shifted_lognormal && sigma_e2 > 0.0) {
            log_mu = std::log(sigma_e) - 0.5 * (std::log(std::expm1(1.0)) + 1.0);
            log_shift = std::exp(log_mu + 0.5);
        }
    }

    double draw(Rng& rng) const {
        if (sigma_e == 0.0) {
            rng.next_u64();  // keep streams aligned across configurations
            return 0.0;
        }
        if (dist == ErrorDistribution::gaussian)
            return sigma_e * rng.next_gaussian();
        return std::exp(log_mu + rng.next_gaussian()) - log_shift;
    }
};

// Correlated Gaussian pair with the given variances and covariance.
struct PairSampler {
    double sn, sd, corr, resid;

    PairSampler(double var_n, double var_d, double cov)
        : sn(std::sqrt(var_n)), sd(std::sqrt(var_d)) {
        corr = (sn > 0.0 && sd > 0.0) ? cov / (sn * sd) : 0.0;
        corr = std::clamp(corr, -1.0, 1.0);
        resid = std::sqrt(std::max(0.0, 1.0 - corr * corr));
    }

    void draw(Rng& rng, double& out_n, double& out_d) const {
        const double z1 = rng.next_gaussian();
        const double z2 = rng.next_gaussian();
        out_n = sn * z1;
        out_d = sd * (corr * z1 + resid * z2);
    }
};

inline constexpr std::uint64_t kArmStreamTag[kArms] = {0x7265617 /*treat*/, 0xc0b01 /*control*/};

}  // namespace detail

// Generates a full experiment from the two-component mixed-effects model.
//
// Under user diversion each user's random effect is drawn once and reused
// on every day including the pre-period; daily errors are independent
// across days. Under user-day diversion the random effect is resampled
// every day, which preserves the one-day marginal distribution while
// making days independent (a 1-day user experiment and a 1-day user-day
// experiment are identical).
//
// Each user's values come from a stream keyed by (seed, arm, user), so the
// output is reproducible and independent of generation order.
inline SimulatedExperiment simulate(const ModelParams& params, const ExperimentDesign& design,
                                    std::uint64_t seed) {
    design.validate();
    params.sigma.validate();
    if (!(params.theta > -1.0))
        throw std::invalid_argument("ModelParams: theta must be > -1");

    const int n = design.n_per_arm;
    const int t = design.t_days;
    const int t0 = design.t0_days;

    SimulatedExperiment out;
    out.panel.n_users = n;
    out.panel.n_days = t;
    out.panel.value.resize(static_cast<std::size_t>(kArms) * t * n);
    if (t0 > 0) {
        out.pre = PrePeriodPanel{};
        out.pre->n_users = n;
        out.pre->t0_days = t0;
        out.pre->pre_mean.resize(static_cast<std::size_t>(kArms) * n);
    }

    if (params.is_ratio()) {
        if (t0 > 0)
            throw std::invalid_argument("simulate: pre-periods are supported for additive metrics only");
        if (params.error_distribution != ErrorDistribution::gaussian)
            throw std::invalid_argument("simulate: ratio metrics use correlated Gaussian draws");
        const auto& rp = *params.ratio_part;
        rp.validate();
        if (!(rp.mbar_n > 0.0 && rp.mbar_d > 0.0))
            throw std::invalid_argument("simulate: ratio-metric means must be strictly positive");
        out.panel.denom.resize(out.panel.value.size());

        const detail::PairSampler alpha_pair(rp.sigma_a2_n, rp.sigma_a2_d, rp.sigma_a_nd);
        const detail::PairSampler err_pair(rp.sigma_e2_n, rp.sigma_e2_d, rp.sigma_e_nd);
        const bool fresh_alpha = design.diversion == Diversion::user_day;

        for (int a = 0; a < kArms; ++a) {
            const double m_n = (a == arm_index(Arm::treatment) ? (params.theta + 1.0) : 1.0) * rp.mbar_n;
            const double m_d = rp.mbar_d;
            for (int u = 0; u < n; ++u) {
                Rng rng(derive_stream(seed, detail::kArmStreamTag[a], static_cast<std::uint64_t>(u)));
                double an = 0.0, ad = 0.0;
                if (!fresh_alpha) alpha_pair.draw(rng, an, ad);
                for (int d = 0; d < t; ++d) {
                    if (fresh_alpha) alpha_pair.draw(rng, an, ad);
                    double en, ed;
                    err_pair.draw(rng, en, ed);
                    const std::size_t c = (static_cast<std::size_t>(a) * t + d) * n + u;
                    out.panel.value[c] = m_n + an + en;
                    out.panel.denom[c] = m_d + ad + ed;
                }
            }
        }
        return out;
    }

    // Additive metric.
    if (static_cast<int>(params.daily_means_c.size()) != t0 + t)
        throw std::invalid_argument("ModelParams: daily_means_c must cover t0_days + t_days days");
    for (double m : params.daily_means_c)
        if (!(m > 0.0))
            throw std::invalid_argument("ModelParams: daily means must be strictly positive");

    const double sigma_a = std::sqrt(params.sigma.sigma_a2);
    const detail::ErrorSampler err(params.error_distribution, params.sigma.sigma_e2);
    const bool fresh_alpha = design.diversion == Diversion::user_day;

    for (int a = 0; a < kArms; ++a) {
        const double lift = a == arm_index(Arm::treatment) ? params.theta + 1.0 : 1.0;
        for (int u = 0; u < n; ++u) {
            Rng rng(derive_stream(seed, detail::kArmStreamTag[a], static_cast<std::uint64_t>(u)));
            double alpha = fresh_alpha ? 0.0 : sigma_a * rng.next_gaussian();
            if (t0 > 0) {
                // No treatment before day 1: both arms share the control means.
                double sum = 0.0;
                for (int d = 0; d < t0; ++d)
                    sum += params.daily_means_c[d] + alpha + err.draw(rng);
                out.pre->pre_mean[static_cast<std::size_t>(a) * n + u] = sum / t0;
            }
            for (int d = 0; d < t; ++d) {
                if (fresh_alpha) alpha = sigma_a * rng.next_gaussian();
                out.panel.value[(static_cast<std::size_t>(a) * t + d) * n + u] =
                    lift * params.daily_means_c[t0 + d] + alpha + err.draw(rng);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Bucket aggregation
// ---------------------------------------------------------------------------

struct BucketedExperiment {
    MetricPanel panel;
    std::optional<PrePeriodPanel> pre;
};

// Randomly partitions each arm's users into z equal-size buckets (shuffle
// then round-robin) and sums values within a bucket per day. The same
// users share a bucket on every day and in the pre-period. With z == n the
// output is the input up to relabeling.
inline BucketedExperiment aggregate_buckets(const MetricPanel& panel, const PrePeriodPanel* pre,
                                            int z, std::uint64_t seed) {
    const int n = panel.n_users;
    const int t = panel.n_days;
    if (z < 2)
        throw std::invalid_argument("aggregate_buckets: need at least 2 buckets");
    if (z > n)
        throw std::invalid_argument("aggregate_buckets: more buckets than users");
    if (pre && pre->n_users != n)
        throw std::invalid_argument("aggregate_buckets: pre-period user count mismatch");

    BucketedExperiment out;
    out.panel.n_users = z;
    out.panel.n_days = t;
    out.panel.value.assign(static_cast<std::size_t>(kArms) * t * z, 0.0);
    if (panel.is_ratio())
        out.panel.denom.assign(out.panel.value.size(), 0.0);
    if (pre) {
        out.pre = PrePeriodPanel{};
        out.pre->n_users = z;
        out.pre->t0_days = pre->t0_days;
        out.pre->pre_mean.assign(static_cast<std::size_t>(kArms) * z, 0.0);
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    for (int a = 0; a < kArms; ++a) {
        // Fisher-Yates shuffle, then user order[i] goes to bucket i % z.
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_stream(seed, 0xb0cce7, static_cast<std::uint64_t>(a)));
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[i], order[j]);
        }
        for (int i = 0; i < n; ++i) {
            const int u = order[i];
            const int b = i % z;
            for (int d = 0; d < t; ++d) {
                const std::size_t src = (static_cast<std::size_t>(a) * t + d) * n + u;
                const std::size_t dst = (static_cast<std::size_t>(a) * t + d) * z + b;
                out.panel.value[dst] += panel.value[src];
                if (panel.is_ratio()) out.panel.denom[dst] += panel.denom[src];
            }
            if (pre)
                out.pre->pre_mean[static_cast<std::size_t>(a) * z + b] +=
                    pre->pre_mean[static_cast<std::size_t>(a) * n + u];
        }
    }
    return out;
}

}  // namespace abplan::model
