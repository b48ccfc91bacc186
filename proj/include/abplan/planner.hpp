#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "abplan/formulas.hpp"

namespace abplan::planner {

// ---------------------------------------------------------------------------
// Duration planning
// ---------------------------------------------------------------------------

struct PlanQuery {
    formulas::Utc rho;
    double day1_width = 0.0;    // CI width at T = 1 for the contemplated N
    double target_width = 0.0;  // desired CI width
    int t0_days = 0;            // available pre-period days, 0 = none
    int max_t = 365;            // planning horizon

    void validate() const {
        if (!(day1_width > 0.0) || !(target_width > 0.0))
            throw std::domain_error("PlanQuery: widths must be positive");
        if (max_t < 1)
            throw std::domain_error("PlanQuery: max_t must be >= 1");
        if (t0_days < 0)
            throw std::domain_error("PlanQuery: t0_days must be >= 0");
    }
};

enum class PlanStatus {
    found,           // smallest feasible T located
    beyond_horizon,  // reachable in principle, but not within max_t days
    infeasible       // below the limiting width; no duration suffices
};

struct DurationPlan {
    PlanStatus status = PlanStatus::infeasible;
    int t = 0;                    // valid when status == found
    double achieved_width = 0.0;  // predicted width at t
    double limiting_width = 0.0;  // day1_width times the T->infinity decay factor
};

namespace detail {

inline double decay_factor(int t, const PlanQuery& q) {
    return q.t0_days > 0 ? formulas::ci_width_ratio_prepost(t, q.t0_days, q.rho)
                         : formulas::ci_width_ratio(t, q.rho);
}

inline double limiting_factor(const PlanQuery& q) {
    const double floor_plain = formulas::limiting_width_ratio(q.rho);
    if (q.t0_days == 0 || q.rho.rho == 0.0)
        return floor_plain;
    // lambda(T) -> lambda_inf: only the pre-period factor remains.
    const double noise = (1.0 - q.rho.rho) / q.rho.rho;
    const double lam_inf = 1.0 / std::sqrt(1.0 + noise / q.t0_days);
    const double lam_1 = formulas::pre_post_correlation(1, q.t0_days, q.rho);
    return floor_plain * std::sqrt((1.0 - lam_inf * lam_inf) / (1.0 - lam_1 * lam_1));
}

}  // namespace detail

// Smallest integer T (whole days, rounded up) whose predicted width meets
// the target; uses the pre-post decay curve when t0_days > 0. Targets
// below the limiting width are reported infeasible together with that
// limit, so the caller can re-plan the sample size instead.
inline DurationPlan required_duration(const PlanQuery& q) {
    q.validate();
    if (q.t0_days > 0 && q.rho.rho == 1.0)
        throw std::domain_error("required_duration: rho = 1 with a pre-period is degenerate");

    DurationPlan plan;
    plan.limiting_width = q.day1_width * detail::limiting_factor(q);
    for (int t = 1; t <= q.max_t; ++t) {
        const double width = q.day1_width * detail::decay_factor(t, q);
        if (width <= q.target_width) {
            plan.status = PlanStatus::found;
            plan.t = t;
            plan.achieved_width = width;
            return plan;
        }
    }
    plan.status = q.target_width <= plan.limiting_width ? PlanStatus::infeasible
                                                        : PlanStatus::beyond_horizon;
    return plan;
}

// Factor by which N must grow to move from the current width to the
// target at fixed duration: (current/target)^2, by the 1/sqrt(N) law.
inline double required_size_multiplier(double current_width, double target_width) {
    if (!(current_width > 0.0) || !(target_width > 0.0))
        throw std::domain_error("required_size_multiplier: widths must be positive");
    const double f = current_width / target_width;
    return f * f;
}

// ---------------------------------------------------------------------------
// User vs user-day design comparison
// ---------------------------------------------------------------------------

// Asymptotic standard errors per duration, all normalized so the plain
// user-experiment SE at T = 1 equals 1:
//   user plain:    sqrt(1/T + rho*(T-1)/T)
//   user pre-post: sqrt((1/T + rho*(T-1)/T) * (1 - lambda(T)^2))
//   user-day:      sqrt(1/T)
// crossover_t is the first duration where the user-day design strictly
// beats the user design with pre-period adjustment (ties favor pre-post).
struct DesignComparison {
    double rho = 0.0;
    int t0_days = 0;
    std::vector<double> se_user_plain;    // index T-1
    std::vector<double> se_user_prepost;  // empty when rho == 1 (undefined)
    std::vector<double> se_userday;
    std::optional<int> crossover_t;

    bool prepost_defined() const { return !se_user_prepost.empty(); }
};

inline DesignComparison compare_designs(formulas::Utc rho, int t0_days, int max_t) {
    if (max_t < 1)
        throw std::domain_error("compare_designs: max_t must be >= 1");
    if (t0_days < 0)
        throw std::domain_error("compare_designs: t0_days must be >= 0");

    DesignComparison cmp;
    cmp.rho = rho.rho;
    cmp.t0_days = t0_days;
    cmp.se_user_plain.reserve(max_t);
    cmp.se_userday.reserve(max_t);
    const bool prepost_ok = rho.rho < 1.0;
    if (prepost_ok) cmp.se_user_prepost.reserve(max_t);

    for (int t = 1; t <= max_t; ++t) {
        const double plain = formulas::ci_width_ratio(t, rho);
        cmp.se_user_plain.push_back(plain);
        cmp.se_userday.push_back(1.0 / std::sqrt(static_cast<double>(t)));
        if (prepost_ok) {
            const double lam = t0_days > 0 ? formulas::pre_post_correlation(t, t0_days, rho) : 0.0;
            const double pp = plain * std::sqrt(1.0 - lam * lam);
            cmp.se_user_prepost.push_back(pp);
            if (!cmp.crossover_t && cmp.se_userday.back() < pp)
                cmp.crossover_t = t;
        }
    }
    return cmp;
}

// ---------------------------------------------------------------------------
// Power curve
// ---------------------------------------------------------------------------

struct PowerPoint {
    int t = 0;
    double predicted_width = 0.0;
};

// Predicted CI width per duration for the query's N: day1_width times the
// decay factor (pre-post variant when a pre-period is available).
inline std::vector<PowerPoint> power_curve(const PlanQuery& q) {
    q.validate();
    if (q.t0_days > 0 && q.rho.rho == 1.0)
        throw std::domain_error("power_curve: rho = 1 with a pre-period is degenerate");
    std::vector<PowerPoint> curve;
    curve.reserve(q.max_t);
    for (int t = 1; t <= q.max_t; ++t)
        curve.push_back({t, q.day1_width * detail::decay_factor(t, q)});
    return curve;
}

}  // namespace abplan::planner
