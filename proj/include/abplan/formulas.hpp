#pragma once

#include <cmath>
#include <stdexcept>

namespace abplan::formulas {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// User-specific temporal correlation: the correlation between the same
// user's metric values on two distinct days. Controls how quickly a CI
// shrinks as the experiment runs longer.
struct Utc {
    double rho;

    explicit Utc(double r) : rho(r) {
        if (!(r >= 0.0 && r <= 1.0))
            throw std::domain_error("Utc: rho must be in [0, 1]");
    }
};

// Variance decomposition of a user's daily metric value: a persistent
// per-user component plus an independent daily fluctuation.
struct VarianceComponents {
    double sigma_a2 = 0.0;  // variance of the user random effect
    double sigma_e2 = 0.0;  // variance of the daily error

    void validate() const {
        if (!(sigma_a2 >= 0.0) || !(sigma_e2 >= 0.0))
            throw std::domain_error("VarianceComponents: variances must be nonnegative");
        if (!(sigma_a2 + sigma_e2 > 0.0))
            throw std::domain_error("VarianceComponents: total variance must be positive");
    }
};

// Joint variance structure of the numerator and denominator of a ratio
// metric, plus their superpopulation means.
struct RatioVarianceComponents {
    double sigma_a2_n = 0.0;  // random-effect variances and covariance
    double sigma_a2_d = 0.0;
    double sigma_a_nd = 0.0;
    double sigma_e2_n = 0.0;  // daily-error variances and covariance
    double sigma_e2_d = 0.0;
    double sigma_e_nd = 0.0;
    double mbar_n = 0.0;      // superpopulation means
    double mbar_d = 0.0;

    void validate() const {
        check_block(sigma_a2_n, sigma_a2_d, sigma_a_nd, "random-effect");
        check_block(sigma_e2_n, sigma_e2_d, sigma_e_nd, "error");
        if (mbar_d == 0.0)
            throw std::domain_error("RatioVarianceComponents: mbar_d must be nonzero");
    }

private:
    static void check_block(double vn, double vd, double cov, const char* which) {
        if (!(vn >= 0.0) || !(vd >= 0.0))
            throw std::domain_error(std::string("RatioVarianceComponents: ") + which +
                                    " variances must be nonnegative");
        const double det = vn * vd - cov * cov;
        const double scale = vn * vd + cov * cov;
        if (det < -1e-12 * (scale > 1.0 ? scale : 1.0))
            throw std::domain_error(std::string("RatioVarianceComponents: ") + which +
                                    " covariance block is not positive semidefinite");
    }
};

// ---------------------------------------------------------------------------
// CI width decay
// ---------------------------------------------------------------------------

// |CI(T;N)| / |CI(1;N)| for a user experiment of duration T:
//   sqrt(1/T + rho * (T-1)/T)
// Bounded below by 1/sqrt(T) (fresh users every day) and above by 1
// (perfectly persistent users).
inline double ci_width_ratio(int t_days, Utc rho) {
    if (t_days < 1)
        throw std::domain_error("ci_width_ratio: T must be >= 1");
    const double t = static_cast<double>(t_days);
    return std::sqrt(1.0 / t + rho.rho * (t - 1.0) / t);
}

// Limit of ci_width_ratio as T grows: sqrt(rho). With persistent users the
// CI never shrinks below this fraction of the day-1 width, no matter how
// long the experiment runs.
inline double limiting_width_ratio(Utc rho) {
    return std::sqrt(rho.rho);
}

// Correlation lambda(T) between a user's pre-period average (T0 days) and
// their in-experiment average (T days):
//   1 / ( sqrt(1 + (1-rho)/(rho*T0)) * sqrt(1 + (1-rho)/(rho*T)) )
// Defined as 0 when rho is 0: with no persistent component the pre-period
// carries no information. Equals rho when T = T0 = 1.
inline double pre_post_correlation(int t_days, int t0_days, Utc rho) {
    if (t_days < 1)
        throw std::domain_error("pre_post_correlation: T must be >= 1");
    if (t0_days < 1)
        throw std::domain_error("pre_post_correlation: T0 must be >= 1");
    if (rho.rho == 0.0)
        return 0.0;
    const double noise = (1.0 - rho.rho) / rho.rho;
    return 1.0 / (std::sqrt(1.0 + noise / static_cast<double>(t0_days)) *
                  std::sqrt(1.0 + noise / static_cast<double>(t_days)));
}

// |CI(T;N)| / |CI(1;N)| when the estimator additionally adjusts for T0 days
// of pre-period data, both widths taken from the adjusted estimator:
//   sqrt(1/T + rho*(T-1)/T) * sqrt((1 - lambda(T)^2) / (1 - lambda(1)^2))
// rho = 1 is rejected: lambda(1) = 1 makes the day-1 normalizer zero (the
// user effect would be known exactly from any pre-period).
inline double ci_width_ratio_prepost(int t_days, int t0_days, Utc rho) {
    if (rho.rho == 1.0)
        throw std::domain_error(
            "ci_width_ratio_prepost: rho = 1 is degenerate (zero day-1 pre-post width)");
    const double lam_t = pre_post_correlation(t_days, t0_days, rho);
    const double lam_1 = pre_post_correlation(1, t0_days, rho);
    return ci_width_ratio(t_days, rho) *
           std::sqrt((1.0 - lam_t * lam_t) / (1.0 - lam_1 * lam_1));
}

// ---------------------------------------------------------------------------
// Asymptotic variances of the ratio treatment effect estimator
// ---------------------------------------------------------------------------

// sqrt(N)-scale asymptotic variance of theta_hat for an additive metric:
//   (theta+1)^2 * (sigma_A^2 + sigma_E^2 / T) * (mbar_r^-2 + mbar_c^-2)
inline double asymptotic_variance_additive(double theta, const VarianceComponents& sigma,
                                           double mbar_r, double mbar_c, int t_days) {
    sigma.validate();
    if (t_days < 1)
        throw std::domain_error("asymptotic_variance_additive: T must be >= 1");
    if (mbar_r == 0.0 || mbar_c == 0.0)
        throw std::domain_error("asymptotic_variance_additive: arm means must be nonzero");
    const double sigma2_t = sigma.sigma_a2 + sigma.sigma_e2 / static_cast<double>(t_days);
    const double lift = theta + 1.0;
    return lift * lift * sigma2_t * (1.0 / (mbar_r * mbar_r) + 1.0 / (mbar_c * mbar_c));
}

// sqrt(N)-scale asymptotic variance of theta_hat for a ratio metric: the
// delta-method sum over both arms of the numerator, denominator, and
// cross-covariance terms, each with its error part time-averaged to
// sigma^2/T.
inline double asymptotic_variance_ratio_metric(double theta,
                                               const RatioVarianceComponents& comps_r,
                                               const RatioVarianceComponents& comps_c,
                                               int t_days) {
    if (t_days < 1)
        throw std::domain_error("asymptotic_variance_ratio_metric: T must be >= 1");
    const double t = static_cast<double>(t_days);
    const auto arm_term = [&](const RatioVarianceComponents& x) {
        x.validate();
        if (x.mbar_n == 0.0)
            throw std::domain_error("asymptotic_variance_ratio_metric: means must be nonzero");
        const double vn = x.sigma_a2_n + x.sigma_e2_n / t;
        const double vd = x.sigma_a2_d + x.sigma_e2_d / t;
        const double vnd = x.sigma_a_nd + x.sigma_e_nd / t;
        return vn / (x.mbar_n * x.mbar_n) + vd / (x.mbar_d * x.mbar_d) -
               2.0 * vnd / (x.mbar_n * x.mbar_d);
    };
    const double lift = theta + 1.0;
    return lift * lift * (arm_term(comps_r) + arm_term(comps_c));
}

// ---------------------------------------------------------------------------
// UTC from variance components
// ---------------------------------------------------------------------------

// rho = sigma_A^2 / (sigma_A^2 + sigma_E^2).
inline Utc utc_additive(const VarianceComponents& sigma) {
    sigma.validate();
    return Utc(sigma.sigma_a2 / (sigma.sigma_a2 + sigma.sigma_e2));
}

// Ratio-metric analogue: correlation of the summed numerator+denominator
// value across days,
//   rho = (sA_n + sA_d + 2 sA_nd) / (sA_n + sA_d + 2 sA_nd + sE_n + sE_d + 2 sE_nd)
inline Utc utc_ratio_metric(const RatioVarianceComponents& comps) {
    comps.validate();
    double persistent = comps.sigma_a2_n + comps.sigma_a2_d + 2.0 * comps.sigma_a_nd;
    const double noise = comps.sigma_e2_n + comps.sigma_e2_d + 2.0 * comps.sigma_e_nd;
    if (persistent < 0.0)
        persistent = 0.0;  // PSD guarantees >= 0 up to rounding
    const double total = persistent + noise;
    if (!(total > 0.0))
        throw std::domain_error("utc_ratio_metric: total variance must be positive");
    return Utc(persistent / total);
}

// ---------------------------------------------------------------------------
// Pre-post estimator variance
// ---------------------------------------------------------------------------

// sqrt(N)-scale asymptotic variance of the pre-post estimator:
//   sigma^2(T) (theta+1)^2 [ (1 - lambda^2/2)(mbar_r^-2 + mbar_c^-2)
//                            - lambda^2 / (mbar_r * mbar_c) ]
// where sigma^2(T) is the variance of a user's T-day average and lambda the
// pre-post correlation. Under the null with equal means this is exactly
// (1 - lambda^2) times the unadjusted variance.
inline double prepost_variance(double theta, double sigma2_t, double lambda,
                               double mbar_r, double mbar_c) {
    if (mbar_r == 0.0 || mbar_c == 0.0)
        throw std::domain_error("prepost_variance: arm means must be nonzero");
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::domain_error("prepost_variance: lambda must be in [0, 1]");
    if (!(sigma2_t >= 0.0))
        throw std::domain_error("prepost_variance: sigma2_t must be nonnegative");
    const double lift = theta + 1.0;
    const double lam2 = lambda * lambda;
    return sigma2_t * lift * lift *
           ((1.0 - lam2 / 2.0) * (1.0 / (mbar_r * mbar_r) + 1.0 / (mbar_c * mbar_c)) -
            lam2 / (mbar_r * mbar_c));
}

// Asymptotic relative efficiency of the unadjusted estimator versus the
// pre-post estimator under the null: 1 - lambda^2.
inline double relative_efficiency(double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::domain_error("relative_efficiency: lambda must be in [0, 1]");
    return 1.0 - lambda * lambda;
}

}  // namespace abplan::formulas
