#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "abplan/errors.hpp"
#include "abplan/estimators.hpp"
#include "abplan/formulas.hpp"
#include "abplan/math.hpp"
#include "abplan/model.hpp"
#include "abplan/planner.hpp"
#include "abplan/rng.hpp"

namespace abplan::sim {

struct SimConfig {
    model::ModelParams params;
    model::ExperimentDesign design;
    int replications = 500;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = available parallelism
    // Planning-formula rho used for the predicted curves; defaults to the
    // generator's true UTC. Exposed so a validation run can be pointed at a
    // deliberately wrong value as a negative control.
    std::optional<double> rho_predicted;
};

// ---------------------------------------------------------------------------
// Cumulative-horizon estimates
// ---------------------------------------------------------------------------

// Point and variance estimates for every cumulative horizon T' = 1..T of
// one panel: exactly what the one-shot estimators would return on the
// day-prefix panel, computed in a single pass over days.
struct HorizonEstimates {
    std::vector<double> theta_plain;  // index T'-1
    std::vector<double> var_plain;    // /N scale
    std::vector<double> theta_pp;     // empty without a pre-period
    std::vector<double> var_pp;
};

inline HorizonEstimates estimate_over_horizons(const model::MetricPanel& panel,
                                               const model::PrePeriodPanel* pre = nullptr) {
    const int n = panel.n_users;
    const int t = panel.n_days;
    if (n < 2)
        throw estimation_error("estimate_over_horizons: need at least 2 users per arm");
    const int r = model::arm_index(model::Arm::treatment);
    const int c = model::arm_index(model::Arm::control);

    HorizonEstimates out;
    out.theta_plain.resize(t);
    out.var_plain.resize(t);

    if (panel.is_ratio()) {
        if (pre)
            throw std::invalid_argument("estimate_over_horizons: pre-period requires an additive metric");
        std::vector<double> sum_n[model::kArms], sum_d[model::kArms];
        for (int a = 0; a < model::kArms; ++a) {
            sum_n[a].assign(n, 0.0);
            sum_d[a].assign(n, 0.0);
        }
        for (int ti = 0; ti < t; ++ti) {
            double mean_n[model::kArms], mean_d[model::kArms];
            double ss_n = 0.0, ss_d = 0.0, ss_nd = 0.0;
            for (int a = 0; a < model::kArms; ++a) {
                const std::size_t base = (static_cast<std::size_t>(a) * t + ti) * n;
                double* sn = sum_n[a].data();
                double* sd = sum_d[a].data();
                KahanSum tot_n, tot_d;
                for (int u = 0; u < n; ++u) {
                    sn[u] += panel.value[base + u];
                    sd[u] += panel.denom[base + u];
                    tot_n.add(sn[u]);
                    tot_d.add(sd[u]);
                }
                const double days = ti + 1.0;
                mean_n[a] = tot_n.value() / days / n;
                mean_d[a] = tot_d.value() / days / n;
                KahanSum acc_n, acc_d, acc_nd;
                for (int u = 0; u < n; ++u) {
                    const double dn = sn[u] / days - mean_n[a];
                    const double dd = sd[u] / days - mean_d[a];
                    acc_n.add(dn * dn);
                    acc_d.add(dd * dd);
                    acc_nd.add(dn * dd);
                }
                ss_n += acc_n.value();
                ss_d += acc_d.value();
                ss_nd += acc_nd.value();
            }
            if (mean_d[r] == 0.0 || mean_d[c] == 0.0 || mean_n[c] == 0.0)
                throw estimation_error("estimate_over_horizons: zero arm mean");
            const double theta1 = (mean_n[r] / mean_d[r]) / (mean_n[c] / mean_d[c]);
            out.theta_plain[ti] = theta1 - 1.0;
            const double div = 2.0 * n - 2.0;
            const double s2n = ss_n / div, s2d = ss_d / div, snd = ss_nd / div;
            double sum = 0.0;
            for (int a = 0; a < model::kArms; ++a) {
                if (mean_n[a] == 0.0)
                    throw estimation_error("estimate_over_horizons: zero arm mean");
                sum += s2n / (mean_n[a] * mean_n[a]) + s2d / (mean_d[a] * mean_d[a]) -
                       2.0 * snd / (mean_n[a] * mean_d[a]);
            }
            out.var_plain[ti] = theta1 * theta1 * sum / n;
        }
        return out;
    }

    // Additive metric. Precompute pre-period moments once; they do not
    // change with the horizon.
    double pre_mean[model::kArms] = {0.0, 0.0};
    std::vector<double> dx[model::kArms];
    double var_x = 0.0;
    if (pre) {
        if (pre->n_users != n)
            throw estimation_error("estimate_over_horizons: pre-period covers a different user set");
        double ss_xx = 0.0;
        for (int a = 0; a < model::kArms; ++a) {
            KahanSum s;
            const double* x = pre->pre_mean.data() + static_cast<std::size_t>(a) * n;
            for (int u = 0; u < n; ++u) s.add(x[u]);
            pre_mean[a] = s.value() / n;
            dx[a].resize(n);
            KahanSum xx;
            for (int u = 0; u < n; ++u) {
                dx[a][u] = x[u] - pre_mean[a];
                xx.add(dx[a][u] * dx[a][u]);
            }
            ss_xx += xx.value();
        }
        var_x = ss_xx / (2.0 * n - 2.0);
        out.theta_pp.resize(t);
        out.var_pp.resize(t);
    }
    const double m_x = (pre_mean[0] + pre_mean[1]) / 2.0;

    std::vector<double> sums[model::kArms];
    for (int a = 0; a < model::kArms; ++a) sums[a].assign(n, 0.0);

    for (int ti = 0; ti < t; ++ti) {
        const double days = ti + 1.0;
        double mean[model::kArms];
        double ss_aa = 0.0, ss_xa = 0.0;
        for (int a = 0; a < model::kArms; ++a) {
            const std::size_t base = (static_cast<std::size_t>(a) * t + ti) * n;
            double* s = sums[a].data();
            KahanSum tot;
            for (int u = 0; u < n; ++u) {
                s[u] += panel.value[base + u];
                tot.add(s[u]);
            }
            mean[a] = tot.value() / days / n;
            KahanSum aa, xa;
            if (pre) {
                const double* dxa = dx[a].data();
                for (int u = 0; u < n; ++u) {
                    const double da = s[u] / days - mean[a];
                    aa.add(da * da);
                    xa.add(dxa[u] * da);
                }
            } else {
                for (int u = 0; u < n; ++u) {
                    const double da = s[u] / days - mean[a];
                    aa.add(da * da);
                }
            }
            ss_aa += aa.value();
            ss_xa += xa.value();
        }
        if (mean[r] == 0.0 || mean[c] == 0.0)
            throw estimation_error("estimate_over_horizons: zero arm mean");
        const double div = 2.0 * n - 2.0;
        const double var_a = ss_aa / div;
        const double lift = mean[r] / mean[c];
        out.theta_plain[ti] = lift - 1.0;
        out.var_plain[ti] =
            lift * lift * var_a * (1.0 / (mean[r] * mean[r]) + 1.0 / (mean[c] * mean[c])) / n;

        if (pre) {
            if (var_x == 0.0) {  // degenerate pre-period: plain fallback
                out.theta_pp[ti] = out.theta_plain[ti];
                out.var_pp[ti] = out.var_plain[ti];
                continue;
            }
            const double cov_xa = ss_xa / div;
            const double slope = cov_xa / var_x;
            double lambda = var_a > 0.0 ? cov_xa / std::sqrt(var_x * var_a) : 0.0;
            lambda = std::clamp(std::fabs(lambda), 0.0, 1.0);
            const double m_r = mean[r] - slope * (pre_mean[r] - m_x);
            const double m_c = mean[c] - slope * (pre_mean[c] - m_x);
            if (m_c == 0.0)
                throw estimation_error("estimate_over_horizons: adjusted control mean is zero");
            out.theta_pp[ti] = m_r / m_c - 1.0;
            out.var_pp[ti] = formulas::prepost_variance(out.theta_pp[ti], var_a, lambda, m_r, m_c) / n;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic replication driver
// ---------------------------------------------------------------------------

namespace detail {

// Runs fn(rep) for rep = 0..reps-1 across threads. Each replication writes
// only into its own result slot, so the outcome is byte-identical for any
// thread count or scheduling.
template <class Fn>
void for_each_replication(int reps, int threads, Fn&& fn) {
    if (threads <= 0) {
        const unsigned hc = std::thread::hardware_concurrency();
        threads = hc == 0 ? 1 : static_cast<int>(hc);
    }
    if (threads > reps) threads = reps;
    if (threads <= 1) {
        for (int rep = 0; rep < reps; ++rep) fn(rep);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const int rep = next.fetch_add(1, std::memory_order_relaxed);
            if (rep >= reps || failed.load(std::memory_order_relaxed)) return;
            try {
                fn(rep);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline constexpr std::uint64_t kDecayTag = 0xdeca1;
inline constexpr std::uint64_t kCoverageTag = 0xc0fe1;
inline constexpr std::uint64_t kDesignTag = 0xde519;
inline constexpr std::uint64_t kBucketTag = 0xba5e1;

// True UTC of a configuration.
inline formulas::Utc true_utc(const model::ModelParams& params) {
    return params.is_ratio() ? formulas::utc_ratio_metric(*params.ratio_part)
                             : formulas::utc_additive(params.sigma);
}

// Time-averaged true control mean over the first t experiment days.
inline double mbar_control(const model::ModelParams& params, int t0, int t) {
    KahanSum s;
    for (int d = 0; d < t; ++d) s.add(params.daily_means_c[static_cast<std::size_t>(t0) + d]);
    return s.value() / t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Decay study
// ---------------------------------------------------------------------------

struct DecayRow {
    int t = 0;
    double empirical_width = 0.0;  // mean over replications of w(T)/w(1)
    double predicted_width = 0.0;  // decay formula at rho_used
    double rel_gap = 0.0;          // (empirical - predicted) / predicted
    double coverage = 0.0;         // fraction of level-alpha CIs covering theta
    double n_var_plugin = 0.0;     // N x mean plug-in variance estimate
    double n_var_reps = 0.0;       // N x across-replication variance of theta_hat
    double n_var_pred = 0.0;       // asymptotic variance formula
};

struct DecayReport {
    std::vector<DecayRow> rows;          // plain estimator
    std::vector<DecayRow> prepost_rows;  // pre-post estimator, when t0_days > 0
    double rho_used = 0.0;
    int replications_used = 0;
    int excluded_replications = 0;
};

// Replays the decay of the CI width: for each replication computes the
// cumulative-through-day-T CI for every T, normalizes by the day-1 width,
// and averages across replications next to the closed-form prediction.
inline DecayReport run_decay_study(const SimConfig& config) {
    config.design.validate();
    if (config.replications < 1)
        throw std::invalid_argument("run_decay_study: need at least 1 replication");
    if (!(config.alpha > 0.0 && config.alpha < 1.0))
        throw std::invalid_argument("run_decay_study: alpha must be in (0, 1)");
    const formulas::Utc rho_used(config.rho_predicted.value_or(detail::true_utc(config.params).rho));

    const int t = config.design.t_days;
    const int t0 = config.design.t0_days;
    const int reps = config.replications;
    const bool with_pp = t0 > 0;
    const double z = z_two_sided(config.alpha);
    const double theta = config.params.theta;

    struct RepResult {
        bool ok = false;
        std::vector<double> w_plain, theta_plain, var_plain;
        std::vector<double> w_pp, theta_pp, var_pp;
    };
    std::vector<RepResult> results(static_cast<std::size_t>(reps));

    detail::for_each_replication(reps, config.threads, [&](int rep) {
        RepResult& rr = results[static_cast<std::size_t>(rep)];
        try {
            const auto exp = model::simulate(config.params, config.design,
                                             derive_stream(config.seed, detail::kDecayTag, rep));
            const auto est = estimate_over_horizons(exp.panel, exp.pre ? &*exp.pre : nullptr);
            const double w1 = std::sqrt(est.var_plain[0]);
            if (!(w1 > 0.0)) return;  // degenerate day-1 width
            rr.w_plain.resize(t);
            for (int i = 0; i < t; ++i) rr.w_plain[i] = std::sqrt(est.var_plain[i]) / w1;
            rr.theta_plain = est.theta_plain;
            rr.var_plain = est.var_plain;
            if (with_pp) {
                const double w1p = std::sqrt(est.var_pp[0]);
                if (!(w1p > 0.0)) return;
                rr.w_pp.resize(t);
                for (int i = 0; i < t; ++i) rr.w_pp[i] = std::sqrt(est.var_pp[i]) / w1p;
                rr.theta_pp = est.theta_pp;
                rr.var_pp = est.var_pp;
            }
            rr.ok = true;
        } catch (const estimation_error&) {
            rr.ok = false;
        }
    });

    DecayReport report;
    report.rho_used = rho_used.rho;
    for (const auto& rr : results)
        if (rr.ok) ++report.replications_used;
    report.excluded_replications = reps - report.replications_used;
    if (report.replications_used == 0)
        throw estimation_error("run_decay_study: every replication failed");
    const double used = report.replications_used;
    const int n = config.design.n_per_arm;

    const auto reduce = [&](bool pp) {
        std::vector<DecayRow> rows(static_cast<std::size_t>(t));
        for (int i = 0; i < t; ++i) {
            KahanSum w_sum, var_sum, th_sum, cover;
            for (const auto& rr : results) {
                if (!rr.ok) continue;
                const auto& w = pp ? rr.w_pp : rr.w_plain;
                const auto& th = pp ? rr.theta_pp : rr.theta_plain;
                const auto& v = pp ? rr.var_pp : rr.var_plain;
                w_sum.add(w[i]);
                var_sum.add(v[i]);
                th_sum.add(th[i]);
                cover.add(std::fabs(th[i] - theta) <= z * std::sqrt(v[i]) ? 1.0 : 0.0);
            }
            const double th_mean = th_sum.value() / used;
            KahanSum th_ss;
            for (const auto& rr : results) {
                if (!rr.ok) continue;
                const double d = (pp ? rr.theta_pp[i] : rr.theta_plain[i]) - th_mean;
                th_ss.add(d * d);
            }
            DecayRow& row = rows[static_cast<std::size_t>(i)];
            row.t = i + 1;
            row.empirical_width = w_sum.value() / used;
            row.predicted_width = pp ? formulas::ci_width_ratio_prepost(i + 1, t0, rho_used)
                                     : formulas::ci_width_ratio(i + 1, rho_used);
            row.rel_gap = (row.empirical_width - row.predicted_width) / row.predicted_width;
            row.coverage = cover.value() / used;
            row.n_var_plugin = n * var_sum.value() / used;
            row.n_var_reps = used > 1 ? n * th_ss.value() / (used - 1.0) : 0.0;
        }
        return rows;
    };

    report.rows = reduce(false);
    if (with_pp) report.prepost_rows = reduce(true);

    // Attach the asymptotic-variance predictions from the true parameters.
    for (int i = 0; i < t; ++i) {
        const int days = i + 1;
        if (!config.params.is_ratio()) {
            const double mc = detail::mbar_control(config.params, t0, days);
            const double mr = (theta + 1.0) * mc;
            report.rows[i].n_var_pred =
                formulas::asymptotic_variance_additive(theta, config.params.sigma, mr, mc, days);
            if (with_pp) {
                const double lam = formulas::pre_post_correlation(days, t0, detail::true_utc(config.params));
                const double s2t = config.params.sigma.sigma_a2 + config.params.sigma.sigma_e2 / days;
                report.prepost_rows[i].n_var_pred = formulas::prepost_variance(theta, s2t, lam, mr, mc);
            }
        } else {
            formulas::RatioVarianceComponents comps_r = *config.params.ratio_part;
            comps_r.mbar_n *= theta + 1.0;
            report.rows[i].n_var_pred = formulas::asymptotic_variance_ratio_metric(
                theta, comps_r, *config.params.ratio_part, days);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Coverage study
// ---------------------------------------------------------------------------

struct CoverageRow {
    int t = 0;
    double coverage = 0.0;
    double mean_ci_width = 0.0;
};

struct CoverageReport {
    std::vector<CoverageRow> rows;
    estimators::Method method = estimators::Method::plain;
    int replications_used = 0;
    int excluded_replications = 0;
};

// Fraction of replications whose level-alpha CI covers the true theta, per
// cumulative horizon. Honors the design's bucket count: estimation then
// runs on bucket aggregates, the intended regime for heavy-tailed metrics.
inline CoverageReport run_coverage_study(const SimConfig& config,
                                         estimators::Method method = estimators::Method::plain) {
    config.design.validate();
    if (config.replications < 1)
        throw std::invalid_argument("run_coverage_study: need at least 1 replication");
    if (method == estimators::Method::prepost && config.design.t0_days == 0)
        throw std::invalid_argument("run_coverage_study: pre-post coverage needs t0_days > 0");
    const double z = z_two_sided(config.alpha);
    const double theta = config.params.theta;
    const int t = config.design.t_days;
    const int reps = config.replications;
    const bool pp = method == estimators::Method::prepost;

    struct RepResult {
        bool ok = false;
        std::vector<double> theta_hat, var_hat;
    };
    std::vector<RepResult> results(static_cast<std::size_t>(reps));

    detail::for_each_replication(reps, config.threads, [&](int rep) {
        RepResult& rr = results[static_cast<std::size_t>(rep)];
        try {
            const std::uint64_t rep_seed = derive_stream(config.seed, detail::kCoverageTag, rep);
            auto exp = model::simulate(config.params, config.design, rep_seed);
            const model::MetricPanel* panel = &exp.panel;
            const model::PrePeriodPanel* pre = exp.pre ? &*exp.pre : nullptr;
            model::BucketedExperiment bucketed;
            if (config.design.buckets) {
                bucketed = model::aggregate_buckets(exp.panel, pre, *config.design.buckets,
                                                    derive_stream(rep_seed, detail::kBucketTag));
                panel = &bucketed.panel;
                pre = bucketed.pre ? &*bucketed.pre : nullptr;
            }
            auto est = estimate_over_horizons(*panel, pre);
            rr.theta_hat = pp ? std::move(est.theta_pp) : std::move(est.theta_plain);
            rr.var_hat = pp ? std::move(est.var_pp) : std::move(est.var_plain);
            rr.ok = true;
        } catch (const estimation_error&) {
            rr.ok = false;
        }
    });

    CoverageReport report;
    report.method = method;
    for (const auto& rr : results)
        if (rr.ok) ++report.replications_used;
    report.excluded_replications = reps - report.replications_used;
    if (report.replications_used == 0)
        throw estimation_error("run_coverage_study: every replication failed");

    report.rows.resize(static_cast<std::size_t>(t));
    for (int i = 0; i < t; ++i) {
        KahanSum cover, width;
        for (const auto& rr : results) {
            if (!rr.ok) continue;
            const double half = z * std::sqrt(rr.var_hat[i]);
            cover.add(std::fabs(rr.theta_hat[i] - theta) <= half ? 1.0 : 0.0);
            width.add(2.0 * half);
        }
        report.rows[i] = {i + 1, cover.value() / report.replications_used,
                          width.value() / report.replications_used};
    }
    return report;
}

// ---------------------------------------------------------------------------
// Design study: user vs user-day
// ---------------------------------------------------------------------------

struct DesignStudyReport {
    planner::DesignComparison empirical;          // SEs measured across replications
    std::vector<double> prepost_var_ratio;        // Var(theta_PP) / Var(theta_hat), per T
    std::vector<double> prepost_var_ratio_pred;   // 1 - lambda(T)^2
    int replications_used = 0;
    int excluded_replications = 0;
};

// Runs matched user and user-day experiments of the same size and measures
// the across-replication SEs of the plain estimator on both designs and of
// the pre-post estimator on the user design, normalized by the plain user
// SE at T = 1. The empirical crossover is where the user-day design first
// strictly beats user + pre-post.
inline DesignStudyReport run_design_study(double rho, int t0_days, int n_per_arm, int t_max,
                                          int replications, std::uint64_t seed, int threads = 0) {
    if (!(rho > 0.0 && rho < 1.0))
        throw std::domain_error("run_design_study: rho must be in (0, 1)");
    if (t0_days < 1)
        throw std::domain_error("run_design_study: t0_days must be >= 1");
    if (replications < 2)
        throw std::invalid_argument("run_design_study: need at least 2 replications");

    constexpr double kTotalVariance = 10.0;
    model::ModelParams params;
    params.theta = 0.0;
    params.sigma = {rho * kTotalVariance, (1.0 - rho) * kTotalVariance};

    model::ExperimentDesign user_design{n_per_arm, t_max, t0_days, model::Diversion::user, {}};
    model::ExperimentDesign userday_design{n_per_arm, t_max, 0, model::Diversion::user_day, {}};
    model::ModelParams user_params = params;
    user_params.daily_means_c = model::weekly_sinusoid_means(100.0, 0.01, t_max, t0_days);
    model::ModelParams userday_params = params;
    userday_params.daily_means_c = model::weekly_sinusoid_means(100.0, 0.01, t_max, 0);

    struct RepResult {
        bool ok = false;
        std::vector<double> plain, pp, userday;
    };
    std::vector<RepResult> results(static_cast<std::size_t>(replications));

    detail::for_each_replication(replications, threads, [&](int rep) {
        RepResult& rr = results[static_cast<std::size_t>(rep)];
        try {
            const auto user_exp = model::simulate(user_params, user_design,
                                                  derive_stream(seed, detail::kDesignTag, rep));
            const auto user_est = estimate_over_horizons(user_exp.panel, &*user_exp.pre);
            const auto ud_exp = model::simulate(userday_params, userday_design,
                                                derive_stream(seed, detail::kDesignTag + 1, rep));
            const auto ud_est = estimate_over_horizons(ud_exp.panel);
            rr.plain = user_est.theta_plain;
            rr.pp = user_est.theta_pp;
            rr.userday = ud_est.theta_plain;
            rr.ok = true;
        } catch (const estimation_error&) {
            rr.ok = false;
        }
    });

    DesignStudyReport report;
    for (const auto& rr : results)
        if (rr.ok) ++report.replications_used;
    report.excluded_replications = replications - report.replications_used;
    if (report.replications_used < 2)
        throw estimation_error("run_design_study: not enough usable replications");
    const double used = report.replications_used;

    const auto variance_at = [&](std::vector<double> RepResult::* member, int i) {
        KahanSum mean_acc;
        for (const auto& rr : results)
            if (rr.ok) mean_acc.add((rr.*member)[i]);
        const double mean = mean_acc.value() / used;
        KahanSum ss;
        for (const auto& rr : results) {
            if (!rr.ok) continue;
            const double d = (rr.*member)[i] - mean;
            ss.add(d * d);
        }
        return ss.value() / (used - 1.0);
    };

    planner::DesignComparison& cmp = report.empirical;
    cmp.rho = rho;
    cmp.t0_days = t0_days;
    const double base = variance_at(&RepResult::plain, 0);
    if (!(base > 0.0))
        throw estimation_error("run_design_study: degenerate day-1 variance");
    for (int i = 0; i < t_max; ++i) {
        const double v_plain = variance_at(&RepResult::plain, i);
        const double v_pp = variance_at(&RepResult::pp, i);
        const double v_ud = variance_at(&RepResult::userday, i);
        cmp.se_user_plain.push_back(std::sqrt(v_plain / base));
        cmp.se_user_prepost.push_back(std::sqrt(v_pp / base));
        cmp.se_userday.push_back(std::sqrt(v_ud / base));
        if (!cmp.crossover_t && cmp.se_userday.back() < cmp.se_user_prepost.back())
            cmp.crossover_t = i + 1;
        report.prepost_var_ratio.push_back(v_pp / v_plain);
        const double lam = formulas::pre_post_correlation(i + 1, t0_days, formulas::Utc(rho));
        report.prepost_var_ratio_pred.push_back(1.0 - lam * lam);
    }
    return report;
}

}  // namespace abplan::sim
