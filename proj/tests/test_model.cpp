#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "abplan/model.hpp"
#include "abplan/utc.hpp"
#include "test_helpers.hpp"

using namespace abplan;
using namespace abplan::model;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("weekly_sinusoid_means covers pre and experiment days") {
    const auto means = weekly_sinusoid_means(100.0, 0.1, 14, 7);
    REQUIRE(means.size() == 21);
    for (double m : means) {
        CHECK(m > 85.0);
        CHECK(m < 115.0);
    }
    // Day -7 and day 7 share the sinusoid phase.
    CHECK_THAT(means[0], WithinRel(means[13], 1e-12));
}

TEST_CASE("design validation") {
    CHECK_THROWS_AS((ExperimentDesign{1, 7, 0, Diversion::user, {}}.validate()),
                    std::invalid_argument);
    CHECK_THROWS_AS((ExperimentDesign{100, 0, 0, Diversion::user, {}}.validate()),
                    std::invalid_argument);
    CHECK_THROWS_AS((ExperimentDesign{100, 7, 3, Diversion::user_day, {}}.validate()),
                    std::invalid_argument);
    CHECK_THROWS_AS((ExperimentDesign{100, 7, 0, Diversion::user, 1}.validate()),
                    std::invalid_argument);
    CHECK_THROWS_AS((ExperimentDesign{100, 7, 0, Diversion::user, 101}.validate()),
                    std::invalid_argument);
    CHECK_NOTHROW((ExperimentDesign{100, 7, 0, Diversion::user, 50}.validate()));
}

TEST_CASE("zero error variance freezes each user's centered value") {
    ModelParams params;
    params.theta = 0.1;
    params.sigma = {4.0, 0.0};
    params.daily_means_c = weekly_sinusoid_means(50.0, 0.2, 10, 0);
    ExperimentDesign design{200, 10, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 7);
    for (int a = 0; a < kArms; ++a) {
        const double lift = a == arm_index(Arm::treatment) ? 1.1 : 1.0;
        for (int u = 0; u < design.n_per_arm; ++u) {
            const double first =
                exp.panel.at(static_cast<Arm>(a), 0, u) - lift * params.daily_means_c[0];
            for (int d = 1; d < 10; ++d) {
                const double centered =
                    exp.panel.at(static_cast<Arm>(a), d, u) - lift * params.daily_means_c[d];
                CHECK_THAT(centered, WithinAbs(first, 1e-9));
            }
        }
    }
}

TEST_CASE("zero user variance gives uncorrelated days", "[montecarlo]") {
    ModelParams params;
    params.sigma = {0.0, 5.0};
    params.daily_means_c = weekly_sinusoid_means(100.0, 0.05, 4, 0);
    const int n = 40000;
    ExperimentDesign design{n, 4, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 11);
    std::vector<double> x(n), y(n);
    for (int d1 = 0; d1 < 4; ++d1)
        for (int d2 = d1 + 1; d2 < 4; ++d2) {
            for (int u = 0; u < n; ++u) {
                x[u] = exp.panel.at(Arm::control, d1, u);
                y[u] = exp.panel.at(Arm::control, d2, u);
            }
            CHECK_THAT(testutil::sample_correlation(x, y), WithinAbs(0.0, 3.0 / std::sqrt(n)));
        }
}

TEST_CASE("per-day sample means track the configured means", "[montecarlo]") {
    const int n = 100000;
    ModelParams params = testutil::default_additive_params(14);
    ExperimentDesign design{n, 14, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 42);
    const double tol = 4.0 * std::sqrt(10.0 / n);  // 4 sigma / sqrt(N)
    for (int a = 0; a < kArms; ++a) {
        const double lift = a == arm_index(Arm::treatment) ? 1.02 : 1.0;
        for (int d = 0; d < 14; ++d) {
            double sum = 0.0;
            for (int u = 0; u < n; ++u) sum += exp.panel.at(static_cast<Arm>(a), d, u);
            CHECK_THAT(sum / n, WithinAbs(lift * params.daily_means_c[d], tol));
        }
    }
}

TEST_CASE("per-day arm mean ratio is theta + 1", "[montecarlo]") {
    const int n = 100000;
    ModelParams params = testutil::default_additive_params(7);
    ExperimentDesign design{n, 7, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 99);
    // SE of the per-day ratio is about sqrt(2 * 10 / n) / 100.
    const double tol = 5.0 * std::sqrt(2.0 * 10.0 / n) / 100.0;
    for (int d = 0; d < 7; ++d) {
        double sr = 0.0, sc = 0.0;
        for (int u = 0; u < n; ++u) {
            sr += exp.panel.at(Arm::treatment, d, u);
            sc += exp.panel.at(Arm::control, d, u);
        }
        CHECK_THAT(sr / sc, WithinAbs(1.02, tol));
    }
}

TEST_CASE("generated UTC matches the configured components", "[montecarlo]") {
    const int n = 100000;
    for (double rho : {0.1, 0.5, 0.9}) {
        ModelParams params;
        params.sigma = {rho * 10.0, (1.0 - rho) * 10.0};
        params.daily_means_c = weekly_sinusoid_means(100.0, 0.1, 14, 0);
        ExperimentDesign design{n, 14, 0, Diversion::user, {}};
        const auto exp = simulate(params, design, 314159);
        const auto est = utc::estimate_utc_from_panel(exp.panel);
        CHECK_THAT(est.rho_hat, WithinAbs(rho, 0.02));
    }
}

TEST_CASE("pre-period correlation matches lambda(T)", "[montecarlo]") {
    const int n = 100000;
    ModelParams params = testutil::default_additive_params(7, 7);
    ExperimentDesign design{n, 7, 7, Diversion::user, {}};
    const auto exp = simulate(params, design, 2718);
    std::vector<double> x, a;
    for (int arm = 0; arm < kArms; ++arm)
        for (int u = 0; u < n; ++u) {
            x.push_back(exp.pre->at(static_cast<Arm>(arm), u));
            double sum = 0.0;
            for (int d = 0; d < 7; ++d) sum += exp.panel.at(static_cast<Arm>(arm), d, u);
            a.push_back(sum / 7.0);
        }
    const double lam = formulas::pre_post_correlation(7, 7, formulas::Utc(0.6));
    CHECK_THAT(testutil::sample_correlation(x, a), WithinAbs(lam, 0.01));
}

TEST_CASE("pre-period values are identically distributed across arms", "[montecarlo]") {
    const int n = 50000;
    ModelParams params = testutil::default_additive_params(2, 5);
    ExperimentDesign design{n, 2, 5, Diversion::user, {}};
    const auto exp = simulate(params, design, 5150);
    double mean[kArms] = {0.0, 0.0};
    for (int a = 0; a < kArms; ++a) {
        for (int u = 0; u < n; ++u) mean[a] += exp.pre->at(static_cast<Arm>(a), u);
        mean[a] /= n;
    }
    // Both arms draw from the same pre-treatment distribution.
    CHECK_THAT(mean[0], WithinAbs(mean[1], 5.0 * std::sqrt(2.0 * (6.0 + 4.0 / 5.0) / n)));
}

TEST_CASE("reproducibility: same seed same panel, new seed new panel") {
    ModelParams params = testutil::default_additive_params(5, 3);
    ExperimentDesign design{50, 5, 3, Diversion::user, {}};
    const auto a = simulate(params, design, 1234);
    const auto b = simulate(params, design, 1234);
    const auto c = simulate(params, design, 1235);
    CHECK(a.panel.value == b.panel.value);
    CHECK(a.pre->pre_mean == b.pre->pre_mean);
    CHECK(a.panel.value != c.panel.value);
}

TEST_CASE("user-day diversion keeps the one-day marginal", "[montecarlo]") {
    const int n = 100000;
    ModelParams params = testutil::default_additive_params(3);
    ExperimentDesign user_design{n, 3, 0, Diversion::user, {}};
    ExperimentDesign userday_design{n, 3, 0, Diversion::user_day, {}};
    const auto u = simulate(params, user_design, 777);
    const auto ud = simulate(params, userday_design, 778);
    for (const auto* exp : {&u, &ud}) {
        std::vector<double> day1(n);
        for (int i = 0; i < n; ++i) day1[i] = exp->panel.at(Arm::control, 0, i);
        CHECK_THAT(testutil::sample_variance(day1), WithinRel(10.0, 0.05));
    }
    // Across-day correlation vanishes under user-day diversion.
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
        x[i] = ud.panel.at(Arm::control, 0, i);
        y[i] = ud.panel.at(Arm::control, 1, i);
    }
    CHECK_THAT(testutil::sample_correlation(x, y), WithinAbs(0.0, 3.0 / std::sqrt(n)));
}

TEST_CASE("shifted lognormal errors match the first two moments", "[montecarlo]") {
    const int n = 200000;
    ModelParams params;
    params.sigma = {0.0, 9.0};
    params.error_distribution = ErrorDistribution::shifted_lognormal;
    params.daily_means_c = {50.0};
    ExperimentDesign design{n, 1, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 31337);
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = exp.panel.at(Arm::control, 0, i);
    CHECK_THAT(testutil::mean(v), WithinAbs(50.0, 5.0 * 3.0 / std::sqrt(n)));
    CHECK_THAT(testutil::sample_variance(v), WithinRel(9.0, 0.1));
    // Heavy right tail.
    double skew = 0.0;
    const double m = testutil::mean(v);
    const double sd = std::sqrt(testutil::sample_variance(v));
    for (double val : v) skew += std::pow((val - m) / sd, 3.0);
    CHECK(skew / n > 2.0);
}

TEST_CASE("ratio metric generation matches the covariance blocks", "[montecarlo]") {
    const int n = 200000;
    ModelParams params = testutil::default_ratio_params();
    ExperimentDesign design{n, 2, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 9000);
    REQUIRE(exp.panel.is_ratio());

    const auto& rp = *params.ratio_part;
    // Single-day marginal moments: var = sigma_a2 + sigma_e2 per component,
    // covariance = sigma_a_nd + sigma_e_nd.
    std::vector<double> vn(n), vd(n);
    for (int i = 0; i < n; ++i) {
        vn[i] = exp.panel.at(Arm::control, 0, i);
        vd[i] = exp.panel.denom_at(Arm::control, 0, i);
    }
    CHECK_THAT(testutil::mean(vn), WithinAbs(rp.mbar_n, 0.05));
    CHECK_THAT(testutil::mean(vd), WithinAbs(rp.mbar_d, 0.05));
    CHECK_THAT(testutil::sample_variance(vn), WithinRel(rp.sigma_a2_n + rp.sigma_e2_n, 0.05));
    CHECK_THAT(testutil::sample_variance(vd), WithinRel(rp.sigma_a2_d + rp.sigma_e2_d, 0.05));
    const double corr = testutil::sample_correlation(vn, vd);
    const double expected = (rp.sigma_a_nd + rp.sigma_e_nd) /
                            std::sqrt((rp.sigma_a2_n + rp.sigma_e2_n) * (rp.sigma_a2_d + rp.sigma_e2_d));
    CHECK_THAT(corr, WithinAbs(expected, 0.01));

    // Treatment scales only the numerator mean.
    std::vector<double> tn(n), td(n);
    for (int i = 0; i < n; ++i) {
        tn[i] = exp.panel.at(Arm::treatment, 0, i);
        td[i] = exp.panel.denom_at(Arm::treatment, 0, i);
    }
    CHECK_THAT(testutil::mean(tn), WithinAbs(1.05 * rp.mbar_n, 0.05));
    CHECK_THAT(testutil::mean(td), WithinAbs(rp.mbar_d, 0.05));
}

TEST_CASE("ratio metrics reject pre-periods and lognormal errors") {
    ModelParams params = testutil::default_ratio_params();
    ExperimentDesign design{10, 2, 1, Diversion::user, {}};
    CHECK_THROWS_AS(simulate(params, design, 1), std::invalid_argument);
    params.error_distribution = ErrorDistribution::shifted_lognormal;
    ExperimentDesign ok{10, 2, 0, Diversion::user, {}};
    CHECK_THROWS_AS(simulate(params, ok, 1), std::invalid_argument);
}

TEST_CASE("aggregate_buckets preserves per-day totals") {
    ModelParams params = testutil::default_additive_params(4, 2);
    ExperimentDesign design{103, 4, 2, Diversion::user, {}};
    const auto exp = simulate(params, design, 64);
    const auto bucketed = aggregate_buckets(exp.panel, &*exp.pre, 10, 5);
    REQUIRE(bucketed.panel.n_users == 10);
    for (int a = 0; a < kArms; ++a)
        for (int d = 0; d < 4; ++d) {
            double users = 0.0, buckets = 0.0;
            for (int u = 0; u < 103; ++u) users += exp.panel.at(static_cast<Arm>(a), d, u);
            for (int b = 0; b < 10; ++b) buckets += bucketed.panel.at(static_cast<Arm>(a), d, b);
            CHECK_THAT(buckets, WithinRel(users, 1e-12));
        }
    double pre_users = 0.0, pre_buckets = 0.0;
    for (double v : exp.pre->pre_mean) pre_users += v;
    for (double v : bucketed.pre->pre_mean) pre_buckets += v;
    CHECK_THAT(pre_buckets, WithinRel(pre_users, 1e-12));
}

TEST_CASE("bucket membership is shared across days and the pre-period") {
    // Give user u the constant value u on every day and in the pre-period;
    // a bucket's series is then constant iff membership never changes.
    const int n = 30, t = 5, z = 6;
    MetricPanel panel;
    panel.n_users = n;
    panel.n_days = t;
    panel.value.resize(static_cast<std::size_t>(kArms) * t * n);
    PrePeriodPanel pre;
    pre.n_users = n;
    pre.t0_days = 3;
    pre.pre_mean.resize(static_cast<std::size_t>(kArms) * n);
    for (int a = 0; a < kArms; ++a)
        for (int u = 0; u < n; ++u) {
            pre.pre_mean[static_cast<std::size_t>(a) * n + u] = u;
            for (int d = 0; d < t; ++d)
                panel.value[panel.cell(static_cast<Arm>(a), d, u)] = u;
        }
    const auto bucketed = aggregate_buckets(panel, &pre, z, 17);
    for (int a = 0; a < kArms; ++a)
        for (int b = 0; b < z; ++b) {
            const double day0 = bucketed.panel.at(static_cast<Arm>(a), 0, b);
            for (int d = 1; d < t; ++d)
                CHECK(bucketed.panel.at(static_cast<Arm>(a), d, b) == day0);
            CHECK(bucketed.pre->at(static_cast<Arm>(a), b) == day0);
        }
}

TEST_CASE("aggregate_buckets with z = n relabels users") {
    ModelParams params = testutil::default_additive_params(3);
    ExperimentDesign design{20, 3, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 21);
    const auto bucketed = aggregate_buckets(exp.panel, nullptr, 20, 23);
    for (int a = 0; a < kArms; ++a)
        for (int d = 0; d < 3; ++d) {
            std::multiset<double> users, buckets;
            for (int u = 0; u < 20; ++u) {
                users.insert(exp.panel.at(static_cast<Arm>(a), d, u));
                buckets.insert(bucketed.panel.at(static_cast<Arm>(a), d, u));
            }
            CHECK(users == buckets);
        }
}

TEST_CASE("aggregate_buckets rejects bad bucket counts") {
    ModelParams params = testutil::default_additive_params(2);
    ExperimentDesign design{10, 2, 0, Diversion::user, {}};
    const auto exp = simulate(params, design, 3);
    CHECK_THROWS_AS(aggregate_buckets(exp.panel, nullptr, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(aggregate_buckets(exp.panel, nullptr, 11, 1), std::invalid_argument);
}

TEST_CASE("model parameter validation") {
    ModelParams params = testutil::default_additive_params(3);
    ExperimentDesign design{10, 3, 0, Diversion::user, {}};
    params.theta = -1.0;
    CHECK_THROWS_AS(simulate(params, design, 1), std::invalid_argument);
    params = testutil::default_additive_params(3);
    params.daily_means_c[1] = 0.0;
    CHECK_THROWS_AS(simulate(params, design, 1), std::invalid_argument);
    params = testutil::default_additive_params(3);
    params.daily_means_c.pop_back();
    CHECK_THROWS_AS(simulate(params, design, 1), std::invalid_argument);
    params = testutil::default_additive_params(3);
    params.sigma = {-1.0, 1.0};
    CHECK_THROWS_AS(simulate(params, design, 1), std::domain_error);
}
