#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "abplan/formulas.hpp"
#include "abplan/model.hpp"
#include "test_helpers.hpp"

using namespace abplan;
using namespace abplan::formulas;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("ci_width_ratio basic values") {
    CHECK(ci_width_ratio(1, Utc(0.37)) == 1.0);
    CHECK_THAT(ci_width_ratio(4, Utc(0.0)), WithinRel(0.5, 1e-12));
    // Day-14 decay for a high-UTC metric (24% narrower) and a low-UTC one
    // (58% narrower).
    CHECK_THAT(ci_width_ratio(14, Utc(0.5450)), WithinAbs(0.7600, 0.0005));
    CHECK_THAT(ci_width_ratio(14, Utc(0.1130)), WithinAbs(0.4200, 0.0005));
}

TEST_CASE("ci_width_ratio domain errors") {
    CHECK_THROWS_AS(ci_width_ratio(0, Utc(0.5)), std::domain_error);
    CHECK_THROWS_AS(Utc(-0.01), std::domain_error);
    CHECK_THROWS_AS(Utc(1.01), std::domain_error);
    CHECK_THROWS_AS(Utc(std::nan("")), std::domain_error);
}

TEST_CASE("ci_width_ratio bounds and monotonicity") {
    for (int ri = 0; ri <= 100; ri += 1) {
        const Utc rho(ri / 100.0);
        double prev = 2.0;
        for (int t = 1; t <= 365; ++t) {
            const double w = ci_width_ratio(t, rho);
            CHECK(w >= 1.0 / std::sqrt(static_cast<double>(t)) - 1e-15);
            CHECK(w <= 1.0 + 1e-15);
            CHECK(w <= prev + 1e-15);
            prev = w;
        }
    }
}

TEST_CASE("ci_width_ratio is nondecreasing in rho") {
    for (int t : {1, 2, 7, 14, 50, 365}) {
        double prev = -1.0;
        for (int ri = 0; ri <= 100; ++ri) {
            const double w = ci_width_ratio(t, Utc(ri / 100.0));
            CHECK(w >= prev - 1e-15);
            prev = w;
        }
    }
}

TEST_CASE("limiting_width_ratio") {
    CHECK(limiting_width_ratio(Utc(0.0)) == 0.0);
    CHECK(limiting_width_ratio(Utc(1.0)) == 1.0);
    CHECK_THAT(limiting_width_ratio(Utc(0.64)), WithinRel(0.8, 1e-12));
    CHECK_THAT(ci_width_ratio(1000000, Utc(0.64)), WithinRel(0.8, 1e-6));
}

TEST_CASE("width ratio approaches the limit monotonically") {
    for (double rho : {0.05, 0.3, 0.5, 0.9, 0.99}) {
        const double limit = limiting_width_ratio(Utc(rho));
        double prev_gap = 2.0;
        for (int t = 1; t <= 365; ++t) {
            const double gap = std::fabs(ci_width_ratio(t, Utc(rho)) - limit);
            CHECK(gap <= prev_gap + 1e-15);
            prev_gap = gap;
        }
        CHECK_THAT(ci_width_ratio(1000000, Utc(rho)), WithinAbs(limit, 1e-6));
    }
}

TEST_CASE("pre_post_correlation values") {
    // lambda = rho when T = T0 = 1.
    CHECK_THAT(pre_post_correlation(1, 1, Utc(0.3)), WithinRel(0.3, 1e-12));
    // rho = 0 short-circuits to zero.
    CHECK(pre_post_correlation(5, 9, Utc(0.0)) == 0.0);
    CHECK_THAT(pre_post_correlation(7, 7, Utc(0.6)), WithinAbs(0.913043, 1e-6));
}

TEST_CASE("pre_post_correlation identity at T = T0 = 1") {
    for (int ri = 0; ri < 100; ++ri) {
        const double rho = ri / 100.0;
        CHECK_THAT(pre_post_correlation(1, 1, Utc(rho)), WithinAbs(rho, 1e-12));
    }
}

TEST_CASE("pre_post_correlation monotone in T, T0, rho") {
    const std::vector<int> days{1, 2, 3, 5, 8, 13, 21, 60};
    const std::vector<double> rhos{0.05, 0.2, 0.5, 0.8, 0.95};
    for (double rho : rhos)
        for (int t0 : days) {
            double prev = -1.0;
            for (int t : days) {
                const double lam = pre_post_correlation(t, t0, Utc(rho));
                CHECK(lam >= prev - 1e-15);
                prev = lam;
            }
        }
    for (double rho : rhos)
        for (int t : days) {
            double prev = -1.0;
            for (int t0 : days) {
                const double lam = pre_post_correlation(t, t0, Utc(rho));
                CHECK(lam >= prev - 1e-15);
                prev = lam;
            }
        }
    for (int t : days)
        for (int t0 : days) {
            double prev = -1.0;
            for (double rho : rhos) {
                const double lam = pre_post_correlation(t, t0, Utc(rho));
                CHECK(lam >= prev - 1e-15);
                prev = lam;
            }
        }
}

// Independent oracle for lambda(T): the sample correlation between the
// generator's pre-period averages and in-experiment averages.
TEST_CASE("pre_post_correlation matches the generator", "[montecarlo]") {
    const int n = 500000;
    model::ModelParams params = testutil::default_additive_params(7, 7);
    model::ExperimentDesign design{n, 7, 7, model::Diversion::user, {}};
    const auto exp = model::simulate(params, design, 20260810);

    std::vector<double> x, a;
    x.reserve(2 * n);
    a.reserve(2 * n);
    for (int arm = 0; arm < model::kArms; ++arm)
        for (int u = 0; u < n; ++u) {
            x.push_back(exp.pre->pre_mean[static_cast<std::size_t>(arm) * n + u]);
            double sum = 0.0;
            for (int d = 0; d < 7; ++d)
                sum += exp.panel.value[(static_cast<std::size_t>(arm) * 7 + d) * n + u];
            a.push_back(sum / 7.0);
        }
    // Correlation is arm-invariant pre-treatment; pooling both arms is fine
    // because centering differences are O(1/sqrt(N)).
    const double lam = pre_post_correlation(7, 7, Utc(0.6));
    CHECK_THAT(testutil::sample_correlation(x, a), WithinAbs(lam, 1e-3));
}

TEST_CASE("ci_width_ratio_prepost values") {
    CHECK_THAT(ci_width_ratio_prepost(1, 1, Utc(0.4)), WithinRel(1.0, 1e-12));
    CHECK_THAT(ci_width_ratio_prepost(1, 30, Utc(0.4)), WithinRel(1.0, 1e-12));
    CHECK_THAT(ci_width_ratio_prepost(5, 7, Utc(0.0)), WithinRel(1.0 / std::sqrt(5.0), 1e-12));
    CHECK_THROWS_AS(ci_width_ratio_prepost(5, 7, Utc(1.0)), std::domain_error);
}

TEST_CASE("pre-period data never hurts the predicted decay") {
    for (double rho : {0.0, 0.1, 0.4, 0.7, 0.95})
        for (int t0 : {1, 3, 7, 28})
            for (int t = 1; t <= 60; ++t) {
                const double plain = ci_width_ratio(t, Utc(rho));
                const double pp = ci_width_ratio_prepost(t, t0, Utc(rho));
                CHECK(pp <= plain + 1e-15);
                if (t == 1 || rho == 0.0) {
                    CHECK_THAT(pp, WithinRel(plain, 1e-12));
                } else {
                    CHECK(pp < plain);
                }
            }
}

TEST_CASE("asymptotic_variance_additive") {
    CHECK_THAT(asymptotic_variance_additive(0.0, {0.0, 1.0}, 1.0, 1.0, 1), WithinRel(2.0, 1e-12));
    const double v1 = asymptotic_variance_additive(0.0, {1.0, 1.0}, 1.0, 1.0, 1);
    const double v2 = asymptotic_variance_additive(0.0, {1.0, 1.0}, 1.0, 1.0, 2);
    CHECK_THAT(v2 / v1, WithinRel(0.75, 1e-12));
    CHECK_THROWS_AS(asymptotic_variance_additive(0.0, {1.0, 1.0}, 0.0, 1.0, 1), std::domain_error);
    CHECK_THROWS_AS(asymptotic_variance_additive(0.0, {1.0, 1.0}, 1.0, 1.0, 0), std::domain_error);
}

TEST_CASE("variance ratio identity: V(T)/V(1) equals the squared width ratio") {
    const std::vector<VarianceComponents> sigmas{{0.0, 1.0}, {1.0, 3.0}, {6.0, 4.0}, {5.0, 0.0}};
    for (const auto& sigma : sigmas) {
        const Utc rho = utc_additive(sigma);
        const double v1 = asymptotic_variance_additive(0.12, sigma, 2.5, 2.0, 1);
        for (int t = 1; t <= 100; ++t) {
            const double vt = asymptotic_variance_additive(0.12, sigma, 2.5, 2.0, t);
            const double w = ci_width_ratio(t, rho);
            CHECK_THAT(vt / v1, WithinRel(w * w, 1e-12));
        }
    }
}

TEST_CASE("utc_additive") {
    CHECK(utc_additive({0.0, 3.0}).rho == 0.0);
    CHECK(utc_additive({2.0, 0.0}).rho == 1.0);
    CHECK_THAT(utc_additive({1.0, 3.0}).rho, WithinRel(0.25, 1e-12));
    CHECK_THROWS_AS(utc_additive({0.0, 0.0}), std::domain_error);
}

TEST_CASE("asymptotic_variance_ratio_metric reduces to the additive formula") {
    // Denominator identically 1: no denominator variance, unit means.
    RatioVarianceComponents r;
    r.sigma_a2_n = 1.0;
    r.sigma_e2_n = 1.0;
    r.mbar_n = 2.0;
    r.mbar_d = 1.0;
    const double v = asymptotic_variance_ratio_metric(0.0, r, r, 3);
    const double additive = asymptotic_variance_additive(0.0, {1.0, 1.0}, 2.0, 2.0, 3);
    CHECK_THAT(v, WithinRel(additive, 1e-12));
}

TEST_CASE("asymptotic_variance_ratio_metric cancels for identical numerator and denominator") {
    RatioVarianceComponents r;
    r.sigma_a2_n = r.sigma_a2_d = r.sigma_a_nd = 2.0;
    r.sigma_e2_n = r.sigma_e2_d = r.sigma_e_nd = 1.5;
    r.mbar_n = r.mbar_d = 4.0;
    CHECK_THAT(asymptotic_variance_ratio_metric(0.3, r, r, 5), WithinAbs(0.0, 1e-15));
}

TEST_CASE("asymptotic_variance_ratio_metric rejects bad blocks") {
    RatioVarianceComponents r;
    r.sigma_a2_n = 1.0;
    r.sigma_a2_d = 1.0;
    r.sigma_a_nd = 1.5;  // |cov| > sqrt(var_n * var_d)
    r.mbar_n = r.mbar_d = 1.0;
    CHECK_THROWS_AS(asymptotic_variance_ratio_metric(0.0, r, r, 1), std::domain_error);
    RatioVarianceComponents zero_mean;
    zero_mean.sigma_a2_n = 1.0;
    zero_mean.mbar_n = 1.0;
    zero_mean.mbar_d = 0.0;
    CHECK_THROWS_AS(asymptotic_variance_ratio_metric(0.0, zero_mean, zero_mean, 1),
                    std::domain_error);
}

TEST_CASE("utc_ratio_metric") {
    RatioVarianceComponents r;
    r.sigma_a2_n = r.sigma_a2_d = 1.0;
    r.sigma_e2_n = r.sigma_e2_d = 1.0;
    r.mbar_n = r.mbar_d = 1.0;
    CHECK_THAT(utc_ratio_metric(r).rho, WithinRel(0.5, 1e-12));

    // Degenerate sum: the persistent parts cancel exactly.
    r.sigma_a_nd = -1.0;
    CHECK(utc_ratio_metric(r).rho == 0.0);
}

TEST_CASE("ratio variance identity with proportional blocks") {
    // When the error block is proportional to the random-effect block the
    // summed-metric correlation is exactly the decay-rate parameter.
    const auto params = testutil::default_ratio_params();
    const auto& comps = *params.ratio_part;
    const Utc rho = utc_ratio_metric(comps);
    CHECK_THAT(rho.rho, WithinRel(0.4, 1e-12));
    const double v1 = asymptotic_variance_ratio_metric(0.0, comps, comps, 1);
    for (int t = 1; t <= 60; ++t) {
        const double vt = asymptotic_variance_ratio_metric(0.0, comps, comps, t);
        const double w = ci_width_ratio(t, rho);
        CHECK_THAT(vt / v1, WithinRel(w * w, 1e-12));
    }
}

TEST_CASE("prepost_variance") {
    const VarianceComponents sigma{6.0, 4.0};
    const double s2_1 = sigma.sigma_a2 + sigma.sigma_e2;  // sigma^2(T=1)

    // lambda = 0 reduces to the unadjusted variance.
    const double unadjusted = asymptotic_variance_additive(0.0, sigma, 3.0, 3.0, 1);
    CHECK_THAT(prepost_variance(0.0, s2_1, 0.0, 3.0, 3.0), WithinRel(unadjusted, 1e-12));

    // Relative efficiency at lambda(1) for rho = 0.6, T0 = 7. Exact value:
    // lambda^2 = 1 / ((23/21) * (5/3)) = 63/115.
    const double lam = pre_post_correlation(1, 7, Utc(0.6));
    CHECK_THAT(lam, WithinAbs(std::sqrt(63.0 / 115.0), 1e-12));
    const double ratio = prepost_variance(0.0, s2_1, lam, 3.0, 3.0) / unadjusted;
    CHECK_THAT(ratio, WithinRel(52.0 / 115.0, 1e-12));
    CHECK_THAT(ratio, WithinRel(relative_efficiency(lam), 1e-12));
    // With the correlation rounded to 6 digits the efficiency lands on the
    // matching rounded value.
    CHECK_THAT(prepost_variance(0.0, s2_1, 0.740148, 3.0, 3.0) / unadjusted,
               WithinAbs(0.452181, 1e-6));

    // lambda -> 1 drives the ratio to zero.
    const double near_one = prepost_variance(0.0, s2_1, 1.0 - 1e-9, 3.0, 3.0) / unadjusted;
    CHECK_THAT(near_one, WithinAbs(0.0, 1e-8));

    CHECK_THROWS_AS(prepost_variance(0.0, s2_1, 0.5, 0.0, 3.0), std::domain_error);
}

TEST_CASE("prepost efficiency identity across the lambda grid") {
    for (int li = 0; li < 100; ++li) {
        const double lam = li / 100.0;
        const double unadjusted = prepost_variance(0.0, 10.0, 0.0, 2.0, 2.0);
        const double adjusted = prepost_variance(0.0, 10.0, lam, 2.0, 2.0);
        CHECK_THAT(adjusted / unadjusted, WithinRel(relative_efficiency(lam), 1e-12));
    }
}

TEST_CASE("relative_efficiency") {
    CHECK(relative_efficiency(0.0) == 1.0);
    CHECK_THAT(relative_efficiency(0.6), WithinRel(0.64, 1e-12));
    const double lam = pre_post_correlation(1, 1, Utc(0.3));
    CHECK_THAT(relative_efficiency(lam), WithinRel(0.91, 1e-12));
}
