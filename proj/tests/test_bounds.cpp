#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "td0/bounds.hpp"
#include "td0/engine.hpp"
#include "td0/errors.hpp"
#include "td0/experiments.hpp"
#include "td0/linalg.hpp"

using namespace td0;

namespace {

Problem scalar_raw_problem() {
    Problem p;
    p.system = make_raw_system(Matrix(1, 1, {2.0}), {4.0}, std::nullopt, 0.5);
    p.noise = NoiseModel::none();
    p.theta0 = {0.0};
    return p;
}

// Minimal hand-filled constants for formula-level tests.
BoundConstants synthetic_constants() {
    BoundConstants c;
    c.dim = 1;
    c.sigma = 0.5;
    c.log_k_p = std::log(2.0);
    c.k_p = 2.0;
    c.lambda_exp = 0.5;
    c.k_s = 1.0;
    c.e0 = 3.0;
    return c;
}

} // namespace

TEST_CASE("const-chain constants come out exactly") {
    const auto p = fixtures::const_chain();
    const StepsizeSchedule sch(0.5);
    const auto c = derive_constants(p.system, sch, p.theta0);

    CHECK(c.dim == 1);
    CHECK(c.sigma == 0.5);
    CHECK(c.gamma == 0.5);
    CHECK(c.sym_min_eig == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(c.min_real_part == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(c.a_norm == doctest::Approx(0.125).epsilon(1e-14));
    CHECK(c.a_inv_norm == doctest::Approx(8.0).epsilon(1e-14));
    CHECK(c.b_norm == doctest::Approx(0.5).epsilon(1e-14));

    CHECK(c.lambda_exp == doctest::Approx(0.9 * 0.25).epsilon(1e-14));
    CHECK(c.lambda_hp == doctest::Approx(0.9 * 0.125).epsilon(1e-14));
    CHECK_FALSE(c.lambda_hp_perturbed);

    // 0.25 * max{2 + 1.5 * 8 * 0.5, 1.5 + 0.5} = 2
    CHECK(c.k_m == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(c.k_s == doctest::Approx(8.0).epsilon(1e-14));
    CHECK_FALSE(c.k_s_tightened);

    CHECK(c.ata_ks_max == doctest::Approx(8.0 + 0.125 * 0.125).epsilon(1e-14));
    CHECK(c.mu == doctest::Approx(-0.25 + 8.015625).epsilon(1e-14));
    CHECK(c.sym_a(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(c.ata_ks(0, 0) == doctest::Approx(8.015625).epsilon(1e-14));

    // ceil((8.015625 / 0.025)^2)
    CHECK(c.m == 102801);

    // bracket the stepsize sum: 2 sqrt(N+1) - 2 <= sum_{l=1}^{N} 1/sqrt(l)
    // <= 2 sqrt(N) - 1 with N = m + 1
    const double nd = static_cast<double>(c.m + 1);
    const double lo = (c.mu + c.lambda_exp) * (2.0 * std::sqrt(nd + 1.0) - 2.0);
    const double hi = (c.mu + c.lambda_exp) * (2.0 * std::sqrt(nd) - 1.0);
    CHECK(c.log_k_p >= lo);
    CHECK(c.log_k_p <= hi);
    CHECK(std::isinf(c.k_p)); // the linear companion is honestly +inf

    CHECK(c.e0 == doctest::Approx(16.0).epsilon(1e-14));
    CHECK(c.c_star == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(c.r0 == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(c.r_wc(0) == doctest::Approx(25.0).epsilon(1e-14));
    CHECK(c.r_wc(2000) == doctest::Approx(2001.0 * 25.0).epsilon(1e-14));

    CHECK(c.closed_form);
    CHECK(c.i0 == 20); // ceil((2 * 0.5 / 0.225)^2) = ceil(19.75..)

    // scalar A > 0: the envelope peaks at t = 0, so the estimate is the
    // bare 5 percent inflation
    CHECK(c.k_lambda == doctest::Approx(1.05).epsilon(1e-14));
    CHECK(c.c_m2 ==
          doctest::Approx(6.0 * 2.0 * 1.05 / std::sqrt(1.0 - 2.0 * c.lambda_hp))
              .epsilon(1e-13));
}

TEST_CASE("derive_constants rejects what it cannot certify") {
    const auto p = fixtures::const_chain();
    const StepsizeSchedule sch(0.5);

    ConstantOptions bad;
    bad.lambda_exp_fraction = 0.0;
    CHECK_THROWS_AS(derive_constants(p.system, sch, p.theta0, bad), DomainError);
    bad.lambda_exp_fraction = 1.0;
    CHECK_THROWS_AS(derive_constants(p.system, sch, p.theta0, bad), DomainError);
    bad = {};
    bad.lambda_hp_fraction = -0.2;
    CHECK_THROWS_AS(derive_constants(p.system, sch, p.theta0, bad), DomainError);

    // the singular-study system is not positive definite
    const Problem ce = counterexample_problem({0.0, 5.0});
    CHECK_THROWS_AS(derive_constants(ce.system, sch, {0.0, 0.0}),
                    InapplicabilityError);

    // raw system with no discount: the noise constant has nothing to work with
    const LinearSystem no_gamma = make_raw_system(Matrix(1, 1, {2.0}), {4.0});
    CHECK_THROWS_AS(derive_constants(no_gamma, sch, {0.0}), ContractError);

    CHECK_THROWS_AS(derive_constants(p.system, sch, {0.0, 0.0}), DimensionError);

    // enumeration-based noise constant requires the chain
    ConstantOptions tight;
    tight.tight_noise_constant = true;
    CHECK_THROWS_AS(derive_constants(p.system, sch, p.theta0, tight), ContractError);
}

TEST_CASE("burn-in constant closed form on a scalar system") {
    const auto p = scalar_raw_problem();
    ConstantOptions opts;
    opts.lambda_exp_fraction = 0.25; // lambda = 0.25 * 4 = 1 exactly
    const auto c = derive_constants(p.system, StepsizeSchedule(0.5), p.theta0, opts);

    CHECK(c.lambda_exp == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.i0 == 1); // (2 sigma / lambda)^(1/(1-sigma)) = 1
    const double expected = std::exp(0.5 * (1.0 + 1.0 / std::sqrt(2.0)));
    CHECK(c.k_b == doctest::Approx(expected).epsilon(1e-14));

    CHECK(c.k_m == doctest::Approx(2.375).epsilon(1e-14));
    CHECK(c.k_s == doctest::Approx(2.0 * 2.375 * 2.375).epsilon(1e-14));
    CHECK(c.m == 26); // ceil((15.28125 / 3)^2)
    CHECK(std::isfinite(c.k_p));

    // K1, K2 assemble from the parts that are already checked
    const double k1_expected =
        c.k_p * std::exp(c.lambda_exp) * (c.e0 + 2.0 * c.k_s / c.lambda_exp * c.k_b);
    const double k2_expected =
        c.k_p * std::exp(0.5 * c.lambda_exp) * (2.0 * c.k_s / c.lambda_exp);
    CHECK(c.k1 == doctest::Approx(k1_expected).epsilon(1e-12));
    CHECK(c.k2 == doctest::Approx(k2_expected).epsilon(1e-12));
}

TEST_CASE("lambda_hp lands on the removable point and is nudged") {
    const auto p = scalar_raw_problem();
    ConstantOptions opts;
    opts.lambda_hp_fraction = 0.25; // 0.25 * 2 = 0.5 exactly
    const auto c = derive_constants(p.system, StepsizeSchedule(0.5), p.theta0, opts);
    CHECK(c.lambda_hp_perturbed);
    CHECK(c.lambda_hp == doctest::Approx(0.5 * (1.0 - 1e-6)).epsilon(1e-12));
    CHECK(c.lambda_hp < 0.5);
}

TEST_CASE("grid-certified decay envelope") {
    // normal matrices: the envelope is maximal at t = 0
    CHECK(estimate_k_lambda(Matrix::identity(2), 0.5) ==
          doctest::Approx(1.05).epsilon(1e-14));
    CHECK(estimate_k_lambda(Matrix{{2.0, 1.0}, {1.0, 2.0}}, 0.5) ==
          doctest::Approx(1.05).epsilon(1e-13));

    // non-normal transient growth forces a real constant
    const Matrix jordan{{1.0, 10.0}, {0.0, 1.0}};
    const double k = estimate_k_lambda(jordan, 0.5);
    CHECK(k > 5.0);
    CHECK(k < 20.0);

    CHECK_THROWS_AS(estimate_k_lambda(Matrix::identity(2), 1.0), DomainError);
    CHECK_THROWS_AS(estimate_k_lambda(Matrix::identity(2), 1.5), DomainError);
    CHECK_THROWS_AS(estimate_k_lambda(Matrix(2, 3), 0.5), DimensionError);
    CHECK_THROWS_AS(estimate_k_lambda(Matrix::identity(2), 0.5, 10), DomainError);

    // lambda hugging the spectral abscissa: the peak escapes the grid
    bool rising = false;
    try {
        estimate_k_lambda(jordan, 0.999);
    } catch (const DomainError& e) {
        rising = std::string(e.what()).find("still rising") != std::string::npos;
    }
    CHECK(rising);
}

TEST_CASE("per-step contraction matrix and its eigenvalue bound") {
    const auto p = fixtures::const_chain();
    const auto c = derive_constants(p.system, StepsizeSchedule(0.5), p.theta0);

    // scalar case: Lambda(1) = 1 - 0.25 + 8.015625
    CHECK(contraction_matrix(c, 1.0)(0, 0) ==
          doctest::Approx(8.765625).epsilon(1e-14));
    CHECK(contraction_factor(c, 1.0) == doctest::Approx(8.765625).epsilon(1e-13));
    // d = 1: the eigenvalue-sum bound is an equality
    for (double a : {1.0, 0.3, 0.05, 0.001})
        CHECK(contraction_factor(c, a) ==
              doctest::Approx(contraction_factor_upper(c, a)).epsilon(1e-12));

    // d = 3: the bound is one-sided
    const auto rp = fixtures::random_problem(fixtures::kRandom5StateSeed, 5, 3);
    ConstantOptions opts;
    opts.lambda_exp_fraction = 0.1;
    const auto c3 =
        derive_constants(rp.system, StepsizeSchedule(0.5), rp.theta0, opts);
    for (double a : {1.0, 0.5, 0.1, 0.01, 0.001}) {
        const Matrix lam = contraction_matrix(c3, a);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(lam(i, j) == doctest::Approx(lam(j, i)).epsilon(1e-12));
        CHECK(contraction_factor(c3, a) <=
              contraction_factor_upper(c3, a) + 1e-12);
    }
}

TEST_CASE("envelope dominates the true contraction products") {
    // finite k_p regime: multiply the factors out and compare directly
    const auto p = scalar_raw_problem();
    ConstantOptions opts;
    opts.lambda_exp_fraction = 0.25;
    const StepsizeSchedule sch(0.5);
    const auto c = derive_constants(p.system, sch, p.theta0, opts);
    const StepsizeTable table(sch, 301);

    for (std::size_t k = 0; k <= 300; k += 7) {
        double log_prod = 0.0;
        for (std::size_t n = k; n <= 300; ++n) {
            log_prod += std::log(contraction_factor(c, table.alphas[n]));
            CHECK(log_prod <= log_product_bound(c, table, k, n) + 1e-12);
        }
    }

    CHECK_THROWS_AS(log_product_bound(c, table, 5, 4), DomainError);
    CHECK_THROWS_AS(log_product_bound(c, table, 0, 301), DomainError);

    // the scan agrees with the worst pair and stays nonpositive
    const auto dom = check_product_dominance(c, table, 300);
    CHECK(dom.max_gap_log <= 1e-12);
    CHECK(dom.argmax_k <= dom.argmax_n);
    double recheck = 0.0;
    for (std::size_t n = dom.argmax_k; n <= dom.argmax_n; ++n)
        recheck += std::log(contraction_factor(c, table.alphas[n]));
    CHECK(recheck - log_product_bound(c, table, dom.argmax_k, dom.argmax_n) ==
          doctest::Approx(dom.max_gap_log).epsilon(1e-9));
}

TEST_CASE("dominance scan on the const-chain with a modest envelope rate") {
    const auto p = fixtures::const_chain();
    ConstantOptions opts;
    opts.lambda_exp_fraction = 0.2;
    const StepsizeSchedule sch(0.5);
    const auto c = derive_constants(p.system, sch, p.theta0, opts);
    CHECK(c.m == 1607); // ceil((8.015625 / 0.05 / 4)^2) after the wider margin
    const StepsizeTable table(sch, 2001);
    const auto dom = check_product_dominance(c, table, 2000);
    CHECK(dom.max_gap_log <= 1e-9);
}

TEST_CASE("finite-horizon bound agrees with its brute-force form") {
    const auto p = scalar_raw_problem();
    ConstantOptions opts;
    opts.lambda_exp_fraction = 0.25;
    const StepsizeSchedule sch(0.5);
    const auto c = derive_constants(p.system, sch, p.theta0, opts);

    for (std::size_t n : {std::size_t(0), std::size_t(1), std::size_t(10),
                          std::size_t(100), std::size_t(1000)}) {
        const double got = log_expectation_bound_general(c, sch, n);
        const double want = oracle::naive_log_expectation_bound(c, sch, n);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }

    // plain-arithmetic cross-check with small synthetic constants
    const auto s = synthetic_constants();
    const StepsizeSchedule sch2(0.5);
    for (std::size_t n : {std::size_t(0), std::size_t(1), std::size_t(5),
                          std::size_t(50)}) {
        const double got = expectation_bound_general(s, sch2, n);
        const double want = oracle::naive_expectation_bound_linear(s, sch2, n);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }

    // one advance: K_p (e^{-lambda alpha_0} e0 + K_s alpha_0^2) by hand
    ExpectationBoundSeries series(s, sch2);
    series.advance();
    CHECK(series.steps() == 1);
    CHECK(series.bound() ==
          doctest::Approx(2.0 * (std::exp(-0.5) * 3.0 + 1.0)).epsilon(1e-14));

    // degenerate inputs collapse to zero
    auto z = synthetic_constants();
    z.k_s = 0.0;
    z.e0 = 0.0;
    CHECK(expectation_bound_general(z, sch2, 10) == 0.0);
    CHECK(log_expectation_bound_general(z, sch2, 10) ==
          -std::numeric_limits<double>::infinity());

    // schedule/constants sigma mismatch refuses
    CHECK_THROWS_AS(ExpectationBoundSeries(s, StepsizeSchedule(0.75)), ContractError);
}

TEST_CASE("closed-form rate bound: formula, domain, and dominance") {
    BoundConstants c;
    c.sigma = 0.5;
    c.closed_form = true;
    c.lambda_exp = 0.2;
    c.log_k1 = std::log(10.0);
    c.k1 = 10.0;
    c.log_k2 = std::log(5.0);
    c.k2 = 5.0;

    const double expected = 10.0 * std::exp(-1.0) + 0.5;
    CHECK(expectation_bound_closed(c, 100) ==
          doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::exp(log_expectation_bound_closed(c, 100)) ==
          doctest::Approx(expected).epsilon(1e-14));

    CHECK_THROWS_AS(expectation_bound_closed(c, 0), DomainError);

    BoundConstants unit;
    unit.sigma = 1.0;
    unit.closed_form = false;
    bool pointed = false;
    try {
        expectation_bound_closed(unit, 10);
    } catch (const DomainError& e) {
        pointed = std::string(e.what()).find("high-probability") != std::string::npos;
    }
    CHECK(pointed);

    // on a real system the closed form dominates the summation form
    const auto p = scalar_raw_problem();
    ConstantOptions opts;
    opts.lambda_exp_fraction = 0.25;
    const StepsizeSchedule sch(0.5);
    const auto rc = derive_constants(p.system, sch, p.theta0, opts);
    for (std::size_t n : {std::size_t(10), std::size_t(100), std::size_t(1000),
                          std::size_t(10000)}) {
        const double log_sum = log_expectation_bound_general(rc, sch, n);
        const double log_closed = log_expectation_bound_closed(rc, n + 1);
        CHECK(log_closed >= log_sum - 1e-9);
    }
}

TEST_CASE("noise tail probability: scalar formulas and clamps") {
    BoundConstants c;
    c.dim = 1;
    c.c_m2 = 3.0;
    c.c_star = 2.0;
    c.r0 = 1.5;

    // fast-decay branch
    c.lambda_hp = 0.8;
    const double r_wc4 = 5.0 * 2.0 * 1.5; // (n0 + 1) c_star r0 at n0 = 4
    const double denom = 2.0 * 9.0 * r_wc4 * r_wc4;
    const double want_fast =
        std::min(1.0, std::exp(std::log(2.0) - 11.0 * 25.0 / denom));
    CHECK(concentration_tail(c, 4, 6, 10, 5.0) ==
          doctest::Approx(want_fast).epsilon(1e-13));

    // slow-decay branch uses both indices
    c.lambda_hp = 0.3;
    const double r_wc2 = 3.0 * 2.0 * 1.5;
    const double denom2 = 2.0 * 9.0 * r_wc2 * r_wc2;
    const double want_slow =
        std::min(1.0, std::exp(std::log(2.0) - std::pow(6.0, 0.4) *
                                                   std::pow(11.0, 0.6) * 25.0 /
                                                   denom2));
    CHECK(concentration_tail(c, 2, 5, 10, 5.0) ==
          doctest::Approx(want_slow).epsilon(1e-13));

    // clamp to [0, 1] at the extremes, monotone in the radius
    CHECK(concentration_tail(c, 2, 5, 10, 1e-9) == 1.0);
    CHECK(concentration_tail(c, 2, 5, 10, 1e9) <= 1e-300);
    CHECK(concentration_tail(c, 2, 5, 10, 4.0) >=
          concentration_tail(c, 2, 5, 10, 6.0));

    CHECK_THROWS_AS(concentration_tail(c, 0, 5, 10, 1.0), DomainError);
    CHECK_THROWS_AS(concentration_tail(c, 4, 3, 10, 1.0), DomainError);
    CHECK_THROWS_AS(concentration_tail(c, 2, 8, 7, 1.0), DomainError);
    CHECK_THROWS_AS(concentration_tail(c, 2, 5, 10, 0.0), DomainError);
    c.lambda_hp = 0.5;
    CHECK_THROWS_AS(concentration_tail(c, 2, 5, 10, 1.0), DomainError);
}

TEST_CASE("bad-event probabilities: formulas, prerequisites, threshold forms") {
    BoundConstants c;
    c.dim = 1;
    c.c_m2 = 3.0;
    c.c_star = 2.0;
    c.r0 = 1.5;
    c.k_m = 2.0;
    c.k_lambda = 1.1;
    c.a_norm = 0.5;

    const double drift = 6.0 * 1.1 * 0.5 * (0.5 + 4.0);

    SUBCASE("fast branch") {
        c.lambda_hp = 0.8;
        const std::uint64_t n0 = 1000, nc = 5000000;
        const double eps = 0.25;
        const auto eb = event_probability_bounds(c, n0, nc, eps);

        const double r_wc = 1001.0 * 3.0;
        CHECK(eb.r_wc == doctest::Approx(r_wc).epsilon(1e-14));
        const double d3c = 9.0;
        const double want_mid =
            std::log(16.0 * 9.0) - 1000.0 / (8.0 * d3c);
        CHECK(eb.log_p_mid == doctest::Approx(want_mid).epsilon(1e-12));
        const double ratio = r_wc / eps;
        const double want_after =
            std::log(36.0 * 9.0) + 2.0 * std::log(ratio) -
            std::pow(6.6, 1.25) / (18.0 * d3c) * 5000001.0 *
                std::pow(1.0 / ratio, 2.0 - 1.25);
        CHECK(eb.log_p_after == doctest::Approx(want_after).epsilon(1e-12));
        CHECK(eb.p_mid == doctest::Approx(std::min(1.0, std::exp(want_mid)))
                              .epsilon(1e-12));

        CHECK(eb.n0_threshold ==
              doctest::Approx(std::max(drift / 0.8, std::pow(2.0, 1.25)))
                  .epsilon(1e-12));
        const double eps_eff = std::min(eps, r_wc);
        CHECK(eb.nc_threshold_outer ==
              doctest::Approx((1.0 + drift / (0.8 * eps_eff)) * r_wc)
                  .epsilon(1e-12));
        CHECK(eb.nc_threshold_inner ==
              doctest::Approx((1.0 + drift * 3.0 / (0.8 * eps_eff)) * 1001.0)
                  .epsilon(1e-12));
        CHECK(eb.nc_forms_disagree); // c_star r0 = 3, not 1
        CHECK(eb.applicable);
        CHECK(eb.failed.empty());
    }

    SUBCASE("slow branch and prerequisite failures") {
        c.lambda_hp = 0.3;
        const std::uint64_t n0 = 2, nc = 10;
        const auto eb = event_probability_bounds(c, n0, nc, 0.25);

        const double d3c = 9.0;
        const double r_wc = 3.0 * 3.0;
        const double want_mid = std::log(2.0) +
                                std::log(8.0 * d3c / 0.3) / 0.6 -
                                2.0 / (64.0 * d3c) -
                                (0.4 / 0.6) * std::log(3.0);
        CHECK(eb.log_p_mid == doctest::Approx(want_mid).epsilon(1e-12));
        const double want_after =
            std::log(2.0) +
            std::log(18.0 * d3c * r_wc * r_wc / (0.0625 * 0.3)) / 0.6 -
            1.21 / (4.0 * d3c) * 11.0;
        CHECK(eb.log_p_after == doctest::Approx(want_after).epsilon(1e-12));

        CHECK_FALSE(eb.applicable);
        REQUIRE(eb.failed.size() == 2);
        CHECK(eb.failed[0].find("n0") != std::string::npos);
        CHECK(eb.failed[1].find("discretization") != std::string::npos);
    }

    SUBCASE("threshold forms coincide exactly when c_star r0 = 1") {
        // theta* = 0 and theta0 = theta*: both factors collapse to 1
        Problem p;
        p.system = make_raw_system(Matrix(1, 1, {2.0}), {0.0}, std::nullopt, 0.5);
        p.theta0 = {0.0};
        const auto rc = derive_constants(p.system, StepsizeSchedule(1.0), p.theta0);
        const auto eb = event_probability_bounds(rc, 1000, 1000000, 0.1);
        CHECK_FALSE(eb.nc_forms_disagree);
        CHECK(eb.nc_threshold_outer ==
              doctest::Approx(eb.nc_threshold_inner).epsilon(1e-14));
    }

    c.lambda_hp = 0.8;
    CHECK_THROWS_AS(event_probability_bounds(c, 10, 10, 0.0), DomainError);
    c.lambda_hp = 0.5;
    CHECK_THROWS_AS(event_probability_bounds(c, 10, 10, 0.1), DomainError);
}

TEST_CASE("iteration-count recipe: branches, consistency, monotonicity") {
    // fast branch: scalar system with lambda_hp = 1.8
    const auto fast = scalar_raw_problem();
    const auto cf = derive_constants(fast.system, StepsizeSchedule(1.0), fast.theta0);
    REQUIRE(cf.lambda_hp == doctest::Approx(1.8).epsilon(1e-14));

    const auto sc = sample_complexity(cf, 0.1, 0.05);
    CHECK(sc.lambda_above_half);
    CHECK(sc.epsilon == 0.1);
    CHECK(sc.delta == 0.05);

    // recompute the recipe from the published constants
    const double d3c = cf.c_m2 * cf.c_m2;
    const double d5c = d3c;
    const double drift = 6.0 * cf.k_lambda * cf.a_norm * (cf.a_norm + 2.0 * cf.k_m);
    const double n0_want =
        std::ceil(std::max({drift / 1.8, std::pow(2.0, 1.0 / 1.8),
                            8.0 * d3c * std::log(32.0 * d5c / 0.05)}));
    CHECK(sc.n0 == doctest::Approx(n0_want).epsilon(1e-12));
    const double r_wc = (n0_want + 1.0) * cf.c_star * cf.r0;
    const double ratio = r_wc / 0.1;
    const double nc_want = std::ceil(std::max(
        (1.0 + drift / (1.8 * std::min(0.1, r_wc))) * r_wc,
        18.0 * d3c / std::pow(6.0 * cf.k_lambda, 1.0 / 1.8) *
            std::pow(ratio, 2.0 - 1.0 / 1.8) *
            std::log(72.0 * d5c * ratio * ratio / 0.05)));
    CHECK(sc.nc == doctest::Approx(nc_want).epsilon(1e-12));
    const double growth = 6.0 * cf.k_lambda * r_wc / 0.1;
    const double n1_want = std::ceil((nc_want + 1.0) * std::pow(growth, 1.0 / 1.8) -
                                     n0_want);
    CHECK(sc.n1 == doctest::Approx(n1_want).epsilon(1e-12));
    CHECK(sc.n_total == doctest::Approx(sc.n0 + sc.n1).epsilon(1e-15));
    CHECK(sc.astronomically_large == !(sc.n_total <= 9007199254740992.0));
    CHECK(sc.log10_n_total == doctest::Approx(std::log10(sc.n_total)).epsilon(1e-12));

    // slow branch: const-chain lambda_hp = 0.1125
    const auto slow = fixtures::const_chain();
    const auto cs = derive_constants(slow.system, StepsizeSchedule(1.0), slow.theta0);
    REQUIRE(cs.lambda_hp < 0.5);
    const auto ss = sample_complexity(cs, 0.1, 0.05);
    CHECK_FALSE(ss.lambda_above_half);
    CHECK(std::isfinite(ss.log10_n_total));
    CHECK(ss.log10_n_total > 0.0);

    // smaller epsilon or delta never shrinks the recipe
    const auto tighter_eps = sample_complexity(cf, 0.01, 0.05);
    CHECK(tighter_eps.log10_n_total >= sc.log10_n_total);
    const auto tighter_delta = sample_complexity(cf, 0.1, 0.005);
    CHECK(tighter_delta.n0 >= sc.n0);
    CHECK(tighter_delta.log10_n_total >= sc.log10_n_total);

    CHECK_THROWS_AS(sample_complexity(cf, 0.0, 0.05), DomainError);
    CHECK_THROWS_AS(sample_complexity(cf, 0.1, 0.0), DomainError);
    CHECK_THROWS_AS(sample_complexity(cf, 0.1, 1.0), DomainError);
    BoundConstants half;
    half.lambda_hp = 0.5;
    CHECK_THROWS_AS(sample_complexity(half, 0.1, 0.05), DomainError);
}

TEST_CASE("per-step noise magnitude constant holds across the support") {
    const auto p = fixtures::noisy_two_state();
    const auto c = derive_constants(p.system, StepsizeSchedule(1.0), p.theta0);
    const double theta_star = (*p.system.theta_star)[0];

    std::mt19937_64 gen(123);
    std::uniform_real_distribution<double> u(-1000.0, 1000.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const Vec theta = {theta_star + u(gen)};
        const double err = std::abs(theta[0] - theta_star);
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t t = 0; t < 2; ++t) {
                const Sample sample{p.mdp->features.row(s),
                                    p.mdp->features.row(t), p.mdp->reward(s, t)};
                const double m = norm2(extract_noise(sample, theta, p.system));
                CHECK(m <= c.k_m * (1.0 + err) * (1.0 + 1e-12));
            }
    }
}

TEST_CASE("enumerated noise constant tightens and still dominates") {
    const auto p = fixtures::noisy_two_state();
    ConstantOptions tight;
    tight.tight_noise_constant = true;
    const auto c = derive_constants(p.system, StepsizeSchedule(1.0), p.theta0, tight,
                                    &*p.mdp, &*p.nu);
    const auto loose = derive_constants(p.system, StepsizeSchedule(1.0), p.theta0);
    CHECK(c.k_s_tightened);
    CHECK(c.k_s < loose.k_s);
    CHECK(c.k_s > 0.0);

    const double theta_star = (*p.system.theta_star)[0];
    std::mt19937_64 gen(321);
    std::uniform_real_distribution<double> u(-1000.0, 1000.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const Vec theta = {theta_star + u(gen)};
        const double err2 = (theta[0] - theta_star) * (theta[0] - theta_star);
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t t = 0; t < 2; ++t) {
                const Sample sample{p.mdp->features.row(s),
                                    p.mdp->features.row(t), p.mdp->reward(s, t)};
                const double m = norm2(extract_noise(sample, theta, p.system));
                CHECK(m * m <= c.k_s * (1.0 + err2) * (1.0 + 1e-9));
            }
    }
}
