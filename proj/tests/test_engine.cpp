#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "td0/engine.hpp"
#include "td0/errors.hpp"
#include "td0/experiments.hpp"
#include "td0/linalg.hpp"

using namespace td0;

TEST_CASE("stepsize schedule domain and shape") {
    CHECK_THROWS_AS(StepsizeSchedule(0.0), DomainError);
    CHECK_THROWS_AS(StepsizeSchedule(1.5), DomainError);
    CHECK_THROWS_AS(StepsizeSchedule(-0.5), DomainError);

    const StepsizeSchedule s(0.5);
    CHECK(s.alpha(0) == 1.0);
    for (std::size_t n = 0; n < 100; ++n) CHECK(s.alpha(n + 1) < s.alpha(n));

    const StepsizeTable table(StepsizeSchedule(1.0), 5);
    CHECK(table.times[0] == 0.0);
    CHECK(table.times[3] == doctest::Approx(1.0 + 0.5 + 1.0 / 3.0).epsilon(1e-15));
    CHECK(table.alphas.size() == 5);
    CHECK(table.times.size() == 6);
}

TEST_CASE("td0_step evaluates the update rule") {
    const Sample s{{0.5}, {0.5}, 1.0};

    const Vec unchanged = td0_step({3.0}, s, 0.5, 0.0);
    CHECK(unchanged[0] == 3.0);

    const Vec from_zero = td0_step({0.0}, s, 0.5, 1.0);
    CHECK(from_zero[0] == doctest::Approx(0.5).epsilon(1e-15));

    // at the fixed point the TD error is r + gamma phi' theta - phi theta = 0
    const Vec fixed = td0_step({4.0}, s, 0.5, 0.7);
    CHECK(fixed[0] == 4.0);
}

TEST_CASE("extract_noise vanishes on the const-chain and in expectation") {
    const auto cc = fixtures::const_chain();
    for (double theta : {0.0, 4.0, -2.7}) {
        const Sample s{{0.5}, {0.5}, 1.0};
        const Vec m = extract_noise(s, {theta}, cc.system);
        CHECK(std::abs(m[0]) <= 1e-15);
    }

    // exhaustive support enumeration on the noisy chain: E[M] = 0
    const auto p = fixtures::noisy_two_state();
    for (const Vec theta : {Vec{0.0}, Vec{*p.system.theta_star}, Vec{13.37}}) {
        double mean = 0.0;
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t t = 0; t < 2; ++t) {
                const Sample sample{p.mdp->features.row(s), p.mdp->features.row(t),
                                    p.mdp->reward(s, t)};
                const double w = p.nu->nu[s] * p.mdp->transition(s, t);
                mean += w * extract_noise(sample, theta, p.system)[0];
            }
        CHECK(std::abs(mean) <= 1e-12);
    }
}

TEST_CASE("trajectories reconstruct exactly from their recorded noise") {
    const auto p = fixtures::noisy_two_state();
    RecordOptions opts;
    opts.full = true;
    opts.noise_vectors = true;
    const auto rec = run_trajectory(p, StepsizeSchedule(0.5), 500, 42, opts);
    REQUIRE(rec.thetas.size() == 501);
    REQUIRE(rec.noise_vectors.size() == 500);
    const StepsizeSchedule sch(0.5);
    for (std::size_t n = 0; n < 500; ++n) {
        const double alpha = sch.alpha(n);
        const Vec drift = p.system.b - p.system.a * rec.thetas[n];
        const Vec want = rec.thetas[n] + alpha * (drift + rec.noise_vectors[n]);
        const double scale = std::max(1.0, norm2(rec.thetas[n]));
        CHECK(norm2(want - rec.thetas[n + 1]) <= 1e-12 * scale);
    }

    // times strictly increase
    for (std::size_t j = 0; j + 1 < rec.times.size(); ++j)
        CHECK(rec.times[j] < rec.times[j + 1]);
}

TEST_CASE("noiseless const-chain error decays monotonically") {
    auto p = fixtures::const_chain();
    p.noise = NoiseModel::none();
    RecordOptions opts;
    opts.error_norms = true;
    const auto rec = run_trajectory(p, StepsizeSchedule(1.0), 2000, 1, opts);
    REQUIRE(rec.error_norms.size() == 2001);
    CHECK(rec.error_norms[0] == doctest::Approx(4.0).epsilon(1e-14));
    for (std::size_t n = 0; n + 1 < rec.error_norms.size(); ++n)
        CHECK(rec.error_norms[n + 1] < rec.error_norms[n]);
}

TEST_CASE("singular-study trajectory: limit and frozen coordinate") {
    Problem p = counterexample_problem({0.0, 5.0});
    p.noise = NoiseModel::none();
    RecordOptions opts;
    opts.full = true;
    const auto rec = run_trajectory(p, StepsizeSchedule(1.0), 2000, 3, opts);

    // theta(1) lands on 2 - theta0(1) after one unit step and stays there
    CHECK(std::abs(rec.thetas.back()[0] - (-3.0)) <= 1e-6);
    CHECK(std::abs(rec.thetas.back()[1] - 5.0) == 0.0);
    for (const auto& th : rec.thetas) CHECK(th[1] == 5.0);
}

TEST_CASE("divergence names the offending step") {
    Problem p;
    p.system = make_raw_system(Matrix(1, 1, {-1.0}), {0.0});
    p.noise = NoiseModel::none();
    p.theta0 = {1.0};
    RecordOptions opts;
    bool thrown = false;
    try {
        run_trajectory(p, StepsizeSchedule(0.5), 100000, 1, opts);
    } catch (const DivergenceError& e) {
        thrown = true;
        CHECK(e.step > 0);
        CHECK(std::string(e.what()).find("divergence") != std::string::npos);
    }
    CHECK(thrown);
}

TEST_CASE("interpolation is exact at nodes and linear between") {
    const auto p = fixtures::noisy_two_state();
    RecordOptions full_opts;
    full_opts.full = true;
    const auto rec = run_trajectory(p, StepsizeSchedule(0.5), 50, 7, full_opts);

    for (std::size_t j : {std::size_t(0), std::size_t(20), std::size_t(50)}) {
        const Vec v = interpolate(rec, rec.times[j]);
        CHECK(v[0] == rec.thetas[j][0]);
    }
    const double mid = 0.5 * (rec.times[10] + rec.times[11]);
    const Vec vm = interpolate(rec, mid);
    CHECK(vm[0] ==
          doctest::Approx(0.5 * (rec.thetas[10][0] + rec.thetas[11][0])).epsilon(1e-13));

    CHECK_THROWS_AS(interpolate(rec, rec.times.back() + 1.0), DomainError);
    CHECK_THROWS_AS(interpolate(rec, -0.5), DomainError);

    // sparse checkpoints: interpolation between non-adjacent steps refuses
    RecordOptions sparse;
    sparse.checkpoints = {0, 10, 20};
    const auto rec2 = run_trajectory(p, StepsizeSchedule(0.5), 20, 7, sparse);
    CHECK(interpolate(rec2, rec2.times[1])[0] == rec2.thetas[1][0]);
    CHECK_THROWS_AS(interpolate(rec2, 0.5 * (rec2.times[1] + rec2.times[2])),
                    ContractError);
}

TEST_CASE("ode_solution matches the scalar exponential and decays") {
    const auto cc = fixtures::const_chain();
    const Vec ref = {4.0};
    const Vec at8 = ode_solution(cc.system, 8.0, 0.0, {0.0}, ref);
    CHECK(at8[0] == doctest::Approx(4.0 - 4.0 * std::exp(-1.0)).epsilon(1e-12));

    const Vec same = ode_solution(cc.system, 3.0, 3.0, {1.5}, ref);
    CHECK(same[0] == 1.5);

    CHECK_THROWS_AS(ode_solution(cc.system, 1.0, 2.0, {0.0}, ref), DomainError);

    double prev = norm2(ode_solution(cc.system, 0.0, 0.0, {0.0}, ref) - ref);
    for (int i = 1; i <= 40; ++i) {
        const double t = 0.25 * double(i);
        const double cur = norm2(ode_solution(cc.system, t, 0.0, {0.0}, ref) - ref);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("error decomposition: identity, base case, no-noise degeneracy") {
    // noiseless: the martingale term is exactly zero
    auto quiet = fixtures::const_chain();
    quiet.noise = NoiseModel::none();
    RecordOptions opts;
    opts.full = true;
    opts.noise_vectors = true;
    const auto quiet_rec = run_trajectory(quiet, StepsizeSchedule(0.5), 50, 5, opts);
    const auto quiet_dec = decompose_error(quiet_rec, quiet.system, 0, 50);
    CHECK(quiet_dec.martingale[0] == 0.0);
    CHECK(norm2(quiet_dec.residual) <= 1e-10);

    const auto noisy = fixtures::const_chain_synthetic_noise();
    const auto rec = run_trajectory(noisy, StepsizeSchedule(0.5), 500, 11, opts);

    // single-interval base case
    const auto base = decompose_error(rec, noisy.system, 7, 8);
    CHECK(norm2(base.residual) <= 1e-10);

    // long window: the identity is exact up to quadrature rounding
    const auto dec = decompose_error(rec, noisy.system, 0, 500);
    const Vec ref = noisy.system.reference_point();
    const double err = norm2(rec.thetas[500] - ref);
    CHECK(norm2(dec.residual) <= 1e-8 * (1.0 + err));
    const Vec sum = dec.ode_term + dec.discretization + dec.martingale;
    CHECK(norm2(dec.lhs - sum) <= 1e-8 * (1.0 + err));

    // missing noise record refuses
    RecordOptions bare;
    bare.full = true;
    const auto no_noise_rec = run_trajectory(noisy, StepsizeSchedule(0.5), 20, 11, bare);
    CHECK_THROWS_AS(decompose_error(no_noise_rec, noisy.system, 0, 20), ContractError);
}

TEST_CASE("error decomposition matches brute-force Riemann integration") {
    const auto noisy = fixtures::const_chain_synthetic_noise();
    RecordOptions opts;
    opts.full = true;
    opts.noise_vectors = true;
    const auto rec = run_trajectory(noisy, StepsizeSchedule(0.5), 20, 13, opts);
    const auto dec = decompose_error(rec, noisy.system, 0, 20);
    const auto ref = oracle::riemann_vop(rec, noisy.system, 0, 20, 4000);
    CHECK(std::abs(dec.ode_term[0] - ref.ode[0]) <= 1e-10);
    CHECK(std::abs(dec.discretization[0] - ref.disc[0]) <= 1e-7);
    CHECK(std::abs(dec.martingale[0] - ref.mart[0]) <= 1e-7);
}

TEST_CASE("unit-stepsize time sums sandwich the discrete exponential") {
    const std::size_t n_max = 10000;
    const StepsizeTable table(StepsizeSchedule(1.0), n_max + 1);
    for (double lambda : {0.1, 0.5, 1.3}) {
        std::vector<double> decay(n_max + 2), low(n_max + 2), high(n_max + 2);
        for (std::size_t j = 0; j <= n_max + 1; ++j) {
            decay[j] = std::exp(-lambda * table.times[j]);
            low[j] = std::pow(double(j + 1), lambda);
            high[j] = std::pow(double(j + 2), lambda);
        }
        std::size_t violations = 0;
        for (std::size_t n = 0; n <= n_max; ++n) {
            for (std::size_t k = 0; k <= n; ++k) {
                // e^{-lambda (t_{n+1} - t_{k+1})} between the index ratios
                const double mid = decay[n + 1] / decay[k + 1];
                const double lo = low[k] / low[n];
                const double hi = high[k] / high[n];
                if (!(lo <= mid * (1.0 + 1e-12)) || !(mid <= hi * (1.0 + 1e-12)))
                    ++violations;
            }
        }
        CHECK(violations == 0);
    }
}
