#pragma once

// Shared test problems. The two hand-built chains have short pencil-and-paper
// derivations for every constant; the random generator pins seeds that were
// scanned once for positive definite systems with moderate constant chains
// (the stepsize-threshold index m stays far below its cap at sigma = 0.25).

#include <cstdint>

#include "td0/engine.hpp"
#include "td0/experiments.hpp"
#include "td0/mdp.hpp"
#include "td0/rng.hpp"

namespace fixtures {

using namespace td0;

// 2 states, uniform transitions, reward 1 everywhere, identical features.
// A = [0.125], b = [0.5], theta* = [4]; sampling is single-support, so the
// mdp noise is exactly zero: K_m = 2, K_s = 8, C_* = 5.
inline MdpSpec const_chain_spec() {
    MdpSpec spec;
    spec.n_states = 2;
    spec.gamma = 0.5;
    spec.transition = Matrix(2, 2, {0.5, 0.5, 0.5, 0.5});
    spec.reward = Matrix(2, 2, {1.0, 1.0, 1.0, 1.0});
    spec.features = Matrix(2, 1, {0.5, 0.5});
    return spec;
}

inline Problem make_problem(const MdpSpec& spec) {
    Problem p;
    p.mdp = spec;
    p.nu = stationary_distribution(spec);
    p.system = compute_system(spec, *p.nu);
    p.noise = NoiseModel::mdp_sampling();
    p.theta0.assign(p.system.dim(), 0.0);
    return p;
}

inline Problem const_chain() { return make_problem(const_chain_spec()); }

// The const-chain system with synthetic multiplicative sign noise
// M_{n+1} = [1] * Z_{n+1} * theta_n(0). Zero conditional mean, nonzero
// magnitude: useful wherever a nontrivial martingale term is needed on a
// system whose own sampling noise vanishes.
inline Problem const_chain_synthetic_noise() {
    Problem p = const_chain();
    p.mdp.reset();
    p.nu.reset();
    p.noise = NoiseModel::bernoulli_rank_one({1.0}, 0, {0.0});
    return p;
}

// 2 states with distinct features and rewards; genuinely noisy sampling.
// A ~ [0.2180], b ~ [-0.0932]; min real eigenvalue ~ 0.218, so the default
// high-probability lambda sits deep in the lambda < 1/2 branch.
inline MdpSpec noisy_two_state_spec() {
    MdpSpec spec;
    spec.n_states = 2;
    spec.gamma = 0.05;
    spec.transition = Matrix(2, 2, {0.1, 0.9, 0.1, 0.9});
    spec.reward = Matrix(2, 2, {0.9, -0.4, 0.3, -0.25});
    spec.features = Matrix(2, 1, {0.2, 0.5});
    return spec;
}

inline Problem noisy_two_state() { return make_problem(noisy_two_state_spec()); }

// Raw scalar system with min real eigenvalue 2: the default high-probability
// lambda is 1.8 > 1, which the fast-branch rate checks need. The sign noise
// is centered at 0 rather than theta* = 2, so it stays additive-scale near
// the fixed point and the mean-square error floors at the classic 1/n rate.
inline Problem rate_problem() {
    Problem p;
    p.system = make_raw_system(Matrix(1, 1, {2.0}), {4.0}, std::nullopt, 0.5);
    p.noise = NoiseModel::bernoulli_rank_one({1.0}, 0, {0.0});
    p.theta0 = {0.0};
    return p;
}

// Random ergodic MDP: transition weights bounded away from zero, rewards in
// [-1, 1], feature coordinates in [-1/(2 sqrt d), 1/(2 sqrt d)] so that
// ||phi|| <= 1/2 holds by construction, gamma in [0.3, 0.7].
inline MdpSpec random_mdp(std::uint64_t seed, std::size_t n_states, std::size_t d) {
    Rng rng(seed);
    MdpSpec spec;
    spec.n_states = n_states;
    spec.gamma = 0.3 + 0.4 * rng.next_uniform();
    spec.transition = Matrix(n_states, n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        double row = 0.0;
        for (std::size_t t = 0; t < n_states; ++t) {
            spec.transition(s, t) = 0.05 + 0.95 * rng.next_uniform();
            row += spec.transition(s, t);
        }
        for (std::size_t t = 0; t < n_states; ++t) spec.transition(s, t) /= row;
    }
    spec.reward = Matrix(n_states, n_states);
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t t = 0; t < n_states; ++t)
            spec.reward(s, t) = 2.0 * rng.next_uniform() - 1.0;
    const double half = 0.5 / std::sqrt(double(d));
    spec.features = Matrix(n_states, d);
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t j = 0; j < d; ++j)
            spec.features(s, j) = half * (2.0 * rng.next_uniform() - 1.0);
    return spec;
}

inline Problem random_problem(std::uint64_t seed, std::size_t n_states, std::size_t d) {
    return make_problem(random_mdp(seed, n_states, d));
}

// Pinned seeds, scanned once (see tests): 3-state/d=1 systems with
// sym_min_eig(A+A^T) >= 0.05, and a 5-state/d=3 system, all positive
// definite with m <= 10^7 at sigma = 0.25 under the fractions tests use.
inline constexpr std::uint64_t kRandom3StateSeeds[3] = {11, 17, 22};
inline constexpr std::uint64_t kRandom5StateSeed = 18;

} // namespace fixtures
