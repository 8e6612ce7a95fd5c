#pragma once

#include <optional>
#include <string>
#include <vector>

#include "td0/linalg.hpp"
#include "td0/matrix.hpp"
#include "td0/rng.hpp"

namespace td0 {

/// Finite MDP under a fixed policy: states 0..n_states-1, row-stochastic
/// transition matrix, per-transition rewards, one feature row per state.
struct MdpSpec {
    std::size_t n_states = 0;
    double gamma = 0.0;
    Matrix transition; // n_states x n_states
    Matrix reward;     // n_states x n_states
    Matrix features;   // n_states x dim

    std::size_t dim() const { return features.cols(); }

    /// Structural checks: shapes, row sums within 1e-12 of 1, entries in
    /// [0,1], gamma in [0,1). Throws on the first structural problem.
    void validate() const;
};

/// One reported violation of the boundedness conditions the per-step noise
/// bound relies on (feature norms above 1/2 or |reward| above 1).
struct BoundednessViolation {
    std::string kind; // "feature_norm" or "reward_magnitude"
    std::size_t state = 0;
    std::size_t next_state = 0; // meaningful for rewards only
    double value = 0.0;
};

/// Check ||phi(s)|| <= 1/2 and |R(s,s')| <= 1 everywhere; empty result
/// means the spec satisfies both.
std::vector<BoundednessViolation> check_boundedness(const MdpSpec& spec);

struct StationaryDistribution {
    Vec nu;
};

/// Stationary distribution of the chain: solves nu^T P = nu^T with the
/// normalization sum(nu)=1 replacing one equation. Entries at or below
/// 1e-12, or a singular replaced system, are treated as failed ergodicity.
StationaryDistribution stationary_distribution(const MdpSpec& spec);

/// The pair (A, b) steering the mean dynamics, with the fixed point when it
/// exists. A = E[phi (phi - gamma phi')^T], b = E[r phi], expectations over
/// s ~ nu, s' ~ P(s, .).
struct LinearSystem {
    enum class Origin { MdpDerived, Raw };

    Matrix a;
    Vec b;
    std::optional<Vec> theta_star; // A^{-1} b when A is invertible
    bool singular = false;
    SpectralSummary spectral;
    Origin origin = Origin::Raw;
    std::optional<double> gamma;     // discount used to build A (or supplied)
    std::optional<Vec> theta_ref;    // external reference for singular systems

    std::size_t dim() const { return a.rows(); }

    /// theta_star if defined, else the supplied reference. Used as the
    /// anchor for error norms and the flow decomposition.
    const Vec& reference_point() const;
};

/// Exact A, b, theta_star from spec and stationary distribution.
/// An MDP-derived system must have lambda_min(A + A^T) > 0; violation
/// (rank-deficient features) raises InapplicabilityError.
LinearSystem compute_system(const MdpSpec& spec, const StationaryDistribution& nu);

/// Wrap an externally supplied pair (A, b). theta_star is solved for when A
/// is invertible at the pivot threshold; otherwise the system is marked
/// singular and theta_ref (if given) anchors everything downstream.
LinearSystem make_raw_system(Matrix a, Vec b,
                             std::optional<Vec> theta_ref = std::nullopt,
                             std::optional<double> gamma = std::nullopt);

/// One environment transition: features of s, features of s', reward.
struct Sample {
    Vec phi;
    Vec phi_next;
    double reward = 0.0;
};

/// Draw s ~ nu and s' ~ P(s, .) using exactly two uniforms from rng.
Sample draw_sample(const MdpSpec& spec, const StationaryDistribution& nu, Rng& rng);

} // namespace td0
