#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "td0/mdp.hpp"
#include "td0/schedule.hpp"

namespace td0 {

/// Per-step stochastic perturbation of the mean update.
struct NoiseModel {
    enum class Kind {
        None,            // deterministic mean dynamics
        MdpSampling,     // draw (s, s') each step, genuine TD(0)
        BernoulliRankOne // direction * Z * (theta[coordinate] - reference[coordinate])
    };

    Kind kind = Kind::None;
    Vec direction;
    std::size_t coordinate = 0;
    Vec reference;

    static NoiseModel none() { return {}; }
    static NoiseModel mdp_sampling() { return {Kind::MdpSampling, {}, 0, {}}; }
    static NoiseModel bernoulli_rank_one(Vec direction, std::size_t coordinate, Vec reference) {
        return {Kind::BernoulliRankOne, std::move(direction), coordinate, std::move(reference)};
    }
};

/// Everything one stochastic-approximation run needs.
struct Problem {
    LinearSystem system;
    NoiseModel noise;
    Vec theta0;
    std::optional<MdpSpec> mdp;              // required for MdpSampling noise
    std::optional<StationaryDistribution> nu;
};

/// What run_trajectory keeps. Full recordings are linear in n_max * dim;
/// checkpoint recordings only store the requested indices.
struct RecordOptions {
    std::vector<std::size_t> checkpoints; // ascending step indices in [0, n_max]
    bool full = false;                    // every theta_n; overrides checkpoints
    bool noise_vectors = false;           // M_{n+1} for every step
    bool noise_norms = false;             // ||M_{n+1}|| for every step
    bool error_norms = false;             // ||theta_n - reference|| for every n
};

struct TrajectoryRecord {
    std::uint64_t seed = 0;
    double sigma = 1.0;
    std::size_t n_max = 0;
    std::size_t dim = 0;
    bool full = false;

    std::vector<std::size_t> checkpoints; // indices of recorded iterates
    std::vector<Vec> thetas;              // one per checkpoint
    std::vector<double> times;            // t_n per checkpoint

    std::vector<double> noise_norms;  // size n_max when recorded
    std::vector<double> error_norms;  // size n_max + 1 when recorded
    std::vector<Vec> noise_vectors;   // size n_max when recorded
};

/// One TD(0) update from an observed transition:
/// theta + alpha * (r + gamma phi'^T theta - phi^T theta) * phi.
Vec td0_step(const Vec& theta, const Sample& sample, double gamma, double alpha);

/// Martingale-difference part of a sampled update:
/// (r + gamma phi'^T theta - phi^T theta) phi - (b - A theta).
/// The system must know its discount.
Vec extract_noise(const Sample& sample, const Vec& theta, const LinearSystem& system);

/// Run the iteration theta_{n+1} = theta_n + alpha_n (b - A theta_n + M_{n+1})
/// for n_max steps (the MdpSampling path performs the genuine TD(0) update).
/// Any coordinate passing 1e12 in magnitude aborts with NumericalError.
/// Identical inputs give bit-identical records.
TrajectoryRecord run_trajectory(const Problem& problem, const StepsizeTable& table,
                                std::uint64_t seed, const RecordOptions& options);

TrajectoryRecord run_trajectory(const Problem& problem, const StepsizeSchedule& schedule,
                                std::size_t n_max, std::uint64_t seed,
                                const RecordOptions& options);

/// Piecewise-linear interpolant through the recorded iterates at continuous
/// time tau. Requires tau inside the recorded time range and, when tau is
/// strictly between checkpoints, that the bracketing checkpoints are
/// adjacent steps.
Vec interpolate(const TrajectoryRecord& record, double tau);

/// Mean-flow solution theta(t) = ref + exp(-A (t - s)) (u0 - ref) for any
/// anchor with A ref = b (checked). Requires t >= s.
Vec ode_solution(const LinearSystem& system, double t, double s, const Vec& u0,
                 const Vec& theta_ref);

/// Split of the interpolated error at t_{l2} into mean flow from t_{l1},
/// piecewise-linear discretization drift, and accumulated noise:
///   theta_{l2} - ref = ode_term + discretization + martingale + residual
/// with residual the numerical-quadrature remainder (reported, not hidden).
struct ErrorDecomposition {
    Vec ode_term;
    Vec discretization;
    Vec martingale;
    Vec lhs;
    Vec residual;
};

/// Requires a full record with noise vectors and l1 <= l2 <= n_max.
/// Integrals use fixed-order Gauss-Legendre quadrature per step interval;
/// the flow factor is advanced by the semigroup property and recomputed
/// from scratch every 64 intervals to stop drift.
ErrorDecomposition decompose_error(const TrajectoryRecord& record,
                                   const LinearSystem& system,
                                   std::size_t l1, std::size_t l2);

} // namespace td0
