#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "td0/mdp.hpp"
#include "td0/schedule.hpp"

namespace td0 {

/// Tunables for derive_constants.
struct ConstantOptions {
    double lambda_exp_fraction = 0.9; // lambda = fraction * lambda_min(A + A^T)
    double lambda_hp_fraction = 0.9;  // lambda = fraction * min Re(eig(A))
    /// Replace the default noise constant 2*K_m^2 with the tighter value
    /// obtained by enumerating the transition support (MDP problems only).
    bool tight_noise_constant = false;
};

/// Every constant the finite-sample bounds need, derived once per
/// (system, schedule, theta0). Constants that overflow double keep an exact
/// log companion; the linear field is then +inf, honestly.
struct BoundConstants {
    std::size_t dim = 0;
    double sigma = 1.0;
    double gamma = 0.0;

    // Spectral data of the driving matrix.
    double sym_min_eig = 0.0;   // lambda_min(A + A^T)
    double min_real_part = 0.0; // min Re over eig(A)
    double a_norm = 0.0;
    double a_inv_norm = 0.0;
    double b_norm = 0.0;

    double lambda_exp = 0.0; // decay rate used by the expectation bounds
    double lambda_hp = 0.0;  // decay rate used by the high-probability bounds
    bool lambda_hp_perturbed = false; // nudged off the removable point 1/2

    double k_m = 0.0; // per-step noise magnitude coefficient
    double k_s = 0.0; // conditional second-moment coefficient
    bool k_s_tightened = false;

    double mu = 0.0;         // -lambda_min(A+A^T) + lambda_max(A^T A + K_s I)
    double ata_ks_max = 0.0; // lambda_max(A^T A + K_s I)
    std::uint64_t m = 0;     // first index with alpha small enough to contract
    double log_k_p = 0.0;
    double k_p = 1.0;

    // Closed-form rate constants; defined only for sigma < 1.
    bool closed_form = false;
    std::uint64_t i0 = 0;
    double k_b = 0.0;
    double log_k1 = 0.0, k1 = 0.0;
    double log_k2 = 0.0, k2 = 0.0;
    double e0 = 0.0; // ||theta0 - theta*||^2

    double c_star = 0.0; // 1 + ||theta*||
    double r0 = 0.0;     // 1 + ||theta0 - theta*||
    double k_lambda = 0.0;
    double c_m2 = 0.0;

    // Matrices defining the per-step contraction factor.
    Matrix sym_a;  // A + A^T
    Matrix ata_ks; // A^T A + K_s I

    /// Worst-case iterate radius (n0+1) * c_star * r0.
    double r_wc(std::uint64_t n0) const {
        return static_cast<double>(n0 + 1) * c_star * r0;
    }
};

/// Smallest grid-certified K with ||exp(-A t)|| <= K exp(-lambda t),
/// inflated 5 percent. Scans t in [0, 50/lambda] on `points` samples and
/// rejects parameters whose envelope is still rising at the grid end.
double estimate_k_lambda(const Matrix& a, double lambda, std::size_t points = 10000);

/// Full constant chain. Requirements: system positive definite
/// (lambda_min(A+A^T) > 0, which also makes every Re(eig) positive),
/// a known discount for K_m, and a fixed point. The enumeration-based
/// noise constant needs spec/nu when requested.
BoundConstants derive_constants(const LinearSystem& system,
                                const StepsizeSchedule& schedule, const Vec& theta0,
                                const ConstantOptions& options = {},
                                const MdpSpec* spec = nullptr,
                                const StationaryDistribution* nu = nullptr);

/// Per-step mean-square contraction matrix
/// Lambda(alpha) = I - alpha (A + A^T) + alpha^2 (A^T A + K_s I).
Matrix contraction_matrix(const BoundConstants& c, double alpha);

/// Largest eigenvalue of Lambda(alpha_n).
double contraction_factor(const BoundConstants& c, double alpha);

/// Eigenvalue-sum upper bound 1 - alpha lambda_min(A+A^T) + alpha^2 ata_ks_max;
/// always at or above contraction_factor at the same alpha.
double contraction_factor_upper(const BoundConstants& c, double alpha);

/// ln of the envelope K_p exp(-lambda sum_{i=k}^{n} alpha_i) that dominates
/// prod_{i=k}^{n} max_eig Lambda(alpha_i). Requires k <= n < table size.
double log_product_bound(const BoundConstants& c, const StepsizeTable& table,
                         std::size_t k, std::size_t n);
double product_bound(const BoundConstants& c, const StepsizeTable& table,
                     std::size_t k, std::size_t n);

/// Largest log gap (product minus envelope) over all 0 <= k <= n <= n_max.
/// Nonpositive gap means the envelope dominates everywhere.
struct ProductDominance {
    double max_gap_log = 0.0;
    std::size_t argmax_k = 0;
    std::size_t argmax_n = 0;
};
ProductDominance check_product_dominance(const BoundConstants& c,
                                         const StepsizeTable& table,
                                         std::size_t n_max);

/// Stream evaluator of the finite-horizon mean-square bound. advance()
/// consumes one stepsize; after j calls, log_bound() is ln of the bound on
/// E||theta_j - theta*||^2. O(1) per step, exact up to rounding.
class ExpectationBoundSeries {
  public:
    ExpectationBoundSeries(const BoundConstants& c, const StepsizeSchedule& schedule);
    void advance();
    std::size_t steps() const { return step_; }
    double log_bound() const;
    double bound() const;

  private:
    const BoundConstants& c_;
    StepsizeSchedule schedule_;
    std::size_t step_ = 0;
    double time_sum_ = 0.0; // sum of consumed alphas
    double q_ = 0.0;        // sum_i exp(-lambda (T_j - T_{i+1})) alpha_i^2
};

/// Finite-horizon mean-square bound in the summation convention of the
/// recursion proof: index n means the bound on E||theta_{n+1} - theta*||^2
/// after consuming alpha_0..alpha_n. O(n).
double expectation_bound_general(const BoundConstants& c,
                                 const StepsizeSchedule& schedule, std::size_t n);
double log_expectation_bound_general(const BoundConstants& c,
                                     const StepsizeSchedule& schedule, std::size_t n);

/// Closed-form mean-square bound K1 exp(-(lambda/2) n^(1-sigma)) + K2 / n^sigma
/// on E||theta_n - theta*||^2, n >= 1. Only for sigma strictly below 1;
/// sigma = 1 raises DomainError pointing at the high-probability bounds.
double expectation_bound_closed(const BoundConstants& c, std::size_t n);
double log_expectation_bound_closed(const BoundConstants& c, std::size_t n);

/// Tail probability that the accumulated noise term over [n', n+1] exceeds
/// `radius` while the trajectory was still well-behaved; branch chosen by
/// lambda_hp vs 1/2. Clamped to [0, 1]. Requires 1 <= n0 <= n' <= n.
double concentration_tail(const BoundConstants& c, std::uint64_t n0,
                          std::uint64_t n_prime, std::uint64_t n, double radius);

/// Probability bounds for the two bad events behind the high-probability
/// rate, with explicit prerequisite checking. Bounds are evaluated even
/// when prerequisites fail, but `applicable` is then false and `failed`
/// lists each violated condition.
struct EventBounds {
    double p_mid = 1.0;
    double p_after = 1.0;
    double log_p_mid = 0.0;  // pre-clamp
    double log_p_after = 0.0;
    bool applicable = false;
    std::vector<std::string> failed;
    double r_wc = 0.0;
    double n0_threshold = 0.0;        // required lower bound on n0
    double nc_threshold_outer = 0.0;  // R_wc-multiplied form (used downstream)
    double nc_threshold_inner = 0.0;  // initial-radius form (checked here)
    bool nc_forms_disagree = false;
};
EventBounds event_probability_bounds(const BoundConstants& c, std::uint64_t n0,
                                     std::uint64_t nc, double epsilon);

/// Iteration counts sufficient for ||theta_n - theta*|| <= epsilon with
/// probability 1 - delta, per the two-branch recipe. Values are integral
/// but kept as doubles: n1 routinely exceeds 2^53 and is then flagged
/// astronomically large, with log10 companions carrying the magnitude.
struct SampleComplexity {
    double epsilon = 0.0;
    double delta = 0.0;
    bool lambda_above_half = false;
    double n0 = 0.0;
    double nc = 0.0;
    double n1 = 0.0;
    double n_total = 0.0; // n0 + n1
    double log10_n1 = 0.0;
    double log10_n_total = 0.0;
    bool astronomically_large = false; // n_total beyond exact double integers
};
SampleComplexity sample_complexity(const BoundConstants& c, double epsilon,
                                   double delta);

} // namespace td0
