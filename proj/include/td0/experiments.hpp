#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "td0/bounds.hpp"
#include "td0/engine.hpp"

namespace td0 {

/// Deterministic pairwise summation: the range splits at its midpoint, so
/// summing [0, 2T) equals summing [0, T) plus [T, 2T) bit for bit. This is
/// what makes trial splitting and worker counts invisible in the output.
double pairwise_sum(const double* xs, std::size_t n);

/// Mean and standard error with the first value as shift. Differences from
/// the shift are what get summed, so constant data yields std_err exactly 0
/// and mean exactly the common value.
struct Aggregate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t count = 0;
};
Aggregate aggregate_values(const std::vector<double>& xs);

/// Runs body(0..trials-1) across `workers` threads (0 = hardware count).
/// Work is handed out by an atomic counter; each body call owns its slot,
/// so results never depend on scheduling.
void parallel_for_trials(std::size_t trials, std::size_t workers,
                         const std::function<void(std::size_t)>& body);

/// Per-trial squared error at each checkpoint, in trial order. Diverged
/// trials are dropped from `values` and listed in `diverged` as
/// (trial index, divergence step).
struct TrialMatrix {
    std::vector<std::size_t> checkpoints;
    std::vector<std::vector<double>> values; // one row per completed trial
    std::vector<std::size_t> trial_index;    // original index of each row
    std::vector<std::pair<std::size_t, std::size_t>> diverged;
};
TrialMatrix run_trials(const Problem& problem, const StepsizeSchedule& schedule,
                       const std::vector<std::size_t>& checkpoints,
                       std::size_t trials, std::uint64_t seed, std::size_t workers,
                       std::size_t first_trial = 0);

/// Empirical squared-error curve plus the two theoretical envelopes.
/// The linear bound fields may be +inf when the constants overflow double;
/// the log fields always carry the exact exponent.
struct MseCurve {
    std::vector<std::size_t> checkpoints;
    std::vector<double> empirical_mean;
    std::vector<double> std_err;
    std::vector<double> bound_general;
    std::vector<double> bound_closed;
    std::vector<double> log_bound_general;
    std::vector<double> log_bound_closed;
    bool bounds_defined = false; // constants were derivable
    bool closed_defined = false; // additionally sigma < 1
    std::string bounds_note;     // reason when bounds are absent
    double sigma = 0.0;
    std::size_t trials = 0;
    std::size_t completed = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::size_t, std::size_t>> diverged;
};

/// Monte Carlo estimate of E||theta_n - theta*||^2 at the checkpoints,
/// with the analytic envelopes when the constants exist. Bit-identical
/// across worker counts. Fails if more than 0.1 percent of trials diverge.
MseCurve monte_carlo_mse(const Problem& problem, const StepsizeSchedule& schedule,
                         const std::vector<std::size_t>& checkpoints,
                         std::size_t trials, std::uint64_t seed,
                         std::size_t workers = 0,
                         const ConstantOptions& options = {});

/// Log-spaced checkpoint grid {1, ..., n_max} (roughly 4 per decade),
/// always containing 1 and n_max.
std::vector<std::size_t> default_checkpoints(std::size_t n_max);

/// Dominance verdict for one stepsize exponent.
struct SigmaVerdict {
    double sigma = 0.0;
    bool pass = false;
    double worst_margin_log = 0.0;  // min over checkpoints of log bound - log empirical
    std::size_t worst_checkpoint = 0;
    double crossover_index = 0.0;   // where the noise term overtakes the transient term
    MseCurve curve;
};

struct ExpectationReport {
    std::vector<SigmaVerdict> verdicts;
    bool all_pass = false;
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

/// For each sigma: checks empirical mean <= both bound forms at every
/// checkpoint (in log space, so overflowing constants stay comparable)
/// and reports the index where the K2/n^sigma term starts to dominate.
ExpectationReport verify_expectation(const Problem& problem,
                                     const std::vector<double>& sigma_list,
                                     std::size_t n_max, std::size_t trials,
                                     std::uint64_t seed, std::size_t workers = 0,
                                     const ConstantOptions& options = {});

/// Empirical frequencies of the two bad events against their probability
/// bounds. Windows: exit of the 2 R_wc(n0) ball anywhere in (n0, horizon]
/// (freq_G_exit) or in (n0, n0+n1] only (freq_mid_exit); an after-window
/// violation is an iterate outside the min(epsilon, 2 R_wc) ball at some
/// n in (n0+n1, horizon] with all of [n0, n-1] still inside the big ball.
struct EventReport {
    std::uint64_t n0 = 0;
    std::uint64_t n1 = 0;
    std::uint64_t horizon = 0;
    double epsilon = 0.0;
    std::size_t trials = 0;
    std::size_t completed = 0;
    std::uint64_t seed = 0;
    double r_wc = 0.0;
    double ball = 0.0; // 2 r_wc
    double freq_G_exit = 0.0;
    double freq_mid_exit = 0.0;
    double freq_after_violation = 0.0;
    std::size_t count_G_exit = 0;
    std::size_t count_mid_exit = 0;
    std::size_t count_after_violation = 0;
    double bound_mid = 1.0;
    double bound_after = 1.0;
    bool bounds_applicable = false;
    bool bound_mid_vacuous = true;   // clamped at 1: comparison says nothing
    bool bound_after_vacuous = true;
    double implied_nc = 0.0; // largest nc the (n0, n1) pair certifies
    std::vector<std::string> failed_prereqs;
    std::string bounds_note;
    std::vector<std::pair<std::size_t, std::size_t>> diverged;
};

/// Requires sigma = 1 (the setting the event machinery is proved in).
/// horizon = 0 selects the default 2 (n0 + n1). Frequencies are always
/// reported; bounds are marked inapplicable when prerequisites fail.
EventReport track_events(const Problem& problem, const StepsizeSchedule& schedule,
                         std::uint64_t n0, std::uint64_t n1, double epsilon,
                         std::size_t trials, std::uint64_t seed,
                         std::size_t workers = 0, std::uint64_t horizon = 0,
                         const ConstantOptions& options = {});

/// Least-squares slope of log empirical MSE against log n over the
/// checkpoints with n_lo <= n <= n_hi. Fits the squared-error scale.
struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
    std::size_t points = 0;
};
RateFit rate_fit(const MseCurve& curve, std::size_t n_lo, std::size_t n_hi);

/// The singular-A study: A = [[1,1],[0,0]], b = [2,0], reference [1,1],
/// rank-one Bernoulli noise on coordinate 2. theta(2) never moves in the
/// noiseless run; under noise the terminal theta(2) differs per seed.
Problem counterexample_problem(const Vec& theta0);

struct CounterexampleReport {
    Vec theta0;
    std::size_t n_max = 0;
    Vec noiseless_terminal;
    std::vector<std::uint64_t> seeds;
    std::vector<Vec> terminals;      // one per seed
    std::vector<double> theta2;      // second coordinate per seed
    double theta2_mean = 0.0;
    double theta2_std = 0.0;         // across-seed sample standard deviation
};
CounterexampleReport counterexample_study(const Vec& theta0, std::size_t n_max,
                                          const std::vector<std::uint64_t>& seeds,
                                          std::size_t workers = 0);

} // namespace td0
