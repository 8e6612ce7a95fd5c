#include "td0/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "td0/rng.hpp"

namespace td0 {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_log(double x) { return x > 0.0 ? std::log(x) : -kInf; }

} // namespace

double pairwise_sum(const double* xs, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xs[i];
        return s;
    }
    const std::size_t mid = n / 2;
    return pairwise_sum(xs, mid) + pairwise_sum(xs + mid, n - mid);
}

Aggregate aggregate_values(const std::vector<double>& xs) {
    Aggregate a;
    a.count = xs.size();
    if (xs.empty()) {
        a.mean = kNaN;
        a.std_err = kNaN;
        return a;
    }
    const double shift = xs.front();
    std::vector<double> dev(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) dev[i] = xs[i] - shift;
    const double mean_dev = pairwise_sum(dev.data(), dev.size()) / double(a.count);
    a.mean = shift + mean_dev;
    if (a.count < 2) {
        a.std_err = 0.0;
        return a;
    }
    std::vector<double> sq(xs.size());
    for (std::size_t i = 0; i < dev.size(); ++i) {
        const double r = dev[i] - mean_dev;
        sq[i] = r * r;
    }
    const double var = pairwise_sum(sq.data(), sq.size()) / double(a.count - 1);
    a.std_err = std::sqrt(var / double(a.count));
    return a;
}

void parallel_for_trials(std::size_t trials, std::size_t workers,
                         const std::function<void(std::size_t)>& body) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, trials);
    if (workers <= 1) {
        for (std::size_t i = 0; i < trials; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex fail_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= trials) return;
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(fail_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

TrialMatrix run_trials(const Problem& problem, const StepsizeSchedule& schedule,
                       const std::vector<std::size_t>& checkpoints,
                       std::size_t trials, std::uint64_t seed, std::size_t workers,
                       std::size_t first_trial) {
    if (checkpoints.empty())
        throw ContractError("run_trials: need at least one checkpoint");
    if (trials == 0) throw ContractError("run_trials: need at least one trial");
    const std::size_t n_max = checkpoints.back();
    const StepsizeTable table(schedule, n_max);
    const Vec ref = problem.system.reference_point();

    RecordOptions rec_opts;
    rec_opts.checkpoints = checkpoints;

    struct Slot {
        std::vector<double> errs;
        bool diverged = false;
        std::size_t step = 0;
    };
    std::vector<Slot> slots(trials);

    parallel_for_trials(trials, workers, [&](std::size_t i) {
        const std::uint64_t trial_seed =
            derive_stream_seed(seed, static_cast<std::uint64_t>(first_trial + i));
        try {
            const TrajectoryRecord rec =
                run_trajectory(problem, table, trial_seed, rec_opts);
            Slot& s = slots[i];
            s.errs.resize(checkpoints.size());
            for (std::size_t j = 0; j < checkpoints.size(); ++j) {
                const Vec diff = rec.thetas[j] - ref;
                s.errs[j] = dot(diff, diff);
            }
        } catch (const DivergenceError& e) {
            slots[i].diverged = true;
            slots[i].step = e.step;
        }
    });

    TrialMatrix out;
    out.checkpoints = checkpoints;
    for (std::size_t i = 0; i < trials; ++i) {
        if (slots[i].diverged) {
            out.diverged.emplace_back(first_trial + i, slots[i].step);
        } else {
            out.values.push_back(std::move(slots[i].errs));
            out.trial_index.push_back(first_trial + i);
        }
    }
    return out;
}

namespace {

void enforce_divergence_budget(std::size_t trials,
                               const std::vector<std::pair<std::size_t, std::size_t>>& diverged) {
    if (diverged.empty()) return;
    if (double(diverged.size()) <= 0.001 * double(trials)) return;
    std::string msg = std::to_string(diverged.size()) + " of " +
                      std::to_string(trials) +
                      " trials diverged (budget is 0.1 percent); first at trial " +
                      std::to_string(diverged.front().first) + ", step " +
                      std::to_string(diverged.front().second);
    throw NumericalError(msg);
}

} // namespace

MseCurve monte_carlo_mse(const Problem& problem, const StepsizeSchedule& schedule,
                         const std::vector<std::size_t>& checkpoints,
                         std::size_t trials, std::uint64_t seed,
                         std::size_t workers, const ConstantOptions& options) {
    if (trials < 2) throw ContractError("monte_carlo_mse: need at least two trials");
    TrialMatrix m = run_trials(problem, schedule, checkpoints, trials, seed, workers);
    enforce_divergence_budget(trials, m.diverged);

    MseCurve curve;
    curve.checkpoints = checkpoints;
    curve.sigma = schedule.sigma;
    curve.trials = trials;
    curve.completed = m.values.size();
    curve.seed = seed;
    curve.diverged = m.diverged;

    const std::size_t ncp = checkpoints.size();
    curve.empirical_mean.resize(ncp);
    curve.std_err.resize(ncp);
    std::vector<double> column(m.values.size());
    for (std::size_t j = 0; j < ncp; ++j) {
        for (std::size_t i = 0; i < m.values.size(); ++i) column[i] = m.values[i][j];
        const Aggregate a = aggregate_values(column);
        curve.empirical_mean[j] = a.mean;
        curve.std_err[j] = a.std_err;
    }

    curve.bound_general.assign(ncp, kNaN);
    curve.bound_closed.assign(ncp, kNaN);
    curve.log_bound_general.assign(ncp, kNaN);
    curve.log_bound_closed.assign(ncp, kNaN);
    try {
        const BoundConstants c = derive_constants(
            problem.system, schedule, problem.theta0, options,
            problem.mdp ? &*problem.mdp : nullptr, problem.nu ? &*problem.nu : nullptr);
        curve.bounds_defined = true;
        curve.closed_defined = c.closed_form;
        ExpectationBoundSeries series(c, schedule);
        for (std::size_t j = 0; j < ncp; ++j) {
            while (series.steps() < checkpoints[j]) series.advance();
            curve.log_bound_general[j] = series.log_bound();
            curve.bound_general[j] = std::exp(curve.log_bound_general[j]);
            if (c.closed_form && checkpoints[j] >= 1) {
                curve.log_bound_closed[j] = log_expectation_bound_closed(c, checkpoints[j]);
                curve.bound_closed[j] = std::exp(curve.log_bound_closed[j]);
            }
        }
    } catch (const std::exception& e) {
        curve.bounds_note = e.what();
    }
    return curve;
}

std::vector<std::size_t> default_checkpoints(std::size_t n_max) {
    if (n_max == 0) throw DomainError("default_checkpoints: n_max must be positive");
    std::vector<std::size_t> cps;
    double x = 1.0;
    while (true) {
        const auto n = static_cast<std::size_t>(std::llround(x));
        if (n > n_max) break;
        if (cps.empty() || n > cps.back()) cps.push_back(n);
        x *= 1.77827941003892280; // 10^(1/4)
    }
    if (cps.empty() || cps.back() != n_max) cps.push_back(n_max);
    return cps;
}

namespace {

// First index at which K2 n^-sigma reaches K1 exp(-(lambda/2) n^(1-sigma)).
// Doubling to bracket, then bisection; capped at 2^62.
double closed_form_crossover(const BoundConstants& c) {
    const auto gap = [&](double n) {
        return (c.log_k2 - c.sigma * std::log(n)) -
               (c.log_k1 - 0.5 * c.lambda_exp * std::pow(n, 1.0 - c.sigma));
    };
    if (gap(1.0) >= 0.0) return 1.0;
    double lo = 1.0, hi = 2.0;
    const double cap = 4.6e18;
    while (gap(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > cap) return cap;
    }
    while (hi - lo > 1.0) {
        const double mid = std::floor(lo + (hi - lo) / 2.0);
        (gap(mid) >= 0.0 ? hi : lo) = mid;
    }
    return hi;
}

} // namespace

ExpectationReport verify_expectation(const Problem& problem,
                                     const std::vector<double>& sigma_list,
                                     std::size_t n_max, std::size_t trials,
                                     std::uint64_t seed, std::size_t workers,
                                     const ConstantOptions& options) {
    if (sigma_list.empty())
        throw ContractError("verify_expectation: empty sigma list");
    for (double s : sigma_list)
        if (!(s > 0.0) || s >= 1.0)
            throw DomainError("verify_expectation: every sigma must lie in (0, 1)");

    ExpectationReport report;
    report.trials = trials;
    report.seed = seed;
    report.all_pass = true;
    const std::vector<std::size_t> cps = default_checkpoints(n_max);

    for (double sigma : sigma_list) {
        const StepsizeSchedule schedule(sigma);
        SigmaVerdict v;
        v.sigma = sigma;
        v.curve = monte_carlo_mse(problem, schedule, cps, trials, seed, workers, options);
        v.worst_margin_log = kInf;
        if (!v.curve.bounds_defined) {
            v.pass = false;
            report.all_pass = false;
            report.verdicts.push_back(std::move(v));
            continue;
        }
        v.pass = true;
        for (std::size_t j = 0; j < cps.size(); ++j) {
            const double log_emp = safe_log(v.curve.empirical_mean[j]);
            double log_bound = v.curve.log_bound_general[j];
            if (cps[j] >= 1 && v.curve.closed_defined)
                log_bound = std::min(log_bound, v.curve.log_bound_closed[j]);
            const double margin = log_bound - log_emp;
            if (margin < v.worst_margin_log) {
                v.worst_margin_log = margin;
                v.worst_checkpoint = cps[j];
            }
            if (margin < 0.0) v.pass = false;
        }
        const BoundConstants c = derive_constants(
            problem.system, schedule, problem.theta0, options,
            problem.mdp ? &*problem.mdp : nullptr, problem.nu ? &*problem.nu : nullptr);
        v.crossover_index = closed_form_crossover(c);
        if (!v.pass) report.all_pass = false;
        report.verdicts.push_back(std::move(v));
    }
    return report;
}

EventReport track_events(const Problem& problem, const StepsizeSchedule& schedule,
                         std::uint64_t n0, std::uint64_t n1, double epsilon,
                         std::size_t trials, std::uint64_t seed,
                         std::size_t workers, std::uint64_t horizon,
                         const ConstantOptions& options) {
    if (schedule.sigma != 1.0)
        throw DomainError("track_events: the event machinery assumes sigma = 1");
    if (n0 < 1 || n1 < 1)
        throw DomainError("track_events: need n0 >= 1 and n1 >= 1");
    if (!(epsilon > 0.0)) throw DomainError("track_events: epsilon must be positive");
    if (trials == 0) throw ContractError("track_events: need at least one trial");
    if (horizon == 0) horizon = 2 * (n0 + n1);
    if (horizon <= n0 + n1)
        throw DomainError("track_events: horizon must exceed n0 + n1");

    EventReport rep;
    rep.n0 = n0;
    rep.n1 = n1;
    rep.horizon = horizon;
    rep.epsilon = epsilon;
    rep.trials = trials;
    rep.seed = seed;

    const Vec ref = problem.system.reference_point();
    const Vec err0 = problem.theta0 - ref;
    const double c_star = 1.0 + norm2(ref);
    const double r0 = 1.0 + norm2(err0);
    rep.r_wc = double(n0 + 1) * c_star * r0;
    rep.ball = 2.0 * rep.r_wc;
    const double small_ball = std::min(epsilon, rep.ball);

    const auto n_max = static_cast<std::size_t>(horizon);
    const StepsizeTable table(schedule, n_max);
    RecordOptions rec_opts;
    rec_opts.error_norms = true;

    struct Flags {
        bool any_exit = false, mid_exit = false, after_viol = false;
        bool diverged = false;
        std::size_t step = 0;
    };
    std::vector<Flags> flags(trials);

    parallel_for_trials(trials, workers, [&](std::size_t i) {
        const std::uint64_t trial_seed = derive_stream_seed(seed, i);
        Flags& f = flags[i];
        try {
            const TrajectoryRecord rec =
                run_trajectory(problem, table, trial_seed, rec_opts);
            const std::vector<double>& e = rec.error_norms;
            for (std::size_t n = n0 + 1; n <= horizon; ++n)
                if (e[n] > rep.ball) {
                    f.any_exit = true;
                    break;
                }
            for (std::size_t n = n0 + 1; n <= n0 + n1; ++n)
                if (e[n] > rep.ball) {
                    f.mid_exit = true;
                    break;
                }
            bool good = true; // all of [n0, n] inside the 2 R_wc ball so far
            for (std::size_t n = n0; n <= n0 + n1; ++n) good = good && e[n] <= rep.ball;
            for (std::size_t n = n0 + n1 + 1; n <= horizon && good; ++n) {
                if (e[n] > small_ball) {
                    f.after_viol = true;
                    break;
                }
                good = e[n] <= rep.ball;
            }
        } catch (const DivergenceError& d) {
            f.diverged = true;
            f.step = d.step;
        }
    });

    for (std::size_t i = 0; i < trials; ++i) {
        if (flags[i].diverged) {
            rep.diverged.emplace_back(i, flags[i].step);
            continue;
        }
        rep.count_G_exit += flags[i].any_exit;
        rep.count_mid_exit += flags[i].mid_exit;
        rep.count_after_violation += flags[i].after_viol;
    }
    enforce_divergence_budget(trials, rep.diverged);
    rep.completed = trials - rep.diverged.size();
    if (rep.completed > 0) {
        rep.freq_G_exit = double(rep.count_G_exit) / double(rep.completed);
        rep.freq_mid_exit = double(rep.count_mid_exit) / double(rep.completed);
        rep.freq_after_violation =
            double(rep.count_after_violation) / double(rep.completed);
    }

    try {
        const BoundConstants c = derive_constants(
            problem.system, schedule, problem.theta0, options,
            problem.mdp ? &*problem.mdp : nullptr, problem.nu ? &*problem.nu : nullptr);
        const double growth =
            std::pow(6.0 * c.k_lambda * rep.r_wc / epsilon, 1.0 / c.lambda_hp);
        const double implied = std::floor(double(n0 + n1) / growth - 1.0);
        rep.implied_nc = implied;
        const std::uint64_t nc =
            implied >= 1.0 ? static_cast<std::uint64_t>(implied) : 0;
        const EventBounds eb = event_probability_bounds(c, n0, nc, epsilon);
        rep.bound_mid = eb.p_mid;
        rep.bound_after = eb.p_after;
        rep.bounds_applicable = eb.applicable;
        rep.failed_prereqs = eb.failed;
        rep.bound_mid_vacuous = !(eb.p_mid < 1.0);
        rep.bound_after_vacuous = !(eb.p_after < 1.0);
    } catch (const std::exception& e) {
        rep.bounds_note = e.what();
        rep.failed_prereqs.push_back(std::string("constants unavailable: ") + e.what());
    }
    return rep;
}

RateFit rate_fit(const MseCurve& curve, std::size_t n_lo, std::size_t n_hi) {
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < curve.checkpoints.size(); ++j) {
        const std::size_t n = curve.checkpoints[j];
        if (n < n_lo || n > n_hi) continue;
        if (!(curve.empirical_mean[j] > 0.0)) continue;
        lx.push_back(std::log(double(n)));
        ly.push_back(std::log(curve.empirical_mean[j]));
    }
    if (lx.size() < 3)
        throw DomainError("rate_fit: need at least three positive checkpoints in the window");
    RateFit fit;
    fit.points = lx.size();
    const double mx = pairwise_sum(lx.data(), lx.size()) / double(lx.size());
    const double my = pairwise_sum(ly.data(), ly.size()) / double(ly.size());
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw DomainError("rate_fit: window has no spread in log n");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / double(fit.points));
    return fit;
}

Problem counterexample_problem(const Vec& theta0) {
    if (theta0.size() != 2)
        throw DimensionError("counterexample_problem: theta0 must have dimension 2");
    const Matrix a(2, 2, {1.0, 1.0, 0.0, 0.0});
    const Vec b = {2.0, 0.0};
    const Vec ref = {1.0, 1.0};
    Problem p;
    p.system = make_raw_system(a, b, ref);
    p.noise = NoiseModel::bernoulli_rank_one({1.0, 1.0}, 1, ref);
    p.theta0 = theta0;
    return p;
}

CounterexampleReport counterexample_study(const Vec& theta0, std::size_t n_max,
                                          const std::vector<std::uint64_t>& seeds,
                                          std::size_t workers) {
    if (seeds.empty()) throw ContractError("counterexample_study: empty seed list");
    if (n_max < 1) throw DomainError("counterexample_study: n_max must be positive");

    CounterexampleReport rep;
    rep.theta0 = theta0;
    rep.n_max = n_max;
    rep.seeds = seeds;

    const StepsizeTable table(StepsizeSchedule(1.0), n_max);
    RecordOptions rec_opts;
    rec_opts.checkpoints = {n_max};

    Problem noiseless = counterexample_problem(theta0);
    noiseless.noise = NoiseModel::none();
    rep.noiseless_terminal =
        run_trajectory(noiseless, table, 0, rec_opts).thetas.front();

    const Problem noisy = counterexample_problem(theta0);
    rep.terminals.resize(seeds.size());
    parallel_for_trials(seeds.size(), workers, [&](std::size_t i) {
        rep.terminals[i] = run_trajectory(noisy, table, seeds[i], rec_opts).thetas.front();
    });
    rep.theta2.resize(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) rep.theta2[i] = rep.terminals[i][1];

    const Aggregate a = aggregate_values(rep.theta2);
    rep.theta2_mean = a.mean;
    rep.theta2_std = a.std_err * std::sqrt(double(a.count));
    return rep;
}

} // namespace td0
