// tdzero: analyze TD(0) systems, run Monte Carlo verifications of the
// finite-sample bounds, and reproduce the singular-system study.
//
// Exit codes: 0 success / all checks pass, 1 assertion or run failure,
// 2 configuration problem.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "td0/experiments.hpp"
#include "td0/io.hpp"
#include "td0/rng.hpp"

namespace {

using namespace td0;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> n_max;
    std::optional<double> sigma;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::optional<std::uint64_t> n0;
    std::optional<std::uint64_t> n1;
    std::optional<std::uint64_t> horizon;
    std::optional<std::string> out_json;
    std::optional<std::string> out_csv;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--seed", ov.seed, "Base seed (wins over config)");
    cmd->add_option("--trials", ov.trials, "Trial count (wins over config)");
    cmd->add_option("--n-max", ov.n_max, "Horizon (wins over config)");
    cmd->add_option("--sigma", ov.sigma, "Stepsize exponent (wins over config)");
    cmd->add_option("--epsilon", ov.epsilon, "Accuracy target (wins over config)");
    cmd->add_option("--delta", ov.delta, "Failure probability (wins over config)");
    cmd->add_option("--n0", ov.n0, "Event window start (wins over config)");
    cmd->add_option("--n1", ov.n1, "Event window length (wins over config)");
    cmd->add_option("--horizon", ov.horizon, "Event tracking horizon (wins over config)");
    cmd->add_option("--output-json", ov.out_json, "JSON output path (wins over config)");
    cmd->add_option("--output-csv", ov.out_csv, "CSV output path (wins over config)");
}

RunConfig load_config(const std::string& path, const Overrides& ov) {
    RunConfig cfg = parse_config(path);
    if (ov.seed) cfg.run.seed = *ov.seed;
    if (ov.trials) {
        if (*ov.trials < 2) throw ConfigError({"--trials: must be at least 2"});
        cfg.run.trials = *ov.trials;
    }
    if (ov.n_max) {
        if (*ov.n_max < 1) throw ConfigError({"--n-max: must be at least 1"});
        cfg.run.n_max = *ov.n_max;
    }
    if (ov.sigma) cfg.schedule = StepsizeSchedule(*ov.sigma);
    if (ov.epsilon) {
        if (!(*ov.epsilon > 0.0)) throw ConfigError({"--epsilon: must be positive"});
        cfg.run.epsilon = *ov.epsilon;
    }
    if (ov.delta) {
        if (!(*ov.delta > 0.0) || !(*ov.delta < 1.0))
            throw ConfigError({"--delta: must lie in (0, 1)"});
        cfg.run.delta = *ov.delta;
    }
    if (ov.n0) {
        if (*ov.n0 < 1) throw ConfigError({"--n0: must be at least 1"});
        cfg.run.n0 = *ov.n0;
    }
    if (ov.n1) {
        if (*ov.n1 < 1) throw ConfigError({"--n1: must be at least 1"});
        cfg.run.n1 = *ov.n1;
    }
    if (ov.horizon) cfg.run.horizon = *ov.horizon;
    if (ov.out_json) cfg.output.json = *ov.out_json;
    if (ov.out_csv) cfg.output.csv = *ov.out_csv;
    return cfg;
}

void emit_json(const JsonValue& doc, const std::string& path) {
    const std::string text = dump_json(doc);
    if (path.empty())
        std::cout << text;
    else
        write_text_file(path, text);
}

double implied_nc(const BoundConstants& c, double r_wc, std::uint64_t n0,
                  std::uint64_t n1, double epsilon) {
    const double growth =
        std::pow(6.0 * c.k_lambda * r_wc / epsilon, 1.0 / c.lambda_hp);
    return std::floor(double(n0 + n1) / growth - 1.0);
}

int cmd_analyze(const RunConfig& cfg) {
    JsonValue::Object doc;
    doc["system"] = build_json(cfg.problem.system);
    doc["schedule"] = JsonValue::Object{{"sigma", JsonValue(cfg.schedule.sigma)}};
    doc["theta0"] = json_array(cfg.problem.theta0);

    JsonValue::Array eigs;
    for (const auto& z : eigenvalues_general(cfg.problem.system.a)) {
        JsonValue::Object e;
        e["re"] = z.real();
        e["im"] = z.imag();
        eigs.emplace_back(std::move(e));
    }
    doc["eigenvalues"] = std::move(eigs);

    if (cfg.problem.mdp) {
        doc["stationary"] = json_array(cfg.problem.nu->nu);
        JsonValue::Array viol;
        for (const auto& bv : check_boundedness(*cfg.problem.mdp)) {
            JsonValue::Object o;
            o["kind"] = bv.kind;
            o["state"] = bv.state;
            o["next_state"] = bv.next_state;
            o["value"] = bv.value;
            viol.emplace_back(std::move(o));
        }
        doc["boundedness_violations"] = std::move(viol);
    }

    try {
        const BoundConstants c = derive_constants(
            cfg.problem.system, cfg.schedule, cfg.problem.theta0, cfg.constants,
            cfg.problem.mdp ? &*cfg.problem.mdp : nullptr,
            cfg.problem.nu ? &*cfg.problem.nu : nullptr);
        doc["constants"] = build_json(c);

        const double nc = implied_nc(c, c.r_wc(cfg.run.n0), cfg.run.n0, cfg.run.n1,
                                     cfg.run.epsilon);
        JsonValue::Object ev;
        ev["implied_nc"] = nc;
        const EventBounds eb = event_probability_bounds(
            c, cfg.run.n0, nc >= 1.0 ? std::uint64_t(nc) : 0, cfg.run.epsilon);
        ev["n0"] = cfg.run.n0;
        ev["n1"] = cfg.run.n1;
        ev["epsilon"] = cfg.run.epsilon;
        ev["applicable"] = eb.applicable;
        ev["n0_threshold"] = eb.n0_threshold;
        ev["nc_threshold_outer"] = eb.nc_threshold_outer;
        ev["nc_threshold_inner"] = eb.nc_threshold_inner;
        ev["nc_forms_disagree"] = eb.nc_forms_disagree;
        ev["p_mid"] = eb.p_mid;
        ev["p_after"] = eb.p_after;
        ev["r_wc"] = eb.r_wc;
        JsonValue::Array failed;
        for (const auto& f : eb.failed) failed.emplace_back(f);
        ev["failed_prerequisites"] = std::move(failed);
        doc["event_prerequisites"] = std::move(ev);

        doc["sample_complexity"] =
            build_json(sample_complexity(c, cfg.run.epsilon, cfg.run.delta));
    } catch (const std::exception& e) {
        doc["constants_note"] = std::string(e.what());
    }

    emit_json(JsonValue(std::move(doc)), cfg.output.json);
    return 0;
}

int cmd_simulate(const RunConfig& cfg, bool ode_restarts) {
    RecordOptions opts;
    if (cfg.run.checkpoints.empty()) {
        opts.full = true;
    } else {
        opts.checkpoints = cfg.run.checkpoints;
        if (opts.checkpoints.back() > cfg.run.n_max)
            throw ConfigError({"run.checkpoints: last checkpoint exceeds n_max"});
    }
    opts.noise_norms = true;
    const std::size_t n_max =
        cfg.run.checkpoints.empty() ? cfg.run.n_max : cfg.run.checkpoints.back();
    const TrajectoryRecord rec =
        run_trajectory(cfg.problem, cfg.schedule, n_max, cfg.run.seed, opts);

    if (!cfg.output.csv.empty())
        write_trajectory_csv(cfg.output.csv, rec, cfg.problem.system, ode_restarts);

    const Vec ref = cfg.problem.system.reference_point();
    JsonValue::Object doc;
    doc["seed"] = rec.seed;
    doc["sigma"] = rec.sigma;
    doc["n_max"] = rec.n_max;
    doc["terminal_theta"] = json_array(rec.thetas.back());
    doc["terminal_error_norm"] = norm2(rec.thetas.back() - ref);
    doc["terminal_time"] = rec.times.back();
    emit_json(JsonValue(std::move(doc)), cfg.output.json);
    return 0;
}

int cmd_verify_expectation(const RunConfig& cfg, std::size_t workers, bool sweep) {
    const ExpectationReport report =
        verify_expectation(cfg.problem, cfg.run.sigma_list, cfg.run.n_max,
                           cfg.run.trials, cfg.run.seed, workers, cfg.constants);
    if (!cfg.output.csv.empty()) write_sweep_csv(cfg.output.csv, report);
    emit_json(build_json(report), cfg.output.json);
    if (!report.all_pass) {
        std::cerr << (sweep ? "sweep-sigma" : "verify-expectation")
                  << ": dominance violated for at least one sigma\n";
        return 1;
    }
    return 0;
}

int cmd_verify_concentration(const RunConfig& cfg, std::size_t workers) {
    const EventReport rep =
        track_events(cfg.problem, StepsizeSchedule(1.0), cfg.run.n0, cfg.run.n1,
                     cfg.run.epsilon, cfg.run.trials, cfg.run.seed, workers,
                     cfg.run.horizon, cfg.constants);
    emit_json(build_json(rep), cfg.output.json);
    bool violated = false;
    if (rep.bounds_applicable) {
        if (!rep.bound_mid_vacuous && rep.freq_mid_exit > rep.bound_mid) violated = true;
        if (!rep.bound_after_vacuous && rep.freq_after_violation > rep.bound_after)
            violated = true;
    }
    if (violated) {
        std::cerr << "verify-concentration: empirical frequency above its bound\n";
        return 1;
    }
    return 0;
}

int cmd_sample_complexity(const RunConfig& cfg) {
    // The sample-complexity recipe lives in the sigma = 1 regime; constants
    // are derived there no matter what schedule the config carries.
    const BoundConstants c = derive_constants(
        cfg.problem.system, StepsizeSchedule(1.0), cfg.problem.theta0, cfg.constants,
        cfg.problem.mdp ? &*cfg.problem.mdp : nullptr,
        cfg.problem.nu ? &*cfg.problem.nu : nullptr);
    const SampleComplexity sc = sample_complexity(c, cfg.run.epsilon, cfg.run.delta);
    JsonValue::Object doc;
    doc["sample_complexity"] = build_json(sc);
    doc["constants"] = build_json(c);
    emit_json(JsonValue(std::move(doc)), cfg.output.json);
    return 0;
}

int cmd_counterexample(const Vec& theta0, std::size_t n_max, std::size_t num_seeds,
                       std::uint64_t base_seed, std::size_t workers,
                       const std::string& out_json, const std::string& out_csv) {
    std::vector<std::uint64_t> seeds(num_seeds);
    for (std::size_t i = 0; i < num_seeds; ++i) seeds[i] = derive_stream_seed(base_seed, i);
    const CounterexampleReport rep = counterexample_study(theta0, n_max, seeds, workers);
    if (!out_csv.empty()) write_counterexample_csv(out_csv, rep);
    emit_json(build_json(rep), out_json);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TD(0) finite-sample bound toolkit"};
    app.require_subcommand(1);

    std::size_t workers = 0;
    app.add_option("--workers", workers,
                   "Worker threads (0 = hardware); output bytes never depend on it")
        ->envname("TD0_WORKERS");

    std::string config_path;
    Overrides ov;
    bool ode_restarts = false;

    auto* analyze = app.add_subcommand("analyze", "Derive and report every constant");
    auto* simulate = app.add_subcommand("simulate", "Run and export one trajectory");
    auto* verify_exp = app.add_subcommand(
        "verify-expectation", "Monte Carlo check of the mean-square bounds");
    auto* verify_conc = app.add_subcommand(
        "verify-concentration", "Monte Carlo check of the event probability bounds");
    auto* sample = app.add_subcommand(
        "sample-complexity", "Evaluate the iteration-count recipe");
    auto* sweep = app.add_subcommand(
        "sweep-sigma", "MSE curves and bounds across stepsize exponents");
    auto* counter = app.add_subcommand(
        "counterexample", "Singular-system study: per-seed terminal iterates");

    for (CLI::App* cmd : {analyze, simulate, verify_exp, verify_conc, sample, sweep}) {
        cmd->add_option("--config", config_path, "JSON run configuration")
            ->required();
        add_override_flags(cmd, ov);
    }
    simulate->add_flag("--ode-restarts", ode_restarts,
                       "Add mean-flow restart columns to the trajectory CSV");

    Vec ce_theta0 = {0.0, 5.0};
    std::size_t ce_n_max = 100000, ce_num_seeds = 50;
    std::uint64_t ce_seed = 1;
    std::string ce_json, ce_csv;
    counter->add_option("--theta0", ce_theta0, "Initial iterate (two numbers)")
        ->expected(2);
    counter->add_option("--n-max", ce_n_max, "Steps per run");
    counter->add_option("--num-seeds", ce_num_seeds, "Independent runs");
    counter->add_option("--seed", ce_seed, "Base seed for the run seeds");
    counter->add_option("--output-json", ce_json, "JSON output path");
    counter->add_option("--output-csv", ce_csv, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (counter->parsed())
            return cmd_counterexample(ce_theta0, ce_n_max, ce_num_seeds, ce_seed,
                                      workers, ce_json, ce_csv);
        const RunConfig cfg = load_config(config_path, ov);
        if (analyze->parsed()) return cmd_analyze(cfg);
        if (simulate->parsed()) return cmd_simulate(cfg, ode_restarts);
        if (verify_exp->parsed()) return cmd_verify_expectation(cfg, workers, false);
        if (sweep->parsed()) return cmd_verify_expectation(cfg, workers, true);
        if (verify_conc->parsed()) return cmd_verify_concentration(cfg, workers);
        if (sample->parsed()) return cmd_sample_complexity(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
