#include "td0/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace td0 {

namespace {

std::string real_repr(double x) {
    if (std::isnan(x)) return "\"nan\"";
    if (std::isinf(x)) return x > 0 ? "\"inf\"" : "\"-inf\"";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string escape_string(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(ch) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", ch);
                    out += buf;
                } else {
                    out += ch;
                }
        }
    }
    out += '"';
    return out;
}

bool is_scalar(const JsonValue& v) { return !v.is_array() && !v.is_object(); }

void dump_rec(const JsonValue& v, std::string& out, int depth) {
    const std::string pad(2 * std::size_t(depth), ' ');
    const std::string pad_in(2 * std::size_t(depth + 1), ' ');
    std::visit(
        [&](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::nullptr_t>) {
                out += "null";
            } else if constexpr (std::is_same_v<T, bool>) {
                out += x ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                out += real_repr(x);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                out += std::to_string(x);
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                out += std::to_string(x);
            } else if constexpr (std::is_same_v<T, std::string>) {
                out += escape_string(x);
            } else if constexpr (std::is_same_v<T, JsonValue::Array>) {
                if (x.empty()) {
                    out += "[]";
                    return;
                }
                bool scalars = true;
                for (const auto& e : x) scalars = scalars && is_scalar(e);
                if (scalars) {
                    out += '[';
                    for (std::size_t i = 0; i < x.size(); ++i) {
                        if (i) out += ", ";
                        dump_rec(x[i], out, depth);
                    }
                    out += ']';
                } else {
                    out += "[\n";
                    for (std::size_t i = 0; i < x.size(); ++i) {
                        out += pad_in;
                        dump_rec(x[i], out, depth + 1);
                        if (i + 1 < x.size()) out += ',';
                        out += '\n';
                    }
                    out += pad + ']';
                }
            } else if constexpr (std::is_same_v<T, JsonValue::Object>) {
                if (x.empty()) {
                    out += "{}";
                    return;
                }
                out += "{\n";
                std::size_t i = 0;
                for (const auto& [k, val] : x) {
                    out += pad_in + escape_string(k) + ": ";
                    dump_rec(val, out, depth + 1);
                    if (++i < x.size()) out += ',';
                    out += '\n';
                }
                out += pad + '}';
            }
        },
        v.raw());
}

JsonValue from_nlohmann(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null: return nullptr;
        case nlohmann::json::value_t::boolean: return j.get<bool>();
        case nlohmann::json::value_t::number_integer: return j.get<std::int64_t>();
        case nlohmann::json::value_t::number_unsigned: return j.get<std::uint64_t>();
        case nlohmann::json::value_t::number_float: return j.get<double>();
        case nlohmann::json::value_t::string: return j.get<std::string>();
        case nlohmann::json::value_t::array: {
            JsonValue::Array a;
            for (const auto& e : j) a.push_back(from_nlohmann(e));
            return a;
        }
        case nlohmann::json::value_t::object: {
            JsonValue::Object o;
            for (auto it = j.begin(); it != j.end(); ++it)
                o.emplace(it.key(), from_nlohmann(it.value()));
            return o;
        }
        default:
            throw ConfigError({"unsupported JSON value type"});
    }
}

} // namespace

JsonValue json_array(std::vector<double> xs) {
    JsonValue::Array a;
    a.reserve(xs.size());
    for (double x : xs) a.emplace_back(x);
    return a;
}

JsonValue json_array(const std::vector<std::size_t>& xs) {
    JsonValue::Array a;
    a.reserve(xs.size());
    for (std::size_t x : xs) a.emplace_back(x);
    return a;
}

JsonValue json_matrix(const Matrix& m) {
    JsonValue::Array rows;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        JsonValue::Array row;
        for (std::size_t j = 0; j < m.cols(); ++j) row.emplace_back(m(i, j));
        rows.emplace_back(std::move(row));
    }
    return rows;
}

std::string dump_json(const JsonValue& v) {
    std::string out;
    dump_rec(v, out, 0);
    out += '\n';
    return out;
}

JsonValue parse_json_text(const std::string& text) {
    try {
        return from_nlohmann(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError({std::string("JSON parse failure: ") + e.what()});
    }
}

std::string csv_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(content.data(), std::streamsize(content.size()));
    if (!f) throw IoError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw ContractError("write_csv: row width differs from header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += row[i];
        }
        out += '\n';
    }
    write_text_file(path, out);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

using nlohmann::json;

struct Validator {
    std::vector<std::string> issues;

    void fail(const std::string& path, const std::string& what) {
        issues.push_back(path + ": " + what);
    }

    bool object(const json& j, const std::string& path) {
        if (j.is_object()) return true;
        fail(path, "must be an object");
        return false;
    }

    void known_keys(const json& j, const std::string& path,
                    const std::set<std::string>& allowed) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!allowed.count(it.key()))
                fail(path.empty() ? it.key() : path + "." + it.key(),
                     "unknown key");
    }

    const json* get(const json& j, const std::string& key) {
        auto it = j.find(key);
        return it == j.end() ? nullptr : &*it;
    }

    std::optional<double> real(const json& j, const std::string& path) {
        if (j.is_number()) return j.get<double>();
        fail(path, "must be a number");
        return std::nullopt;
    }

    std::optional<std::uint64_t> uint(const json& j, const std::string& path) {
        if (j.is_number_unsigned()) return j.get<std::uint64_t>();
        if (j.is_number_integer() && j.get<std::int64_t>() >= 0)
            return static_cast<std::uint64_t>(j.get<std::int64_t>());
        fail(path, "must be a nonnegative integer");
        return std::nullopt;
    }

    std::optional<bool> boolean(const json& j, const std::string& path) {
        if (j.is_boolean()) return j.get<bool>();
        fail(path, "must be a boolean");
        return std::nullopt;
    }

    std::optional<std::string> str(const json& j, const std::string& path) {
        if (j.is_string()) return j.get<std::string>();
        fail(path, "must be a string");
        return std::nullopt;
    }

    std::optional<Vec> vec(const json& j, const std::string& path) {
        if (!j.is_array()) {
            fail(path, "must be an array of numbers");
            return std::nullopt;
        }
        Vec v;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number()) {
                fail(path + "[" + std::to_string(i) + "]", "must be a number");
                return std::nullopt;
            }
            v.push_back(j[i].get<double>());
        }
        return v;
    }

    std::optional<Matrix> matrix(const json& j, const std::string& path) {
        if (!j.is_array() || j.empty()) {
            fail(path, "must be a nonempty array of rows");
            return std::nullopt;
        }
        std::vector<Vec> rows;
        for (std::size_t i = 0; i < j.size(); ++i) {
            auto row = vec(j[i], path + "[" + std::to_string(i) + "]");
            if (!row) return std::nullopt;
            rows.push_back(std::move(*row));
        }
        const std::size_t cols = rows.front().size();
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].size() != cols) {
                fail(path, "rows have unequal lengths");
                return std::nullopt;
            }
        if (cols == 0) {
            fail(path, "rows must be nonempty");
            return std::nullopt;
        }
        Matrix m(rows.size(), cols);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t k = 0; k < cols; ++k) m(i, k) = rows[i][k];
        return m;
    }
};

std::optional<Problem> parse_problem(Validator& v, const json& root) {
    const json* pj = v.get(root, "problem");
    if (!pj) {
        v.fail("problem", "required");
        return std::nullopt;
    }
    if (!v.object(*pj, "problem")) return std::nullopt;

    const json* kind_j = v.get(*pj, "kind");
    std::string kind;
    if (!kind_j) {
        v.fail("problem.kind", "required (\"mdp\" or \"raw\")");
        return std::nullopt;
    }
    if (auto s = v.str(*kind_j, "problem.kind")) kind = *s;
    if (kind != "mdp" && kind != "raw") {
        v.fail("problem.kind", "must be \"mdp\" or \"raw\"");
        return std::nullopt;
    }

    Problem problem;
    if (kind == "mdp") {
        v.known_keys(*pj, "problem",
                     {"kind", "n_states", "gamma", "transition", "reward", "features"});
        MdpSpec spec;
        bool ok = true;
        if (const json* nj = v.get(*pj, "n_states")) {
            if (auto n = v.uint(*nj, "problem.n_states")) {
                if (*n < 1) {
                    v.fail("problem.n_states", "must be at least 1");
                    ok = false;
                } else {
                    spec.n_states = static_cast<std::size_t>(*n);
                }
            } else {
                ok = false;
            }
        } else {
            v.fail("problem.n_states", "required");
            ok = false;
        }
        if (const json* gj = v.get(*pj, "gamma")) {
            if (auto g = v.real(*gj, "problem.gamma")) {
                if (!(*g > 0.0) || !(*g < 1.0)) {
                    v.fail("problem.gamma", "must lie in (0, 1)");
                    ok = false;
                } else {
                    spec.gamma = *g;
                }
            } else {
                ok = false;
            }
        } else {
            v.fail("problem.gamma", "required");
            ok = false;
        }
        for (const char* key : {"transition", "reward", "features"}) {
            const json* mj = v.get(*pj, key);
            if (!mj) {
                v.fail(std::string("problem.") + key, "required");
                ok = false;
                continue;
            }
            auto m = v.matrix(*mj, std::string("problem.") + key);
            if (!m) {
                ok = false;
                continue;
            }
            if (std::string(key) == "transition") spec.transition = std::move(*m);
            else if (std::string(key) == "reward") spec.reward = std::move(*m);
            else spec.features = std::move(*m);
        }
        if (!ok) return std::nullopt;
        try {
            spec.validate();
            problem.nu = stationary_distribution(spec);
            problem.system = compute_system(spec, *problem.nu);
            problem.mdp = std::move(spec);
        } catch (const std::exception& e) {
            v.fail("problem", e.what());
            return std::nullopt;
        }
    } else {
        v.known_keys(*pj, "problem", {"kind", "a", "b", "theta_ref", "gamma"});
        std::optional<Matrix> a;
        std::optional<Vec> b;
        if (const json* aj = v.get(*pj, "a")) a = v.matrix(*aj, "problem.a");
        else v.fail("problem.a", "required");
        if (const json* bj = v.get(*pj, "b")) b = v.vec(*bj, "problem.b");
        else v.fail("problem.b", "required");
        if (!a || !b) return std::nullopt;
        if (!a->square() || a->rows() != b->size()) {
            v.fail("problem", "a must be square with matching b length");
            return std::nullopt;
        }
        std::optional<Vec> theta_ref;
        if (const json* tj = v.get(*pj, "theta_ref")) {
            theta_ref = v.vec(*tj, "problem.theta_ref");
            if (theta_ref && theta_ref->size() != b->size()) {
                v.fail("problem.theta_ref", "length must match b");
                return std::nullopt;
            }
        }
        std::optional<double> gamma;
        if (const json* gj = v.get(*pj, "gamma")) {
            gamma = v.real(*gj, "problem.gamma");
            if (gamma && (!(*gamma >= 0.0) || !(*gamma < 1.0))) {
                v.fail("problem.gamma", "must lie in [0, 1)");
                return std::nullopt;
            }
        }
        try {
            problem.system = make_raw_system(*a, *b, theta_ref, gamma);
        } catch (const std::exception& e) {
            v.fail("problem", e.what());
            return std::nullopt;
        }
        if (problem.system.singular && !theta_ref) {
            v.fail("problem.theta_ref", "required when a is singular");
            return std::nullopt;
        }
    }
    return problem;
}

void parse_noise(Validator& v, const json& root, Problem& problem) {
    problem.noise = problem.mdp ? NoiseModel::mdp_sampling() : NoiseModel::none();
    const json* nj = v.get(root, "noise");
    if (!nj) return;
    if (!v.object(*nj, "noise")) return;
    v.known_keys(*nj, "noise", {"kind", "direction", "coordinate", "reference"});
    const json* kj = v.get(*nj, "kind");
    if (!kj) {
        v.fail("noise.kind", "required when noise is given");
        return;
    }
    auto kind = v.str(*kj, "noise.kind");
    if (!kind) return;
    const std::size_t dim = problem.system.dim();
    if (*kind == "none") {
        problem.noise = NoiseModel::none();
    } else if (*kind == "mdp-sampling") {
        if (!problem.mdp) {
            v.fail("noise.kind", "mdp-sampling needs an mdp problem");
            return;
        }
        problem.noise = NoiseModel::mdp_sampling();
    } else if (*kind == "bernoulli-rank-one") {
        std::optional<Vec> dir, ref;
        std::optional<std::uint64_t> coord;
        if (const json* dj = v.get(*nj, "direction")) dir = v.vec(*dj, "noise.direction");
        else v.fail("noise.direction", "required for bernoulli-rank-one");
        if (const json* rj = v.get(*nj, "reference")) ref = v.vec(*rj, "noise.reference");
        else v.fail("noise.reference", "required for bernoulli-rank-one");
        if (const json* cj = v.get(*nj, "coordinate")) coord = v.uint(*cj, "noise.coordinate");
        else v.fail("noise.coordinate", "required for bernoulli-rank-one");
        if (!dir || !ref || !coord) return;
        if (dir->size() != dim) v.fail("noise.direction", "length must equal the dimension");
        if (ref->size() != dim) v.fail("noise.reference", "length must equal the dimension");
        if (*coord >= dim) v.fail("noise.coordinate", "must index a coordinate (0-based)");
        if (dir->size() == dim && ref->size() == dim && *coord < dim)
            problem.noise = NoiseModel::bernoulli_rank_one(
                *dir, static_cast<std::size_t>(*coord), *ref);
    } else {
        v.fail("noise.kind", "must be \"none\", \"mdp-sampling\" or \"bernoulli-rank-one\"");
    }
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError({origin + ": " + e.what()});
    }
    Validator v;
    if (!root.is_object()) throw ConfigError({origin + ": top level must be an object"});
    v.known_keys(root, "",
                 {"problem", "noise", "schedule", "theta0", "run", "constants", "output"});

    RunConfig cfg;
    auto problem = parse_problem(v, root);
    std::size_t dim = problem ? problem->system.dim() : 0;

    if (problem) {
        parse_noise(v, root, *problem);
        problem->theta0.assign(dim, 0.0);
        if (const json* tj = v.get(root, "theta0")) {
            if (auto t0 = v.vec(*tj, "theta0")) {
                if (t0->size() != dim)
                    v.fail("theta0", "length must equal the problem dimension");
                else
                    problem->theta0 = std::move(*t0);
            }
        }
    }

    double sigma = 0.5;
    if (const json* sj = v.get(root, "schedule")) {
        if (v.object(*sj, "schedule")) {
            v.known_keys(*sj, "schedule", {"sigma"});
            if (const json* sv = v.get(*sj, "sigma")) {
                if (auto s = v.real(*sv, "schedule.sigma")) {
                    if (!(*s > 0.0) || !(*s <= 1.0))
                        v.fail("schedule.sigma", "must lie in (0, 1]");
                    else
                        sigma = *s;
                }
            }
        }
    }

    if (const json* rj = v.get(root, "run")) {
        if (v.object(*rj, "run")) {
            v.known_keys(*rj, "run",
                         {"n_max", "trials", "seed", "checkpoints", "epsilon", "delta",
                          "n0", "n1", "horizon", "sigma_list"});
            if (const json* x = v.get(*rj, "n_max")) {
                if (auto n = v.uint(*x, "run.n_max")) {
                    if (*n < 1) v.fail("run.n_max", "must be at least 1");
                    else cfg.run.n_max = static_cast<std::size_t>(*n);
                }
            }
            if (const json* x = v.get(*rj, "trials")) {
                if (auto n = v.uint(*x, "run.trials")) {
                    if (*n < 2) v.fail("run.trials", "must be at least 2");
                    else cfg.run.trials = static_cast<std::size_t>(*n);
                }
            }
            if (const json* x = v.get(*rj, "seed")) {
                if (auto n = v.uint(*x, "run.seed")) cfg.run.seed = *n;
            }
            if (const json* x = v.get(*rj, "checkpoints")) {
                if (!x->is_array() || x->empty()) {
                    v.fail("run.checkpoints", "must be a nonempty ascending array");
                } else {
                    std::vector<std::size_t> cps;
                    bool ok = true;
                    for (std::size_t i = 0; i < x->size(); ++i) {
                        auto n = v.uint((*x)[i],
                                        "run.checkpoints[" + std::to_string(i) + "]");
                        if (!n) {
                            ok = false;
                            break;
                        }
                        if (!cps.empty() && *n <= cps.back()) {
                            v.fail("run.checkpoints", "must be strictly ascending");
                            ok = false;
                            break;
                        }
                        cps.push_back(static_cast<std::size_t>(*n));
                    }
                    if (ok) cfg.run.checkpoints = std::move(cps);
                }
            }
            if (const json* x = v.get(*rj, "epsilon")) {
                if (auto e = v.real(*x, "run.epsilon")) {
                    if (!(*e > 0.0)) v.fail("run.epsilon", "must be positive");
                    else cfg.run.epsilon = *e;
                }
            }
            if (const json* x = v.get(*rj, "delta")) {
                if (auto d = v.real(*x, "run.delta")) {
                    if (!(*d > 0.0) || !(*d < 1.0)) v.fail("run.delta", "must lie in (0, 1)");
                    else cfg.run.delta = *d;
                }
            }
            if (const json* x = v.get(*rj, "n0")) {
                if (auto n = v.uint(*x, "run.n0")) {
                    if (*n < 1) v.fail("run.n0", "must be at least 1");
                    else cfg.run.n0 = *n;
                }
            }
            if (const json* x = v.get(*rj, "n1")) {
                if (auto n = v.uint(*x, "run.n1")) {
                    if (*n < 1) v.fail("run.n1", "must be at least 1");
                    else cfg.run.n1 = *n;
                }
            }
            if (const json* x = v.get(*rj, "horizon")) {
                if (auto n = v.uint(*x, "run.horizon")) cfg.run.horizon = *n;
            }
            if (const json* x = v.get(*rj, "sigma_list")) {
                if (!x->is_array() || x->empty()) {
                    v.fail("run.sigma_list", "must be a nonempty array");
                } else {
                    std::vector<double> ss;
                    for (std::size_t i = 0; i < x->size(); ++i) {
                        auto s = v.real((*x)[i],
                                        "run.sigma_list[" + std::to_string(i) + "]");
                        if (!s) break;
                        if (!(*s > 0.0) || *s >= 1.0) {
                            v.fail("run.sigma_list[" + std::to_string(i) + "]",
                                   "must lie in (0, 1)");
                            break;
                        }
                        ss.push_back(*s);
                    }
                    if (ss.size() == x->size()) cfg.run.sigma_list = std::move(ss);
                }
            }
            if (cfg.run.horizon != 0 && cfg.run.horizon <= cfg.run.n0 + cfg.run.n1)
                v.fail("run.horizon", "must exceed n0 + n1 (or be 0 for the default)");
        }
    }

    if (const json* cj = v.get(root, "constants")) {
        if (v.object(*cj, "constants")) {
            v.known_keys(*cj, "constants",
                         {"lambda_exp_fraction", "lambda_hp_fraction",
                          "tight_noise_constant"});
            for (const char* key : {"lambda_exp_fraction", "lambda_hp_fraction"}) {
                if (const json* x = v.get(*cj, key)) {
                    if (auto f = v.real(*x, std::string("constants.") + key)) {
                        if (!(*f > 0.0) || *f >= 1.0)
                            v.fail(std::string("constants.") + key, "must lie in (0, 1)");
                        else if (std::string(key) == "lambda_exp_fraction")
                            cfg.constants.lambda_exp_fraction = *f;
                        else
                            cfg.constants.lambda_hp_fraction = *f;
                    }
                }
            }
            if (const json* x = v.get(*cj, "tight_noise_constant")) {
                if (auto b = v.boolean(*x, "constants.tight_noise_constant")) {
                    if (*b && problem && !problem->mdp)
                        v.fail("constants.tight_noise_constant",
                               "requires an mdp problem");
                    else
                        cfg.constants.tight_noise_constant = *b;
                }
            }
        }
    }

    if (const json* oj = v.get(root, "output")) {
        if (v.object(*oj, "output")) {
            v.known_keys(*oj, "output", {"json", "csv"});
            if (const json* x = v.get(*oj, "json")) {
                if (auto s = v.str(*x, "output.json")) cfg.output.json = *s;
            }
            if (const json* x = v.get(*oj, "csv")) {
                if (auto s = v.str(*x, "output.csv")) cfg.output.csv = *s;
            }
        }
    }

    if (!v.issues.empty()) throw ConfigError(v.issues);
    cfg.problem = std::move(*problem);
    cfg.schedule = StepsizeSchedule(sigma);
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError& e) {
        throw ConfigError({e.what()});
    }
    return parse_config_text(text, path);
}

// ---------------------------------------------------------------------------
// Report serialization

JsonValue build_json(const LinearSystem& system) {
    JsonValue::Object o;
    o["a"] = json_matrix(system.a);
    o["b"] = json_array(system.b);
    o["origin"] = system.origin == LinearSystem::Origin::MdpDerived ? "mdp" : "raw";
    o["singular"] = system.singular;
    o["theta_star"] = system.theta_star ? json_array(*system.theta_star) : JsonValue();
    o["theta_ref"] = system.theta_ref ? json_array(*system.theta_ref) : JsonValue();
    o["gamma"] = system.gamma ? JsonValue(*system.gamma) : JsonValue();
    JsonValue::Object sp;
    sp["sym_min_eig"] = system.spectral.sym_min_eig;
    sp["sym_max_eig"] = system.spectral.sym_max_eig;
    sp["min_real_part"] = system.spectral.min_real_part;
    sp["spectral_norm"] = system.spectral.spectral_norm;
    o["spectral"] = std::move(sp);
    return o;
}

JsonValue build_json(const BoundConstants& c) {
    JsonValue::Object o;
    o["dim"] = c.dim;
    o["sigma"] = c.sigma;
    o["gamma"] = c.gamma;
    o["sym_min_eig"] = c.sym_min_eig;
    o["min_real_part"] = c.min_real_part;
    o["a_norm"] = c.a_norm;
    o["a_inv_norm"] = c.a_inv_norm;
    o["b_norm"] = c.b_norm;
    o["lambda_exp"] = c.lambda_exp;
    o["lambda_hp"] = c.lambda_hp;
    o["lambda_hp_perturbed"] = c.lambda_hp_perturbed;
    o["k_m"] = c.k_m;
    o["k_s"] = c.k_s;
    o["k_s_tightened"] = c.k_s_tightened;
    o["mu"] = c.mu;
    o["ata_ks_max"] = c.ata_ks_max;
    o["m"] = c.m;
    o["log_k_p"] = c.log_k_p;
    o["k_p"] = c.k_p;
    o["closed_form"] = c.closed_form;
    o["i0"] = c.i0;
    o["k_b"] = c.k_b;
    o["log_k1"] = c.log_k1;
    o["k1"] = c.k1;
    o["log_k2"] = c.log_k2;
    o["k2"] = c.k2;
    o["e0"] = c.e0;
    o["c_star"] = c.c_star;
    o["r0"] = c.r0;
    o["k_lambda"] = c.k_lambda;
    o["c_m2"] = c.c_m2;
    o["sym_a"] = json_matrix(c.sym_a);
    o["ata_ks"] = json_matrix(c.ata_ks);
    return o;
}

namespace {

JsonValue diverged_json(const std::vector<std::pair<std::size_t, std::size_t>>& d) {
    JsonValue::Array a;
    for (const auto& [trial, step] : d) {
        JsonValue::Object o;
        o["trial"] = trial;
        o["step"] = step;
        a.emplace_back(std::move(o));
    }
    return a;
}

} // namespace

JsonValue build_json(const MseCurve& curve) {
    JsonValue::Object o;
    o["sigma"] = curve.sigma;
    o["trials"] = curve.trials;
    o["completed"] = curve.completed;
    o["seed"] = curve.seed;
    o["checkpoints"] = json_array(curve.checkpoints);
    o["empirical_mean"] = json_array(curve.empirical_mean);
    o["std_err"] = json_array(curve.std_err);
    o["bound_general"] = json_array(curve.bound_general);
    o["bound_closed"] = json_array(curve.bound_closed);
    o["log_bound_general"] = json_array(curve.log_bound_general);
    o["log_bound_closed"] = json_array(curve.log_bound_closed);
    o["bounds_defined"] = curve.bounds_defined;
    o["closed_defined"] = curve.closed_defined;
    o["bounds_note"] = curve.bounds_note;
    o["diverged"] = diverged_json(curve.diverged);
    return o;
}

JsonValue build_json(const ExpectationReport& report) {
    JsonValue::Object o;
    o["all_pass"] = report.all_pass;
    o["trials"] = report.trials;
    o["seed"] = report.seed;
    JsonValue::Array verdicts;
    for (const auto& v : report.verdicts) {
        JsonValue::Object vo;
        vo["sigma"] = v.sigma;
        vo["pass"] = v.pass;
        vo["worst_margin_log"] = v.worst_margin_log;
        vo["worst_checkpoint"] = v.worst_checkpoint;
        vo["crossover_index"] = v.crossover_index;
        vo["curve"] = build_json(v.curve);
        verdicts.emplace_back(std::move(vo));
    }
    o["verdicts"] = std::move(verdicts);
    return o;
}

JsonValue build_json(const EventReport& report) {
    JsonValue::Object o;
    o["n0"] = report.n0;
    o["n1"] = report.n1;
    o["horizon"] = report.horizon;
    o["epsilon"] = report.epsilon;
    o["trials"] = report.trials;
    o["completed"] = report.completed;
    o["seed"] = report.seed;
    o["r_wc"] = report.r_wc;
    o["ball"] = report.ball;
    o["freq_G_exit"] = report.freq_G_exit;
    o["freq_mid_exit"] = report.freq_mid_exit;
    o["freq_after_violation"] = report.freq_after_violation;
    o["count_G_exit"] = report.count_G_exit;
    o["count_mid_exit"] = report.count_mid_exit;
    o["count_after_violation"] = report.count_after_violation;
    o["bound_mid"] = report.bound_mid;
    o["bound_after"] = report.bound_after;
    o["bounds_applicable"] = report.bounds_applicable;
    o["bound_mid_vacuous"] = report.bound_mid_vacuous;
    o["bound_after_vacuous"] = report.bound_after_vacuous;
    o["implied_nc"] = report.implied_nc;
    JsonValue::Array failed;
    for (const auto& f : report.failed_prereqs) failed.emplace_back(f);
    o["failed_prereqs"] = std::move(failed);
    o["bounds_note"] = report.bounds_note;
    o["diverged"] = diverged_json(report.diverged);
    return o;
}

JsonValue build_json(const SampleComplexity& sc) {
    JsonValue::Object o;
    o["epsilon"] = sc.epsilon;
    o["delta"] = sc.delta;
    o["branch"] = sc.lambda_above_half ? "lambda_above_half" : "lambda_below_half";
    o["n0"] = sc.n0;
    o["nc"] = sc.nc;
    o["n1"] = sc.n1;
    o["n_total"] = sc.n_total;
    o["log10_n1"] = sc.log10_n1;
    o["log10_n_total"] = sc.log10_n_total;
    o["astronomically_large"] = sc.astronomically_large;
    return o;
}

JsonValue build_json(const CounterexampleReport& report) {
    JsonValue::Object o;
    o["theta0"] = json_array(report.theta0);
    o["n_max"] = report.n_max;
    o["noiseless_terminal"] = json_array(report.noiseless_terminal);
    JsonValue::Array seeds;
    for (auto s : report.seeds) seeds.emplace_back(s);
    o["seeds"] = std::move(seeds);
    JsonValue::Array terminals;
    for (const auto& t : report.terminals) terminals.emplace_back(json_array(t));
    o["terminals"] = std::move(terminals);
    o["theta2"] = json_array(report.theta2);
    o["theta2_mean"] = report.theta2_mean;
    o["theta2_std"] = report.theta2_std;
    return o;
}

void write_mse_csv(const std::string& path, const MseCurve& curve) {
    std::vector<std::string> header = {"n",
                                       "empirical_mean",
                                       "std_err",
                                       "bound_general",
                                       "bound_closed",
                                       "log_bound_general",
                                       "log_bound_closed"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < curve.checkpoints.size(); ++j)
        rows.push_back({std::to_string(curve.checkpoints[j]),
                        csv_real(curve.empirical_mean[j]), csv_real(curve.std_err[j]),
                        csv_real(curve.bound_general[j]), csv_real(curve.bound_closed[j]),
                        csv_real(curve.log_bound_general[j]),
                        csv_real(curve.log_bound_closed[j])});
    write_csv(path, header, rows);
}

void write_sweep_csv(const std::string& path, const ExpectationReport& report) {
    std::vector<std::string> header = {"sigma",
                                       "n",
                                       "empirical_mean",
                                       "std_err",
                                       "bound_general",
                                       "bound_closed",
                                       "log_bound_general",
                                       "log_bound_closed"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& v : report.verdicts)
        for (std::size_t j = 0; j < v.curve.checkpoints.size(); ++j)
            rows.push_back({csv_real(v.sigma), std::to_string(v.curve.checkpoints[j]),
                            csv_real(v.curve.empirical_mean[j]),
                            csv_real(v.curve.std_err[j]),
                            csv_real(v.curve.bound_general[j]),
                            csv_real(v.curve.bound_closed[j]),
                            csv_real(v.curve.log_bound_general[j]),
                            csv_real(v.curve.log_bound_closed[j])});
    write_csv(path, header, rows);
}

void write_counterexample_csv(const std::string& path,
                              const CounterexampleReport& report) {
    std::vector<std::string> header = {"seed", "theta_1", "theta_2",
                                       "noiseless_theta_1", "noiseless_theta_2"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < report.seeds.size(); ++i)
        rows.push_back({std::to_string(report.seeds[i]),
                        csv_real(report.terminals[i][0]), csv_real(report.terminals[i][1]),
                        csv_real(report.noiseless_terminal[0]),
                        csv_real(report.noiseless_terminal[1])});
    write_csv(path, header, rows);
}

void write_trajectory_csv(const std::string& path, const TrajectoryRecord& record,
                          const LinearSystem& system, bool ode_restarts) {
    const Vec ref = system.reference_point();
    std::vector<std::string> header = {"step", "t"};
    for (std::size_t k = 0; k < record.dim; ++k)
        header.push_back("theta_" + std::to_string(k));
    header.push_back("err_norm");
    const bool have_noise = !record.noise_norms.empty();
    if (have_noise) header.push_back("noise_norm");
    if (ode_restarts) {
        for (std::size_t k = 0; k < record.dim; ++k)
            header.push_back("ode_theta_" + std::to_string(k));
        header.push_back("ode_gap");
    }

    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < record.checkpoints.size(); ++j) {
        const std::size_t n = record.checkpoints[j];
        std::vector<std::string> row = {std::to_string(n), csv_real(record.times[j])};
        for (std::size_t k = 0; k < record.dim; ++k)
            row.push_back(csv_real(record.thetas[j][k]));
        row.push_back(csv_real(norm2(record.thetas[j] - ref)));
        if (have_noise)
            row.push_back(csv_real(n >= 1 ? record.noise_norms[n - 1] : 0.0));
        if (ode_restarts) {
            Vec ode = record.thetas[j];
            if (j > 0)
                ode = ode_solution(system, record.times[j], record.times[j - 1],
                                   record.thetas[j - 1], ref);
            for (std::size_t k = 0; k < record.dim; ++k) row.push_back(csv_real(ode[k]));
            row.push_back(csv_real(norm2(record.thetas[j] - ode)));
        }
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

} // namespace td0
