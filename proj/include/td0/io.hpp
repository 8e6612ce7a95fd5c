#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "td0/bounds.hpp"
#include "td0/experiments.hpp"

namespace td0 {

/// Output-side JSON tree. std::map keeps keys sorted, which together with
/// fixed float formatting makes every emission byte-deterministic.
class JsonValue {
  public:
    using Array = std::vector<JsonValue>;
    using Object = std::map<std::string, JsonValue>;

    JsonValue() : value_(nullptr) {}
    JsonValue(std::nullptr_t) : value_(nullptr) {}
    JsonValue(bool b) : value_(b) {}
    JsonValue(double d) : value_(d) {}
    template <typename T,
              typename = std::enable_if_t<std::is_integral_v<T> && !std::is_same_v<T, bool>>>
    JsonValue(T i) {
        if constexpr (std::is_signed_v<T>)
            value_ = static_cast<std::int64_t>(i);
        else
            value_ = static_cast<std::uint64_t>(i);
    }
    JsonValue(const char* s) : value_(std::string(s)) {}
    JsonValue(std::string s) : value_(std::move(s)) {}
    JsonValue(Array a) : value_(std::move(a)) {}
    JsonValue(Object o) : value_(std::move(o)) {}

    bool is_object() const { return std::holds_alternative<Object>(value_); }
    bool is_array() const { return std::holds_alternative<Array>(value_); }

    Object& object() { return std::get<Object>(value_); }
    const Object& object() const { return std::get<Object>(value_); }
    Array& array() { return std::get<Array>(value_); }
    const Array& array() const { return std::get<Array>(value_); }

    const std::variant<std::nullptr_t, bool, double, std::int64_t, std::uint64_t,
                       std::string, Array, Object>&
    raw() const {
        return value_;
    }

  private:
    std::variant<std::nullptr_t, bool, double, std::int64_t, std::uint64_t,
                 std::string, Array, Object>
        value_;
};

JsonValue json_array(std::vector<double> xs);
JsonValue json_array(const std::vector<std::size_t>& xs);
JsonValue json_matrix(const Matrix& m);

/// Serialization: sorted keys, two-space indent, reals as %.17g (so parsing
/// recovers the exact double), non-finite reals as the strings "inf",
/// "-inf", "nan". Same tree in, same bytes out.
std::string dump_json(const JsonValue& v);

/// Inverse surface for round-trip checks; numbers come back as Int/Uint
/// when integral, Real otherwise.
JsonValue parse_json_text(const std::string& text);

/// %.16e rendering used by every CSV cell holding a real.
std::string csv_real(double x);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Fully validated run description.
struct RunParams {
    std::size_t n_max = 10000;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::vector<std::size_t> checkpoints; // empty means the default grid
    double epsilon = 0.1;
    double delta = 0.05;
    std::uint64_t n0 = 1000;
    std::uint64_t n1 = 10000;
    std::uint64_t horizon = 0; // 0 means 2 (n0 + n1)
    std::vector<double> sigma_list = {0.25, 0.5, 0.75};
};

struct OutputPaths {
    std::string json; // empty means stdout for JSON reports
    std::string csv;  // empty means no CSV
};

struct RunConfig {
    Problem problem;
    StepsizeSchedule schedule{0.5};
    RunParams run;
    ConstantOptions constants;
    OutputPaths output;
};

/// Parses and validates a JSON config. Collects every problem it can find
/// and throws a single ConfigError naming all of them with field paths;
/// unknown keys are rejected at every level.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

/// Report serializers (JSON trees; callers dump and write).
JsonValue build_json(const LinearSystem& system);
JsonValue build_json(const BoundConstants& c);
JsonValue build_json(const MseCurve& curve);
JsonValue build_json(const ExpectationReport& report);
JsonValue build_json(const EventReport& report);
JsonValue build_json(const SampleComplexity& sc);
JsonValue build_json(const CounterexampleReport& report);

/// Plot-ready CSV: one row per checkpoint with empirical mean, standard
/// error, and both bound forms (linear and log).
void write_mse_csv(const std::string& path, const MseCurve& curve);

/// One row per (sigma, checkpoint) across a sweep.
void write_sweep_csv(const std::string& path, const ExpectationReport& report);

/// Per-seed counterexample terminals next to the noiseless reference.
void write_counterexample_csv(const std::string& path,
                              const CounterexampleReport& report);

/// One row per recorded step: step, t, theta coordinates, error norm and
/// noise norm when recorded. `ode` optionally adds the mean-flow restart
/// columns (solution started from the previous recorded iterate).
void write_trajectory_csv(const std::string& path, const TrajectoryRecord& record,
                          const LinearSystem& system, bool ode_restarts = false);

} // namespace td0
