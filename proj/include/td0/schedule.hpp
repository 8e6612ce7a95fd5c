#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "td0/errors.hpp"

namespace td0 {

/// Polynomial stepsize schedule alpha_n = (n+1)^(-sigma), sigma in (0, 1].
/// alpha_0 = 1 for every sigma; the schedule is strictly decreasing and
/// its partial sums diverge.
struct StepsizeSchedule {
    double sigma = 1.0;

    explicit StepsizeSchedule(double s) : sigma(s) {
        if (!(s > 0.0) || s > 1.0)
            throw DomainError("stepsize schedule: sigma must lie in (0, 1]");
    }

    double alpha(std::size_t n) const {
        return std::pow(static_cast<double>(n + 1), -sigma);
    }
};

/// Precomputed alpha_n and t_n = sum_{i<n} alpha_i for n = 0..n_max.
/// Built once per run and shared read-only across trials so that hot loops
/// never call pow.
struct StepsizeTable {
    double sigma = 1.0;
    std::vector<double> alphas; // size n_max
    std::vector<double> times;  // size n_max + 1, times[0] = 0

    StepsizeTable(const StepsizeSchedule& schedule, std::size_t n_max)
        : sigma(schedule.sigma) {
        alphas.resize(n_max);
        times.resize(n_max + 1);
        times[0] = 0.0;
        for (std::size_t n = 0; n < n_max; ++n) {
            alphas[n] = schedule.alpha(n);
            times[n + 1] = times[n] + alphas[n];
        }
    }
};

} // namespace td0
