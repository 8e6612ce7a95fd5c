#include "td0/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace td0 {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logsumexp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// max over the support of the per-transition quadratic noise coefficient:
// each sampled noise is an affine map G (theta - theta*) + g, so
// 2 * max(||G||, ||g||)^2 bounds the conditional second moment against
// 1 + ||theta - theta*||^2.
double enumerate_noise_constant(const MdpSpec& spec, const StationaryDistribution& nu,
                                const LinearSystem& sys) {
    const std::size_t d = spec.dim();
    const Vec& theta_star = *sys.theta_star;
    double worst = 0.0;
    for (std::size_t s = 0; s < spec.n_states; ++s) {
        if (nu.nu[s] <= 0.0) continue;
        const Vec phi = spec.features.row(s);
        for (std::size_t s2 = 0; s2 < spec.n_states; ++s2) {
            if (spec.transition(s, s2) <= 0.0) continue;
            const Vec phi2 = spec.features.row(s2);
            Matrix g_mat(d, d);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    g_mat(i, j) = phi[i] * (spec.gamma * phi2[j] - phi[j]) + sys.a(i, j);
            const double shift = spec.reward(s, s2) +
                                 spec.gamma * dot(phi2, theta_star) - dot(phi, theta_star);
            const double g_vec_norm = std::abs(shift) * norm2(phi);
            worst = std::max(worst, std::max(spectral_norm(g_mat), g_vec_norm));
        }
    }
    return 2.0 * worst * worst;
}

} // namespace

double estimate_k_lambda(const Matrix& a, double lambda, std::size_t points) {
    if (!a.square()) throw DimensionError("k_lambda: matrix not square");
    if (!(lambda > 0.0)) throw DomainError("k_lambda: lambda must be positive");
    if (points < 100) throw DomainError("k_lambda: grid too coarse");
    double min_re = kInf;
    for (const auto& z : eigenvalues_general(a)) min_re = std::min(min_re, z.real());
    if (!(min_re > lambda))
        throw DomainError("k_lambda: lambda must lie strictly below the spectral abscissa");

    const double horizon = 50.0 / lambda;
    const double dt = horizon / static_cast<double>(points - 1);
    const Matrix neg_a = -1.0 * a;
    const Matrix step = matrix_exponential(neg_a, dt);

    double best = 0.0;
    std::size_t best_index = 0;
    Matrix flow = Matrix::identity(a.rows());
    for (std::size_t i = 0; i < points; ++i) {
        const double t = dt * static_cast<double>(i);
        if (i > 0) flow = (i % 64 == 0) ? matrix_exponential(neg_a, t) : flow * step;
        const double g = spectral_norm(flow) * std::exp(lambda * t);
        if (g > best) {
            best = g;
            best_index = i;
        }
    }
    if (best_index + points / 50 >= points)
        throw DomainError("k_lambda: envelope still rising near the grid end; "
                          "lambda is too close to the spectral abscissa");
    return 1.05 * best;
}

BoundConstants derive_constants(const LinearSystem& system,
                                const StepsizeSchedule& schedule, const Vec& theta0,
                                const ConstantOptions& options, const MdpSpec* spec,
                                const StationaryDistribution* nu) {
    if (!(options.lambda_exp_fraction > 0.0) || options.lambda_exp_fraction >= 1.0 ||
        !(options.lambda_hp_fraction > 0.0) || options.lambda_hp_fraction >= 1.0)
        throw DomainError("derive_constants: fractions must lie in (0, 1)");
    if (!(system.spectral.sym_min_eig > 0.0))
        throw InapplicabilityError(
            "derive_constants: A + A^T is not positive definite; the expectation "
            "bounds do not apply to this system");
    if (!system.theta_star)
        throw InapplicabilityError("derive_constants: system has no fixed point");
    if (!system.gamma)
        throw ContractError("derive_constants: system carries no discount factor "
                            "(required by the noise magnitude constant)");
    if (theta0.size() != system.dim())
        throw DimensionError("derive_constants: theta0 dimension mismatch");

    BoundConstants c;
    c.dim = system.dim();
    c.sigma = schedule.sigma;
    c.gamma = *system.gamma;
    c.sym_min_eig = system.spectral.sym_min_eig;
    c.min_real_part = system.spectral.min_real_part;
    c.a_norm = system.spectral.spectral_norm;
    c.a_inv_norm = spectral_norm(inverse(system.a));
    c.b_norm = norm2(system.b);

    c.lambda_exp = options.lambda_exp_fraction * c.sym_min_eig;
    c.lambda_hp = options.lambda_hp_fraction * c.min_real_part;
    if (c.lambda_hp == 0.5) {
        // Removable singularity of the lambda-branch formulas; nudge down.
        c.lambda_hp = 0.5 * (1.0 - 1e-6);
        c.lambda_hp_perturbed = true;
    }

    c.k_m = 0.25 * std::max(2.0 + (1.0 + c.gamma) * c.a_inv_norm * c.b_norm,
                            1.0 + c.gamma + 4.0 * c.a_norm);
    c.k_s = 2.0 * c.k_m * c.k_m;
    if (options.tight_noise_constant) {
        if (!spec || !nu)
            throw ContractError("derive_constants: enumeration-based noise constant "
                                "needs the mdp and its stationary distribution");
        const double tight = enumerate_noise_constant(*spec, *nu, system);
        if (tight < c.k_s) {
            c.k_s = tight;
            c.k_s_tightened = true;
        }
    }

    c.sym_a = system.a + transpose(system.a);
    Matrix ata = transpose(system.a) * system.a;
    for (std::size_t i = 0; i < c.dim; ++i)
        for (std::size_t j = i + 1; j < c.dim; ++j) {
            const double avg = 0.5 * (ata(i, j) + ata(j, i));
            ata(i, j) = avg;
            ata(j, i) = avg;
        }
    for (std::size_t i = 0; i < c.dim; ++i) ata(i, i) += c.k_s;
    c.ata_ks = ata;
    c.ata_ks_max = sym_eigenvalues(c.ata_ks).back();
    c.mu = -c.sym_min_eig + c.ata_ks_max;

    const double ratio = c.ata_ks_max / (c.sym_min_eig - c.lambda_exp);
    const double m_real = std::pow(ratio, 1.0 / c.sigma);
    if (!(m_real <= 1e7))
        throw NumericalError("derive_constants: stepsize threshold index " +
                             std::to_string(m_real) + " exceeds the 1e7 cap");
    c.m = static_cast<std::uint64_t>(std::ceil(m_real));

    if (c.mu + c.lambda_exp > 0.0) {
        double alpha_sum = 0.0;
        for (std::uint64_t l = 0; l <= c.m; ++l)
            alpha_sum += std::pow(static_cast<double>(l + 1), -c.sigma);
        c.log_k_p = (c.mu + c.lambda_exp) * alpha_sum;
    } else {
        c.log_k_p = 0.0; // empty product dominates
    }
    c.k_p = std::exp(c.log_k_p);

    const Vec err0 = theta0 - *system.theta_star;
    c.e0 = dot(err0, err0);
    c.c_star = 1.0 + norm2(*system.theta_star);
    c.r0 = 1.0 + norm2(err0);

    c.closed_form = c.sigma < 1.0;
    if (c.closed_form) {
        const double i0_real =
            std::pow(2.0 * c.sigma / c.lambda_exp, 1.0 / (1.0 - c.sigma));
        if (!(i0_real <= 1e8))
            throw NumericalError("derive_constants: burn-in index i0 exceeds the 1e8 cap");
        c.i0 = static_cast<std::uint64_t>(std::ceil(i0_real));
        double alpha_sum = 0.0;
        for (std::uint64_t k = 0; k <= c.i0; ++k)
            alpha_sum += std::pow(static_cast<double>(k + 1), -c.sigma);
        const double log_k_b = 0.5 * c.lambda_exp * alpha_sum;
        c.k_b = std::exp(log_k_b);
        const double log_e0 = c.e0 > 0.0 ? std::log(c.e0) : -kInf;
        c.log_k1 = c.log_k_p + c.lambda_exp +
                   logsumexp(log_e0, std::log(2.0 * c.k_s / c.lambda_exp) + log_k_b);
        c.log_k2 = c.log_k_p + 0.5 * c.lambda_exp + std::log(2.0 * c.k_s / c.lambda_exp);
        c.k1 = std::exp(c.log_k1);
        c.k2 = std::exp(c.log_k2);
    }

    c.k_lambda = estimate_k_lambda(system.a, c.lambda_hp);
    if (c.lambda_hp > 0.5)
        c.c_m2 = 6.0 * c.k_m * c.k_lambda * std::pow(2.0, c.lambda_hp - 0.5) /
                 std::sqrt(2.0 * c.lambda_hp - 1.0);
    else
        c.c_m2 = 6.0 * c.k_m * c.k_lambda / std::sqrt(1.0 - 2.0 * c.lambda_hp);
    return c;
}

Matrix contraction_matrix(const BoundConstants& c, double alpha) {
    Matrix lam = Matrix::identity(c.dim);
    for (std::size_t i = 0; i < c.dim; ++i)
        for (std::size_t j = 0; j < c.dim; ++j)
            lam(i, j) += -alpha * c.sym_a(i, j) + alpha * alpha * c.ata_ks(i, j);
    return lam;
}

double contraction_factor(const BoundConstants& c, double alpha) {
    return sym_eigenvalues(contraction_matrix(c, alpha)).back();
}

double contraction_factor_upper(const BoundConstants& c, double alpha) {
    return 1.0 - alpha * c.sym_min_eig + alpha * alpha * c.ata_ks_max;
}

double log_product_bound(const BoundConstants& c, const StepsizeTable& table,
                         std::size_t k, std::size_t n) {
    if (k > n || n >= table.alphas.size())
        throw DomainError("product_bound: need k <= n < table size");
    const double alpha_sum = table.times[n + 1] - table.times[k];
    return c.log_k_p - c.lambda_exp * alpha_sum;
}

double product_bound(const BoundConstants& c, const StepsizeTable& table,
                     std::size_t k, std::size_t n) {
    return std::exp(log_product_bound(c, table, k, n));
}

ProductDominance check_product_dominance(const BoundConstants& c,
                                         const StepsizeTable& table,
                                         std::size_t n_max) {
    if (n_max >= table.alphas.size())
        throw DomainError("product dominance: n_max beyond table");
    ProductDominance out;
    out.max_gap_log = -kInf;
    // prefix_n = sum_{i<=n} [ln max_eig Lambda(alpha_i) + lambda alpha_i];
    // the largest prefix difference is the worst (k, n) pair.
    double prefix = 0.0;
    double min_prefix = 0.0; // over j in {-1, 0, .., n-1}
    std::size_t min_arg = 0; // k = j + 1
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double alpha = table.alphas[n];
        prefix += std::log(contraction_factor(c, alpha)) + c.lambda_exp * alpha;
        const double gap = prefix - min_prefix - c.log_k_p;
        if (gap > out.max_gap_log) {
            out.max_gap_log = gap;
            out.argmax_k = min_arg;
            out.argmax_n = n;
        }
        if (prefix < min_prefix) {
            min_prefix = prefix;
            min_arg = n + 1;
        }
    }
    return out;
}

ExpectationBoundSeries::ExpectationBoundSeries(const BoundConstants& c,
                                               const StepsizeSchedule& schedule)
    : c_(c), schedule_(schedule) {
    if (schedule.sigma != c.sigma)
        throw ContractError("expectation bound: schedule/constants sigma mismatch");
}

void ExpectationBoundSeries::advance() {
    const double alpha = schedule_.alpha(step_);
    q_ = std::exp(-c_.lambda_exp * alpha) * q_ + alpha * alpha;
    time_sum_ += alpha;
    ++step_;
}

double ExpectationBoundSeries::log_bound() const {
    const double first = std::exp(-c_.lambda_exp * time_sum_) * c_.e0;
    const double inner = first + c_.k_s * q_;
    return inner > 0.0 ? c_.log_k_p + std::log(inner) : -kInf;
}

double ExpectationBoundSeries::bound() const { return std::exp(log_bound()); }

double log_expectation_bound_general(const BoundConstants& c,
                                     const StepsizeSchedule& schedule, std::size_t n) {
    ExpectationBoundSeries series(c, schedule);
    for (std::size_t i = 0; i <= n; ++i) series.advance();
    return series.log_bound();
}

double expectation_bound_general(const BoundConstants& c,
                                 const StepsizeSchedule& schedule, std::size_t n) {
    return std::exp(log_expectation_bound_general(c, schedule, n));
}

double log_expectation_bound_closed(const BoundConstants& c, std::size_t n) {
    if (!c.closed_form)
        throw DomainError("closed-form bound undefined at sigma = 1; "
                          "use the high-probability machinery instead");
    if (n == 0) throw DomainError("closed-form bound needs n >= 1");
    const double nd = static_cast<double>(n);
    const double log_first =
        c.log_k1 - 0.5 * c.lambda_exp * std::pow(nd, 1.0 - c.sigma);
    const double log_second = c.log_k2 - c.sigma * std::log(nd);
    return logsumexp(log_first, log_second);
}

double expectation_bound_closed(const BoundConstants& c, std::size_t n) {
    return std::exp(log_expectation_bound_closed(c, n));
}

double concentration_tail(const BoundConstants& c, std::uint64_t n0,
                          std::uint64_t n_prime, std::uint64_t n, double radius) {
    if (n0 < 1 || n_prime < n0 || n < n_prime)
        throw DomainError("concentration_tail: need 1 <= n0 <= n' <= n");
    if (!(radius > 0.0)) throw DomainError("concentration_tail: radius must be positive");
    const double lambda = c.lambda_hp;
    if (lambda == 0.5)
        throw DomainError("concentration_tail: branch undefined at lambda = 1/2");
    const double d = static_cast<double>(c.dim);
    const double denom = 2.0 * d * d * d * c.c_m2 * c.c_m2 * c.r_wc(n0) * c.r_wc(n0);
    double log_p;
    if (lambda > 0.5) {
        log_p = std::log(2.0 * d * d) -
                static_cast<double>(n + 1) * radius * radius / denom;
    } else {
        const double np1 = static_cast<double>(n_prime + 1);
        const double n1 = static_cast<double>(n + 1);
        log_p = std::log(2.0 * d * d) -
                std::pow(np1, 1.0 - 2.0 * lambda) * std::pow(n1, 2.0 * lambda) *
                    radius * radius / denom;
    }
    return std::min(1.0, std::exp(log_p));
}

EventBounds event_probability_bounds(const BoundConstants& c, std::uint64_t n0,
                                     std::uint64_t nc, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("event bounds: epsilon must be positive");
    const double lambda = c.lambda_hp;
    if (lambda == 0.5) throw DomainError("event bounds: branch undefined at lambda = 1/2");
    const double d = static_cast<double>(c.dim);
    const double d3c = d * d * d * c.c_m2 * c.c_m2;

    EventBounds out;
    out.r_wc = c.r_wc(n0);
    const double drift_scale = 6.0 * c.k_lambda * c.a_norm * (c.a_norm + 2.0 * c.k_m);
    out.n0_threshold = std::max(drift_scale / lambda, std::pow(2.0, 1.0 / lambda));
    const double eps_eff = std::min(epsilon, out.r_wc);
    out.nc_threshold_outer =
        (1.0 + drift_scale / (lambda * eps_eff)) * out.r_wc;
    out.nc_threshold_inner =
        (1.0 + drift_scale * c.c_star * c.r0 / (lambda * eps_eff)) *
        static_cast<double>(n0 + 1);
    out.nc_forms_disagree =
        std::abs(out.nc_threshold_outer - out.nc_threshold_inner) >
        1e-12 * std::max(out.nc_threshold_outer, out.nc_threshold_inner);

    if (static_cast<double>(n0) < out.n0_threshold)
        out.failed.push_back("n0 below max{6 K_lambda ||A|| (||A|| + 2 K_m)/lambda, "
                             "2^(1/lambda)} = " + std::to_string(out.n0_threshold));
    if (static_cast<double>(nc) < out.nc_threshold_inner)
        out.failed.push_back("nc below the discretization threshold " +
                             std::to_string(out.nc_threshold_inner));
    out.applicable = out.failed.empty();

    const double n0d = static_cast<double>(n0);
    const double ncd = static_cast<double>(nc);
    if (lambda > 0.5) {
        out.log_p_mid = std::log(16.0 * std::pow(d, 5) * c.c_m2 * c.c_m2) -
                        n0d / (8.0 * d3c);
        const double ratio = out.r_wc / epsilon;
        out.log_p_after = std::log(36.0 * std::pow(d, 5) * c.c_m2 * c.c_m2) +
                          2.0 * std::log(ratio) -
                          std::pow(6.0 * c.k_lambda, 1.0 / lambda) / (18.0 * d3c) *
                              (ncd + 1.0) * std::pow(1.0 / ratio, 2.0 - 1.0 / lambda);
    } else {
        out.log_p_mid = std::log(2.0 * d * d) +
                        std::log(8.0 * d3c / lambda) / (2.0 * lambda) -
                        n0d / (64.0 * d3c) -
                        (1.0 - 2.0 * lambda) / (2.0 * lambda) * std::log(n0d + 1.0);
        out.log_p_after = std::log(2.0 * d * d) +
                          std::log(18.0 * d3c * out.r_wc * out.r_wc /
                                   (epsilon * epsilon * lambda)) /
                              (2.0 * lambda) -
                          c.k_lambda * c.k_lambda / (4.0 * d3c) * (ncd + 1.0);
    }
    out.p_mid = std::min(1.0, std::exp(out.log_p_mid));
    out.p_after = std::min(1.0, std::exp(out.log_p_after));
    return out;
}

SampleComplexity sample_complexity(const BoundConstants& c, double epsilon,
                                   double delta) {
    if (!(epsilon > 0.0)) throw DomainError("sample_complexity: epsilon must be positive");
    if (!(delta > 0.0) || !(delta < 1.0))
        throw DomainError("sample_complexity: delta must lie in (0, 1)");
    const double lambda = c.lambda_hp;
    if (lambda == 0.5)
        throw DomainError("sample_complexity: branch undefined at lambda = 1/2");
    const double d = static_cast<double>(c.dim);
    const double d3c = d * d * d * c.c_m2 * c.c_m2;
    const double d5c = std::pow(d, 5) * c.c_m2 * c.c_m2;
    const double drift_scale = 6.0 * c.k_lambda * c.a_norm * (c.a_norm + 2.0 * c.k_m);

    SampleComplexity out;
    out.epsilon = epsilon;
    out.delta = delta;
    out.lambda_above_half = lambda > 0.5;

    double n0;
    if (out.lambda_above_half) {
        n0 = std::max({drift_scale / lambda, std::pow(2.0, 1.0 / lambda),
                       8.0 * d3c * std::log(32.0 * d5c / delta)});
    } else {
        n0 = std::max({drift_scale / lambda, std::pow(2.0, 1.0 / lambda),
                       64.0 * d3c / (2.0 * lambda) *
                           std::log(32.0 * d5c / (delta * lambda))});
    }
    n0 = std::ceil(n0);
    out.n0 = n0;

    const double r_wc = (n0 + 1.0) * c.c_star * c.r0;
    const double eps_eff = std::min(epsilon, r_wc);
    double nc;
    if (out.lambda_above_half) {
        const double ratio = r_wc / epsilon;
        nc = std::max((1.0 + drift_scale / (lambda * eps_eff)) * r_wc,
                      18.0 * d3c / std::pow(6.0 * c.k_lambda, 1.0 / lambda) *
                          std::pow(ratio, 2.0 - 1.0 / lambda) *
                          std::log(72.0 * d5c * ratio * ratio / delta));
    } else {
        nc = std::max((1.0 + drift_scale / (lambda * eps_eff)) * r_wc,
                      4.0 * d3c / (2.0 * lambda * c.k_lambda * c.k_lambda) *
                          std::log(72.0 * d5c * r_wc * r_wc /
                                   (lambda * delta * epsilon * epsilon)));
    }
    nc = std::ceil(nc);
    out.nc = nc;

    const double growth = 6.0 * c.k_lambda * r_wc / epsilon;
    const double n1_raw = (nc + 1.0) * std::pow(growth, 1.0 / lambda) - n0;
    out.n1 = std::isfinite(n1_raw) ? std::ceil(n1_raw) : n1_raw;
    out.n_total = n0 + out.n1;
    out.log10_n1 = std::isfinite(out.n1) && out.n1 > 0.0
                       ? std::log10(out.n1)
                       : std::log10(nc + 1.0) + std::log10(growth) / lambda;
    out.log10_n_total = std::isfinite(out.n_total)
                            ? std::log10(out.n_total)
                            : out.log10_n1;
    out.astronomically_large = !(out.n_total <= 9007199254740992.0);
    return out;
}

} // namespace td0
