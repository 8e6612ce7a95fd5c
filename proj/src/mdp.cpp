#include "td0/mdp.hpp"

#include <cmath>
#include <string>

namespace td0 {

void MdpSpec::validate() const {
    if (n_states == 0) throw DomainError("mdp: needs at least one state");
    if (transition.rows() != n_states || transition.cols() != n_states)
        throw DimensionError("mdp: transition matrix must be n_states x n_states");
    if (reward.rows() != n_states || reward.cols() != n_states)
        throw DimensionError("mdp: reward matrix must be n_states x n_states");
    if (features.rows() != n_states || features.cols() == 0)
        throw DimensionError("mdp: features must be n_states x dim with dim >= 1");
    if (!(gamma >= 0.0) || gamma >= 1.0)
        throw DomainError("mdp: gamma must lie in [0, 1)");
    for (std::size_t i = 0; i < n_states; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n_states; ++j) {
            const double p = transition(i, j);
            if (p < 0.0 || p > 1.0)
                throw DomainError("mdp: transition probability outside [0, 1] in row " +
                                  std::to_string(i));
            row_sum += p;
        }
        if (std::abs(row_sum - 1.0) > 1e-12)
            throw DomainError("mdp: transition row " + std::to_string(i) +
                              " sums to " + std::to_string(row_sum));
    }
}

std::vector<BoundednessViolation> check_boundedness(const MdpSpec& spec) {
    std::vector<BoundednessViolation> out;
    for (std::size_t s = 0; s < spec.n_states; ++s) {
        const double n = norm2(spec.features.row(s));
        if (n > 0.5) out.push_back({"feature_norm", s, 0, n});
    }
    for (std::size_t s = 0; s < spec.n_states; ++s)
        for (std::size_t s2 = 0; s2 < spec.n_states; ++s2) {
            const double r = spec.reward(s, s2);
            if (std::abs(r) > 1.0) out.push_back({"reward_magnitude", s, s2, r});
        }
    return out;
}

StationaryDistribution stationary_distribution(const MdpSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n_states;
    // (P^T - I) nu = 0 with the last equation replaced by sum(nu) = 1.
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m(i, j) = spec.transition(j, i) - (i == j ? 1.0 : 0.0);
    Vec rhs(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) m(n - 1, j) = 1.0;
    rhs[n - 1] = 1.0;

    Vec nu;
    try {
        nu = solve_linear(m, rhs);
    } catch (const SingularMatrixError&) {
        throw ErgodicityError("stationary distribution: chain is not uniquely ergodic");
    }
    for (double p : nu)
        if (p <= 1e-12)
            throw ErgodicityError("stationary distribution: state weight at or below 1e-12");
    return {nu};
}

const Vec& LinearSystem::reference_point() const {
    if (theta_star) return *theta_star;
    if (theta_ref) return *theta_ref;
    throw ContractError("linear system: no fixed point and no reference supplied");
}

LinearSystem compute_system(const MdpSpec& spec, const StationaryDistribution& nu) {
    spec.validate();
    const std::size_t ns = spec.n_states;
    const std::size_t d = spec.dim();
    if (nu.nu.size() != ns) throw DimensionError("compute_system: nu size mismatch");

    LinearSystem sys;
    sys.origin = LinearSystem::Origin::MdpDerived;
    sys.gamma = spec.gamma;
    sys.a = Matrix(d, d);
    sys.b = Vec(d, 0.0);

    for (std::size_t s = 0; s < ns; ++s) {
        const Vec phi = spec.features.row(s);
        // E[phi' | s] and E[r | s] in one pass over successors.
        Vec ephi(d, 0.0);
        double er = 0.0;
        for (std::size_t s2 = 0; s2 < ns; ++s2) {
            const double p = spec.transition(s, s2);
            if (p == 0.0) continue;
            er += p * spec.reward(s, s2);
            for (std::size_t k = 0; k < d; ++k) ephi[k] += p * spec.features(s2, k);
        }
        const double w = nu.nu[s];
        for (std::size_t i = 0; i < d; ++i) {
            sys.b[i] += w * er * phi[i];
            for (std::size_t j = 0; j < d; ++j)
                sys.a(i, j) += w * phi[i] * (phi[j] - spec.gamma * ephi[j]);
        }
    }

    sys.spectral = spectral_summary(sys.a);
    if (!(sys.spectral.sym_min_eig > 0.0))
        throw InapplicabilityError(
            "compute_system: A + A^T is not positive definite "
            "(features are likely rank deficient)");
    sys.theta_star = solve_linear(sys.a, sys.b);
    return sys;
}

LinearSystem make_raw_system(Matrix a, Vec b, std::optional<Vec> theta_ref,
                             std::optional<double> gamma) {
    if (!a.square()) throw DimensionError("raw system: A must be square");
    if (a.rows() != b.size()) throw DimensionError("raw system: b dimension mismatch");
    if (theta_ref && theta_ref->size() != b.size())
        throw DimensionError("raw system: theta_ref dimension mismatch");

    LinearSystem sys;
    sys.origin = LinearSystem::Origin::Raw;
    sys.gamma = gamma;
    sys.theta_ref = std::move(theta_ref);
    sys.a = std::move(a);
    sys.b = std::move(b);
    sys.spectral = spectral_summary(sys.a);
    try {
        sys.theta_star = solve_linear(sys.a, sys.b);
    } catch (const SingularMatrixError&) {
        sys.singular = true;
    }
    return sys;
}

Sample draw_sample(const MdpSpec& spec, const StationaryDistribution& nu, Rng& rng) {
    const std::size_t ns = spec.n_states;
    const double u1 = rng.next_uniform();
    std::size_t s = ns - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
        acc += nu.nu[i];
        if (u1 < acc) {
            s = i;
            break;
        }
    }
    const double u2 = rng.next_uniform();
    std::size_t s2 = ns - 1;
    acc = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
        acc += spec.transition(s, j);
        if (u2 < acc) {
            s2 = j;
            break;
        }
    }
    return {spec.features.row(s), spec.features.row(s2), spec.reward(s, s2)};
}

} // namespace td0
