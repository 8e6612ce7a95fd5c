#include "td0/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace td0 {

namespace {

std::size_t pick_index(const double* w, std::size_t n, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        acc += w[i];
        if (u < acc) return i;
    }
    return n - 1;
}

constexpr double kDivergenceLimit = 1e12;

} // namespace

Vec td0_step(const Vec& theta, const Sample& sample, double gamma, double alpha) {
    const double delta = sample.reward + gamma * dot(sample.phi_next, theta) -
                         dot(sample.phi, theta);
    Vec out = theta;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += alpha * delta * sample.phi[k];
    return out;
}

Vec extract_noise(const Sample& sample, const Vec& theta, const LinearSystem& system) {
    if (!system.gamma)
        throw ContractError("extract_noise: system carries no discount factor");
    const double gamma = *system.gamma;
    const double delta = sample.reward + gamma * dot(sample.phi_next, theta) -
                         dot(sample.phi, theta);
    const Vec drift = system.b - system.a * theta;
    Vec m(theta.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = delta * sample.phi[k] - drift[k];
    return m;
}

TrajectoryRecord run_trajectory(const Problem& problem, const StepsizeTable& table,
                                std::uint64_t seed, const RecordOptions& options) {
    const LinearSystem& sys = problem.system;
    const std::size_t d = sys.dim();
    const std::size_t n_max = table.alphas.size();
    if (problem.theta0.size() != d)
        throw DimensionError("run_trajectory: theta0 dimension mismatch");

    const NoiseModel& noise = problem.noise;
    const bool sampling = noise.kind == NoiseModel::Kind::MdpSampling;
    if (sampling) {
        if (!problem.mdp || !problem.nu)
            throw ContractError("run_trajectory: MdpSampling noise needs the mdp and nu");
        if (problem.mdp->dim() != d)
            throw DimensionError("run_trajectory: feature dimension mismatch");
        if (!sys.gamma)
            throw ContractError("run_trajectory: sampled runs need the system discount");
    }
    if (noise.kind == NoiseModel::Kind::BernoulliRankOne) {
        if (noise.direction.size() != d || noise.reference.size() != d ||
            noise.coordinate >= d)
            throw ContractError("run_trajectory: malformed Bernoulli noise model");
    }

    const bool want_noise = options.noise_vectors || options.noise_norms;

    TrajectoryRecord rec;
    rec.seed = seed;
    rec.sigma = table.sigma;
    rec.n_max = n_max;
    rec.dim = d;
    rec.full = options.full;
    if (options.full) {
        rec.checkpoints.resize(n_max + 1);
        for (std::size_t i = 0; i <= n_max; ++i) rec.checkpoints[i] = i;
    } else {
        rec.checkpoints = options.checkpoints;
        for (std::size_t i = 0; i < rec.checkpoints.size(); ++i) {
            if (rec.checkpoints[i] > n_max)
                throw ContractError("run_trajectory: checkpoint beyond n_max");
            if (i > 0 && rec.checkpoints[i] <= rec.checkpoints[i - 1])
                throw ContractError("run_trajectory: checkpoints must be strictly ascending");
        }
    }
    rec.thetas.reserve(rec.checkpoints.size());
    rec.times.reserve(rec.checkpoints.size());
    if (options.noise_norms) rec.noise_norms.resize(n_max);
    if (options.noise_vectors) rec.noise_vectors.resize(n_max);
    if (options.error_norms) rec.error_norms.resize(n_max + 1);

    const Vec* ref = nullptr;
    if (options.error_norms) ref = &sys.reference_point();

    Rng rng(seed);
    Vec theta = problem.theta0;
    Vec noise_vec(d, 0.0);
    Vec drift(d, 0.0);
    std::size_t next_cp = 0;

    const double gamma = sys.gamma ? *sys.gamma : 0.0;
    const double* feat = sampling ? problem.mdp->features.data() : nullptr;
    const double* trans = sampling ? problem.mdp->transition.data() : nullptr;
    const std::size_t ns = sampling ? problem.mdp->n_states : 0;

    auto record_index = [&](std::size_t n) {
        if (options.error_norms) rec.error_norms[n] = norm2(theta - *ref);
        if (next_cp < rec.checkpoints.size() && rec.checkpoints[next_cp] == n) {
            rec.thetas.push_back(theta);
            rec.times.push_back(table.times[n]);
            ++next_cp;
        }
    };

    record_index(0);
    for (std::size_t n = 0; n < n_max; ++n) {
        const double alpha = table.alphas[n];
        switch (noise.kind) {
            case NoiseModel::Kind::None: {
                drift = sys.b - sys.a * theta;
                for (std::size_t k = 0; k < d; ++k) theta[k] += alpha * drift[k];
                if (want_noise) std::fill(noise_vec.begin(), noise_vec.end(), 0.0);
                break;
            }
            case NoiseModel::Kind::MdpSampling: {
                const std::size_t s = pick_index(problem.nu->nu.data(), ns, rng.next_uniform());
                const std::size_t s2 = pick_index(trans + s * ns, ns, rng.next_uniform());
                const double* phi = feat + s * d;
                const double* phi2 = feat + s2 * d;
                double vphi = 0.0, vphi2 = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    vphi += phi[k] * theta[k];
                    vphi2 += phi2[k] * theta[k];
                }
                const double delta = problem.mdp->reward(s, s2) + gamma * vphi2 - vphi;
                if (want_noise) {
                    drift = sys.b - sys.a * theta;
                    for (std::size_t k = 0; k < d; ++k)
                        noise_vec[k] = delta * phi[k] - drift[k];
                }
                for (std::size_t k = 0; k < d; ++k) theta[k] += alpha * delta * phi[k];
                break;
            }
            case NoiseModel::Kind::BernoulliRankOne: {
                const double z = rng.next_sign();
                const double scale =
                    z * (theta[noise.coordinate] - noise.reference[noise.coordinate]);
                drift = sys.b - sys.a * theta;
                for (std::size_t k = 0; k < d; ++k) {
                    noise_vec[k] = scale * noise.direction[k];
                    theta[k] += alpha * (drift[k] + noise_vec[k]);
                }
                break;
            }
        }
        for (std::size_t k = 0; k < d; ++k)
            if (!(std::abs(theta[k]) <= kDivergenceLimit))
                throw DivergenceError(n + 1);
        if (options.noise_norms) rec.noise_norms[n] = norm2(noise_vec);
        if (options.noise_vectors) rec.noise_vectors[n] = noise_vec;
        record_index(n + 1);
    }
    return rec;
}

TrajectoryRecord run_trajectory(const Problem& problem, const StepsizeSchedule& schedule,
                                std::size_t n_max, std::uint64_t seed,
                                const RecordOptions& options) {
    return run_trajectory(problem, StepsizeTable(schedule, n_max), seed, options);
}

Vec interpolate(const TrajectoryRecord& record, double tau) {
    if (record.times.empty()) throw ContractError("interpolate: empty record");
    if (tau < record.times.front() || tau > record.times.back())
        throw DomainError("interpolate: tau outside the recorded time range");
    const auto it = std::lower_bound(record.times.begin(), record.times.end(), tau);
    const std::size_t hi = static_cast<std::size_t>(it - record.times.begin());
    if (hi < record.times.size() && record.times[hi] == tau) return record.thetas[hi];
    const std::size_t lo = hi - 1;
    if (record.checkpoints[hi] != record.checkpoints[lo] + 1)
        throw ContractError("interpolate: bracketing checkpoints are not adjacent steps");
    const double w = (tau - record.times[lo]) / (record.times[hi] - record.times[lo]);
    Vec out(record.dim);
    for (std::size_t k = 0; k < record.dim; ++k)
        out[k] = record.thetas[lo][k] + w * (record.thetas[hi][k] - record.thetas[lo][k]);
    return out;
}

Vec ode_solution(const LinearSystem& system, double t, double s, const Vec& u0,
                 const Vec& theta_ref) {
    if (t < s) throw DomainError("ode_solution: t must not precede s");
    const std::size_t d = system.dim();
    if (u0.size() != d || theta_ref.size() != d)
        throw DimensionError("ode_solution: dimension mismatch");
    const Vec residual = system.a * theta_ref - system.b;
    if (norm2(residual) > 1e-10 * (1.0 + norm2(system.b)))
        throw ContractError("ode_solution: reference does not solve A ref = b");
    const Matrix flow = matrix_exponential(-1.0 * system.a, t - s);
    const Vec shift = flow * (u0 - theta_ref);
    return theta_ref + shift;
}

namespace {

// Gauss-Legendre nodes/weights, order 8 on [-1, 1].
constexpr double kGlNode[8] = {
    -0.9602898564975362316835609, -0.7966664774136267395915539,
    -0.5255324099163289858177390, -0.1834346424956498049394761,
    0.1834346424956498049394761,  0.5255324099163289858177390,
    0.7966664774136267395915539,  0.9602898564975362316835609};
constexpr double kGlWeight[8] = {
    0.1012285362903762591525314, 0.2223810344533744705443560,
    0.3137066458778872873379622, 0.3626837833783619829651504,
    0.3626837833783619829651504, 0.3137066458778872873379622,
    0.2223810344533744705443560, 0.1012285362903762591525314};

} // namespace

ErrorDecomposition decompose_error(const TrajectoryRecord& record,
                                   const LinearSystem& system,
                                   std::size_t l1, std::size_t l2) {
    if (!record.full)
        throw ContractError("decompose_error: needs a full trajectory record");
    if (record.noise_vectors.size() != record.n_max)
        throw ContractError("decompose_error: needs recorded noise vectors");
    if (l1 > l2 || l2 > record.n_max)
        throw ContractError("decompose_error: need l1 <= l2 <= n_max");
    const std::size_t d = record.dim;
    if (system.dim() != d) throw DimensionError("decompose_error: dimension mismatch");
    const Vec& ref = system.reference_point();
    const Matrix neg_a = -1.0 * system.a;

    ErrorDecomposition out;
    out.lhs = record.thetas[l2] - ref;
    out.ode_term =
        ode_solution(system, record.times[l2], record.times[l1], record.thetas[l1], ref) - ref;
    out.discretization = Vec(d, 0.0);
    out.martingale = Vec(d, 0.0);

    Matrix flow = Matrix::identity(d); // exp(-A (t_{l2} - t_{k+1})) for current k
    std::size_t since_scratch = 0;
    for (std::size_t k = l2; k-- > l1;) {
        const double t_k = record.times[k];
        const double t_k1 = record.times[k + 1];
        const double alpha_k = t_k1 - t_k;
        const Vec dtheta = record.thetas[k + 1] - record.thetas[k];
        const Vec a_dtheta = system.a * dtheta;

        Matrix weighted_flow(d, d); // sum_j w_j exp(-A (t_{l2} - tau_j))
        for (int j = 0; j < 8; ++j) {
            const double offset = 0.5 * alpha_k * (1.0 - kGlNode[j]); // t_{k+1} - tau_j
            const double frac = 1.0 - offset / alpha_k;               // (tau_j - t_k)/alpha_k
            const double w = 0.5 * alpha_k * kGlWeight[j];
            const Matrix g = flow * matrix_exponential(neg_a, offset);
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c) weighted_flow(r, c) += w * g(r, c);
            const Vec gv = g * a_dtheta;
            for (std::size_t r = 0; r < d; ++r) out.discretization[r] += w * frac * gv[r];
        }
        const Vec em = weighted_flow * record.noise_vectors[k];
        for (std::size_t r = 0; r < d; ++r) out.martingale[r] += em[r];

        if (k > l1) {
            ++since_scratch;
            if (since_scratch >= 64) {
                flow = matrix_exponential(neg_a, record.times[l2] - t_k);
                since_scratch = 0;
            } else {
                flow = flow * matrix_exponential(neg_a, alpha_k);
            }
        }
    }

    out.residual = Vec(d);
    for (std::size_t r = 0; r < d; ++r)
        out.residual[r] =
            out.lhs[r] - out.ode_term[r] - out.discretization[r] - out.martingale[r];
    return out;
}

} // namespace td0
