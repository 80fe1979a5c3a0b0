#pragma once

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "assembly.hpp"
#include "bdf.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace latticewave {

class StepError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Lattice state on sites j in [-L, L] (a WaveProfile with p = 1) plus the BDF history.
struct SimulationState {
    WaveProfile U;
    std::deque<WaveProfile> history;  // oldest first, current state last
    double t = 0.0;
    double dt = 1.0;
    long steps = 0;
};

struct StepOptions {
    double lhs_scale = 1.0;  // multiplies the time difference
    double tol = 1e-11;
    int max_iter = 30;
};

inline SimulationState make_state(const WaveProfile& U0, double dt) {
    if (U0.p != 1) throw std::invalid_argument("simulation state lives on the unit lattice (p = 1)");
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    SimulationState s;
    s.U = U0;
    s.history.push_back(U0);
    s.dt = dt;
    return s;
}

// First component P- everywhere, raised by `amplitude` on sites j > position (u = 1 block at the right end).
inline WaveProfile front_initial_state(const ReactionModel& model, long L, long position,
                                       double amplitude = 1.0, Extension ext = Extension::Neumann) {
    WaveProfile U(1, L, model.d, ext);
    U.P_minus = model.P_minus;
    U.P_plus = model.P_plus;
    for (long j = U.lo(); j <= U.hi(); ++j)
        for (int i = 0; i < model.d; ++i)
            U.at(j, i) = model.P_minus[std::size_t(i)] + (i == 0 && j > position ? amplitude : 0.0);
    return U;
}

// Restriction of a wave profile on the grid p to the unit lattice, shifted so xi = j + offset.
inline WaveProfile lattice_from_profile(const WaveProfile& w, long L, double offset = 0.0,
                                        Extension ext = Extension::Neumann) {
    WaveProfile U(1, L, w.d, ext);
    U.P_minus = w.P_minus;
    U.P_plus = w.P_plus;
    for (long j = U.lo(); j <= U.hi(); ++j)
        for (int i = 0; i < w.d; ++i) U.at(j, i) = interpolate_linear(w, double(j) + offset, i);
    return U;
}

// One BDF step of order min(k, steps + 1); lower orders bootstrap the history.
inline void step(SimulationState& s, const ReactionModel& model, const InteractionKernel& kernel,
                 const BdfScheme& scheme, double r, const StepOptions& opt = {}) {
    const int order = int(std::min<long>(scheme.k, long(s.history.size())));
    const BdfScheme sc = bdf_scheme(order);
    const auto mu = sc.mu_double();
    const double a = opt.lhs_scale / (sc.beta_double() * s.dt);

    // sum of the known history terms: mu_n U^{new-(k-n)} for n < k
    const long N = s.U.size() * s.U.d;
    Eigen::VectorXd hist = Eigen::VectorXd::Zero(N);
    for (int n = 0; n < order; ++n) {
        const WaveProfile& H = s.history[s.history.size() - std::size_t(order - n)];
        hist += mu[std::size_t(n)] * to_vector(H);
    }

    WaveProfile U = s.U;
    std::vector<double> g(static_cast<std::size_t>(U.d)), scratch;
    int it = 0;
    double res = std::numeric_limits<double>::infinity();
    for (; it <= opt.max_iter; ++it) {
        Eigen::VectorXd F(N);
        for (long j = U.lo(); j <= U.hi(); ++j) {
            model.G(&U.values[std::size_t(U.flat(j, 0))], r, g.data());
            for (int i = 0; i < U.d; ++i) {
                const long f = U.flat(j, i);
                F(f) = a * (U.values[std::size_t(f)] + hist(f)) - laplacian_at(kernel, U, j, i) - g[std::size_t(i)];
            }
        }
        res = F.lpNorm<Eigen::Infinity>();
        if (res < opt.tol) break;
        if (it == opt.max_iter || !std::isfinite(res)) break;
        Triplets T;
        for (long j = U.lo(); j <= U.hi(); ++j) {
            for (int i = 0; i < U.d; ++i) {
                const long f = U.flat(j, i);
                T.emplace_back(int(f), int(f), a);
                add_neg_laplacian(T, f, kernel, U, j, i);
            }
            add_neg_reaction_jacobian(T, model, r, U, j, scratch);
        }
        SpMat J(N, N);
        J.setFromTriplets(T.begin(), T.end());
        SparseSolver S(J);
        const Eigen::VectorXd dx = S.solve(-F);
        for (long q = 0; q < N; ++q) U.values[std::size_t(q)] += dx(q);
    }
    if (!(res < opt.tol))
        throw StepError("time step Newton failed at step " + std::to_string(s.steps + 1) + " (residual " +
                        std::to_string(res) + ")");
    s.U = U;
    s.history.push_back(U);
    while (int(s.history.size()) > scheme.k) s.history.pop_front();
    s.t += s.dt;
    ++s.steps;
}

// First up-crossing of `level` scanning from the left, sub-site by linear interpolation.
inline double front_position(const WaveProfile& U, double level = 0.5, int component = 0) {
    for (long j = U.lo() + 1; j <= U.hi(); ++j) {
        const double b = U.at(j, component);
        if (b > level) {
            const double a = U.at(j - 1, component);
            if (a > level) return std::numeric_limits<double>::quiet_NaN();
            return U.xi(j) - (b - level) / (b - a) / double(U.p);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

struct Trajectory {
    std::vector<double> times;
    std::vector<double> positions;
    std::vector<WaveProfile> snapshots;
};

inline Trajectory simulate(SimulationState& s, const ReactionModel& model, const InteractionKernel& kernel,
                           const BdfScheme& scheme, double r, long steps, const StepOptions& opt = {},
                           double level = 0.5, int component = 0, long snapshot_stride = 0) {
    Trajectory tr;
    for (long n = 0; n < steps; ++n) {
        step(s, model, kernel, scheme, r, opt);
        tr.times.push_back(s.t);
        tr.positions.push_back(front_position(s.U, level, component));
        if (snapshot_stride > 0 && (n + 1) % snapshot_stride == 0) tr.snapshots.push_back(s.U);
    }
    return tr;
}

struct WavespeedReport {
    double speed = 0.0;  // d(position)/dt; the profile ansatz Phi(j + c t) has c = -speed
    double fit_residual = 0.0;
    double t_begin = 0.0;
    double t_end = 0.0;
    long samples = 0;
};

// Least-squares slope of position against time over the final half of the record.
inline WavespeedReport measure_wavespeed(const std::vector<double>& times, const std::vector<double>& positions) {
    if (times.size() != positions.size()) throw std::invalid_argument("times and positions differ in length");
    const std::size_t n = times.size(), start = n / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long m = 0;
    for (std::size_t i = start; i < n; ++i) {
        if (!std::isfinite(positions[i]))
            throw std::runtime_error("front left the window or no level crossing at t = " + std::to_string(times[i]));
        sx += times[i];
        sy += positions[i];
        sxx += times[i] * times[i];
        sxy += times[i] * positions[i];
        ++m;
    }
    if (m < 2) throw std::runtime_error("need at least two crossings to fit a speed");
    WavespeedReport rep;
    const double den = double(m) * sxx - sx * sx;
    rep.speed = (double(m) * sxy - sx * sy) / den;
    const double icpt = (sy - rep.speed * sx) / double(m);
    double ss = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        const double e = positions[i] - (icpt + rep.speed * times[i]);
        ss += e * e;
    }
    rep.fit_residual = std::sqrt(ss / double(m));
    rep.t_begin = times[start];
    rep.t_end = times[n - 1];
    rep.samples = m;
    return rep;
}

inline json wavespeed_to_json(const WavespeedReport& w) {
    return json{{"speed", w.speed},
                {"fit_residual", w.fit_residual},
                {"window", {w.t_begin, w.t_end}},
                {"samples", w.samples}};
}

}  // namespace latticewave
