#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "assembly.hpp"
#include "bdf.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "semidiscrete.hpp"
#include "timesim.hpp"

namespace latticewave {

// lhs_scale * c [D_{k,M} Phi] = tau sum alpha_m [Phi(.+m) + Phi(.-m) - 2 Phi] + G(Phi; r) on p^{-1}Z in [-L, L].
struct FullyDiscreteProblem {
    ReactionModel model;
    InteractionKernel kernel;
    BdfScheme scheme;
    RationalCoupling coupling;
    double dt = 1.0;
    double lhs_scale = 1.0;
    long L = 80;
    Extension extension = Extension::Neumann;

    // c dt M = 1
    double c() const { return double(coupling.q) / (double(coupling.p) * dt); }
};

struct FullyDiscreteWave {
    RationalCoupling coupling;
    int k = 1;
    double dt = 1.0;
    double c = 0.0;
    double r = 0.0;
    WaveProfile profile;
    double residual = std::numeric_limits<double>::infinity();
    double front_amplitude = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct FullyDiscreteOptions {
    double tol = 1e-10;
    int max_iter = 50;
    double amplitude_threshold = 0.5;
};

inline double front_amplitude(const WaveProfile& w, int component = 0) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (long j = w.lo(); j <= w.hi(); ++j) {
        lo = std::min(lo, w.at(j, component));
        hi = std::max(hi, w.at(j, component));
    }
    return hi - lo;
}

inline WaveProfile blank_profile(const FullyDiscreteProblem& pr) {
    WaveProfile w(pr.coupling.p, pr.L, pr.model.d, pr.extension);
    w.q = pr.coupling.q;
    w.P_minus = pr.model.P_minus;
    w.P_plus = pr.model.P_plus;
    return w;
}

inline void require_problem_grid(const FullyDiscreteProblem& pr, const WaveProfile& w) {
    if (w.p != pr.coupling.p || w.L != pr.L || w.d != pr.model.d)
        throw std::invalid_argument("profile grid does not match the problem (spacing 1/p, window, dimension)");
}

inline WaveProfile fully_discrete_residual(const FullyDiscreteProblem& pr, double r, const WaveProfile& U) {
    require_problem_grid(pr, U);
    const long off = step_offset(U, pr.coupling);
    const auto mu = pr.scheme.mu_double();
    const double a = pr.lhs_scale * pr.c() * pr.coupling.M() / pr.scheme.beta_double();
    const int k = pr.scheme.k;
    WaveProfile F = U.zeros_like();
    std::vector<double> g(static_cast<std::size_t>(U.d));
    for (long j = U.lo(); j <= U.hi(); ++j) {
        pr.model.G(&U.values[std::size_t(U.flat(j, 0))], r, g.data());
        for (int i = 0; i < U.d; ++i) {
            double dd = 0.0;
            for (int n = 0; n <= k; ++n) dd += mu[std::size_t(n)] * U.value(j - (k - n) * off, i);
            F.at(j, i) = a * dd - laplacian_at(pr.kernel, U, j, i) - g[std::size_t(i)];
        }
    }
    return F;
}

inline SpMat fully_discrete_jacobian(const FullyDiscreteProblem& pr, double r, const WaveProfile& U) {
    const long off = step_offset(U, pr.coupling);
    const auto mu = pr.scheme.mu_double();
    const double a = pr.lhs_scale * pr.c() * pr.coupling.M() / pr.scheme.beta_double();
    const int k = pr.scheme.k;
    const long n = U.size() * U.d;
    Triplets T;
    T.reserve(std::size_t(n) * std::size_t(k + 2 + 2 * pr.kernel.m_max + U.d));
    std::vector<double> scratch;
    for (long j = U.lo(); j <= U.hi(); ++j) {
        for (int i = 0; i < U.d; ++i) {
            const long row = U.flat(j, i);
            for (int m = 0; m <= k; ++m) add_tap(T, row, U, j - (k - m) * off, i, a * mu[std::size_t(m)]);
            add_neg_laplacian(T, row, pr.kernel, U, j, i);
        }
        add_neg_reaction_jacobian(T, pr.model, r, U, j, scratch);
    }
    SpMat J(n, n);
    J.setFromTriplets(T.begin(), T.end());
    return J;
}

inline FullyDiscreteWave make_wave_record(const FullyDiscreteProblem& pr, double r, const WaveProfile& U) {
    FullyDiscreteWave w;
    w.coupling = pr.coupling;
    w.k = pr.scheme.k;
    w.dt = pr.dt;
    w.c = pr.c();
    w.r = r;
    w.profile = U;
    return w;
}

// Undamped Newton at fixed (c, r).
inline FullyDiscreteWave solve_fully_discrete_wave(const FullyDiscreteProblem& pr, double r, const WaveProfile& seed,
                                                   const FullyDiscreteOptions& opt = {}) {
    require_problem_grid(pr, seed);
    WaveProfile U = seed;
    U.extension = pr.extension;
    U.P_minus = pr.model.P_minus;
    U.P_plus = pr.model.P_plus;
    FullyDiscreteWave w = make_wave_record(pr, r, U);
    for (int it = 0; it <= opt.max_iter; ++it) {
        const WaveProfile F = fully_discrete_residual(pr, r, U);
        const double res = sup_norm(F);
        w.iterations = it;
        w.residual = res;
        if (!std::isfinite(res)) break;
        if (res < opt.tol) {
            w.converged = true;
            break;
        }
        if (it == opt.max_iter) break;
        Eigen::VectorXd dx;
        try {
            SparseSolver S(fully_discrete_jacobian(pr, r, U));
            dx = S.solve(-to_vector(F));
        } catch (const std::exception&) {
            break;
        }
        if (!dx.allFinite()) break;
        for (long q = 0; q < dx.size(); ++q) U.values[std::size_t(q)] += dx(q);
    }
    w.profile = U;
    w.front_amplitude = front_amplitude(U);
    // the zero solution is a fixed point too; treat it as a failure
    if (w.converged && !(w.front_amplitude > opt.amplitude_threshold)) w.converged = false;
    return w;
}

// Central differences of the first component, one-sided at the ends.
inline Eigen::VectorXd phase_direction(const WaveProfile& ref) {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(Eigen::Index(ref.values.size()));
    for (long j = ref.lo(); j <= ref.hi(); ++j) {
        double g;
        if (j == ref.lo()) g = ref.at(j + 1, 0) - ref.at(j, 0);
        else if (j == ref.hi()) g = ref.at(j, 0) - ref.at(j - 1, 0);
        else g = 0.5 * (ref.at(j + 1, 0) - ref.at(j - 1, 0));
        t(ref.flat(j, 0)) = g;
    }
    return t;
}

// Newton in (Phi, r) at fixed c with the phase condition <t, Phi - ref> = 0, t the slope of ref.
inline FullyDiscreteWave solve_free_detuning(const FullyDiscreteProblem& pr, double r0, const WaveProfile& seed,
                                             const WaveProfile& ref, const FullyDiscreteOptions& opt = {}) {
    require_problem_grid(pr, seed);
    require_problem_grid(pr, ref);
    WaveProfile U = seed;
    U.extension = pr.extension;
    U.P_minus = pr.model.P_minus;
    U.P_plus = pr.model.P_plus;
    const Eigen::VectorXd t = phase_direction(ref), x0 = to_vector(ref);
    const long n = U.size() * U.d;
    double r = r0;
    FullyDiscreteWave w = make_wave_record(pr, r, U);
    std::vector<double> dr(static_cast<std::size_t>(U.d));
    for (int it = 0; it <= opt.max_iter; ++it) {
        const WaveProfile F = fully_discrete_residual(pr, r, U);
        const double ph = t.dot(to_vector(U) - x0);
        const double res = std::max(sup_norm(F), std::abs(ph));
        w.iterations = it;
        w.residual = res;
        if (!std::isfinite(res)) break;
        if (res < opt.tol) {
            w.converged = true;
            break;
        }
        if (it == opt.max_iter) break;
        Triplets T;
        append_matrix(T, fully_discrete_jacobian(pr, r, U));
        for (long j = U.lo(); j <= U.hi(); ++j) {
            pr.model.eval_dr(&U.values[std::size_t(U.flat(j, 0))], r, dr.data());
            for (int i = 0; i < U.d; ++i)
                if (dr[std::size_t(i)] != 0.0) T.emplace_back(int(U.flat(j, i)), int(n), -dr[std::size_t(i)]);
        }
        for (long q = 0; q < n; ++q)
            if (t(q) != 0.0) T.emplace_back(int(n), int(q), t(q));
        SpMat B(n + 1, n + 1);
        B.setFromTriplets(T.begin(), T.end());
        Eigen::VectorXd rhs(n + 1);
        rhs.head(n) = -to_vector(F);
        rhs(n) = -ph;
        Eigen::VectorXd dx;
        try {
            SparseSolver S(B);
            dx = S.solve(rhs);
        } catch (const std::exception&) {
            break;
        }
        if (!dx.allFinite()) break;
        for (long q = 0; q < n; ++q) U.values[std::size_t(q)] += dx(q);
        r += dx(n);
    }
    w.r = r;
    w.profile = U;
    w.front_amplitude = front_amplitude(U);
    if (w.converged && !(w.front_amplitude > opt.amplitude_threshold)) w.converged = false;
    return w;
}

struct PulseSeedOptions {
    long sites = 200;      // simulation lattice [-sites, sites]
    long hot_sites = 29;   // u raised on the rightmost sites
    double dt = 1.25;
    long steps = 150;
    double lhs_scale = 1.0;
    double level = 0.5;
};

// Lattice pulse from a backward-Euler run of the LDE with a raised block at the right end.
inline WaveProfile simulate_pulse(const ReactionModel& model, const InteractionKernel& kernel, double r,
                                  const PulseSeedOptions& o = {}) {
    SimulationState s = make_state(front_initial_state(model, o.sites, o.sites - o.hot_sites), o.dt);
    StepOptions so;
    so.lhs_scale = o.lhs_scale;
    const BdfScheme be = bdf_scheme(1);
    for (long n = 0; n < o.steps; ++n) step(s, model, kernel, be, r, so);
    return s.U;
}

// Sample a lattice pulse onto the problem grid with its leading crossing placed at xi = center.
inline WaveProfile place_pulse(const FullyDiscreteProblem& pr, const WaveProfile& lattice, double center,
                               double level = 0.5) {
    const double pos = front_position(lattice, level, 0);
    if (!std::isfinite(pos)) throw std::runtime_error("simulated pulse has no level crossing");
    WaveProfile w = blank_profile(pr);
    WaveProfile src = lattice;
    src.extension = Extension::Neumann;
    for (long j = w.lo(); j <= w.hi(); ++j)
        for (int i = 0; i < w.d; ++i) w.at(j, i) = interpolate_linear(src, w.xi(j) - center + pos, i);
    return w;
}

struct SemiSeedOptions {
    long p0 = 8;
    long L = 60;
    double center = -25.0;       // leading crossing placed here
    double tail_start = 15.0;    // distance from the right end where the profile is relaxed onto P+
    long speed_steps = 100;      // extra steps used to estimate the lattice speed
    PulseSeedOptions pulse{200, 29, 0.25, 800, 1.0, 0.5};
};

// Semi-discrete wave seeded by a long lattice run. Since the semi-discrete equation carries no time
// scale, the returned c0 is the effective speed lhs_scale * c of the simulated system.
inline SemiDiscreteWave semidiscrete_from_simulation(const ReactionModel& model, const InteractionKernel& kernel,
                                                     double r, const SemiSeedOptions& o = {},
                                                     const NewtonOptions& newton = {}) {
    const WaveProfile a = simulate_pulse(model, kernel, r, o.pulse);
    PulseSeedOptions longer = o.pulse;
    longer.steps += o.speed_steps;
    const WaveProfile b = simulate_pulse(model, kernel, r, longer);
    const double pa = front_position(a, o.pulse.level), pb = front_position(b, o.pulse.level);
    if (!std::isfinite(pa) || !std::isfinite(pb)) throw SolveError("simulated state has no level crossing");
    const double speed = (pb - pa) / (double(o.speed_steps) * o.pulse.dt);

    WaveProfile seed(o.p0, o.L, model.d, Extension::ConstantLimits);
    seed.P_minus = model.P_minus;
    seed.P_plus = model.P_plus;
    WaveProfile src = a;
    src.extension = Extension::Neumann;
    const double cut = double(o.L) - o.tail_start;
    for (long j = seed.lo(); j <= seed.hi(); ++j)
        for (int i = 0; i < model.d; ++i) {
            double v = interpolate_linear(src, seed.xi(j) - o.center + pa, i);
            if (seed.xi(j) > cut) {
                const double pp = model.P_plus[std::size_t(i)];
                v = pp + (v - pp) * std::exp(-(seed.xi(j) - cut));
            }
            seed.at(j, i) = v;
        }
    return solve_semidiscrete_wave(model, kernel, r, seed, -speed * o.pulse.lhs_scale, newton);
}

struct PathPoint {
    double r = 0.0;
    double center = 0.0;
    WaveProfile profile;
};

struct ContinuationOptions {
    double step = 0.5;     // front shift per continuation step
    double margin = 1.0;   // stop this far from the window ends
    FullyDiscreteOptions newton;
};

// Free-detuning solves along a family of front positions. Moving the front toward the Neumann
// ends changes r, so the path sweeps a range of detunings at this fixed c.
inline std::vector<PathPoint> continuation_path(const FullyDiscreteProblem& pr, const WaveProfile& seed,
                                                double r_seed, double center, const ContinuationOptions& o = {}) {
    const FullyDiscreteWave first = solve_free_detuning(pr, r_seed, seed, seed, o.newton);
    if (!first.converged) return {};
    auto walk = [&](double dir) {
        std::vector<PathPoint> out;
        WaveProfile x = first.profile;
        double r = first.r, c = center;
        while (std::abs(c + dir * o.step) < double(pr.L) - o.margin) {
            const WaveProfile shifted = translate(x, -dir * o.step);
            const FullyDiscreteWave y = solve_free_detuning(pr, r, shifted, shifted, o.newton);
            if (!y.converged) break;
            x = y.profile;
            r = y.r;
            c += dir * o.step;
            out.push_back({r, c, x});
        }
        return out;
    };
    std::vector<PathPoint> right = walk(+1.0), left = walk(-1.0);
    std::vector<PathPoint> path(right.rbegin(), right.rend());
    path.push_back({first.r, center, first.profile});
    path.insert(path.end(), left.begin(), left.end());
    return path;
}

// Square solve at r from the interpolant of the first bracketing pair of path points that converges.
inline std::optional<FullyDiscreteWave> solve_from_path(const FullyDiscreteProblem& pr,
                                                        const std::vector<PathPoint>& path, double r,
                                                        const FullyDiscreteOptions& opt = {}) {
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const double ra = path[i].r, rb = path[i + 1].r;
        if (ra == rb || (ra - r) * (rb - r) > 0.0) continue;
        const double s = (r - ra) / (rb - ra);
        WaveProfile seed = path[i].profile;
        for (std::size_t q = 0; q < seed.values.size(); ++q)
            seed.values[q] = (1.0 - s) * path[i].profile.values[q] + s * path[i + 1].profile.values[q];
        FullyDiscreteWave w = solve_fully_discrete_wave(pr, r, seed, opt);
        if (w.converged) return w;
    }
    return std::nullopt;
}

struct SweepRow {
    long p = 0, q = 0;
    double c = 0.0, r = 0.0;
    bool converged = false;
    double residual = std::numeric_limits<double>::quiet_NaN();
    double front_amplitude = std::numeric_limits<double>::quiet_NaN();
    int iters = 0;
    std::string seed;  // provenance: timesim, semidiscrete, continuation, none, out-of-theory
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<FullyDiscreteWave> solutions;  // converged cells, same order as their rows
};

struct SweepConfig {
    ReactionModel model;
    InteractionKernel kernel;
    BdfScheme scheme;
    double dt = 2.0;
    double lhs_scale = 1.0;
    long L = 80;
    std::vector<std::pair<long, long>> cells;  // (p, q) columns in output order
    std::vector<double> r_grid;
    std::vector<std::string> policy{"timesim", "semidiscrete", "continuation"};
    double seed_center = 30.0;
    double continuation_r = 0.15;  // detuning of the simulated pulse that starts each continuation path
    PulseSeedOptions pulse;
    ContinuationOptions continuation;
    FullyDiscreteOptions newton;
    int workers = 1;
    bool keep_solutions = false;
};

// p in [1, p_max], q in [1, q_factor p], gcd(p, q) = 1, ordered by p then q.
inline std::vector<std::pair<long, long>> sweep_cells(long p_max, long q_factor = 2) {
    std::vector<std::pair<long, long>> out;
    for (long p = 1; p <= p_max; ++p)
        for (long q = 1; q <= q_factor * p; ++q)
            if (std::gcd(p, q) == 1) out.emplace_back(p, q);
    return out;
}

inline std::vector<double> percent_grid(int from, int to) {
    std::vector<double> r;
    for (int i = from; i <= to; ++i) r.push_back(double(i) / 100.0);
    return r;
}

// Semi-discrete seeds are supplied per detuning by the caller (empty map skips that policy).
using SemiDiscreteSeeds = std::map<double, WaveProfile>;

inline std::vector<SweepRow> sweep_column(const SweepConfig& cfg, long p, long q,
                                          const std::map<double, WaveProfile>& pulses,
                                          const WaveProfile& continuation_pulse, const SemiDiscreteSeeds& semi,
                                          std::vector<FullyDiscreteWave>* solutions) {
    std::vector<SweepRow> rows;
    const double c = double(q) / (double(p) * cfg.dt);
    if (q > p) {
        for (double r : cfg.r_grid) {
            SweepRow row;
            row.p = p;
            row.q = q;
            row.c = c;
            row.r = r;
            row.seed = "out-of-theory";
            rows.push_back(row);
        }
        return rows;
    }
    FullyDiscreteProblem pr{cfg.model, cfg.kernel, cfg.scheme, make_rational(p, q), cfg.dt, cfg.lhs_scale, cfg.L,
                            Extension::Neumann};
    std::optional<std::vector<PathPoint>> path;
    for (double r : cfg.r_grid) {
        SweepRow row;
        row.p = p;
        row.q = q;
        row.c = c;
        row.r = r;
        row.seed = "none";
        std::optional<FullyDiscreteWave> found;
        FullyDiscreteWave last;
        for (const auto& pol : cfg.policy) {
            if (pol == "timesim") {
                auto it = pulses.find(r);
                if (it == pulses.end()) continue;
                last = solve_fully_discrete_wave(pr, r, place_pulse(pr, it->second, cfg.seed_center), cfg.newton);
            } else if (pol == "semidiscrete") {
                auto it = semi.find(r);
                if (it == semi.end()) continue;
                last = solve_fully_discrete_wave(pr, r, resample(it->second, p, cfg.L), cfg.newton);
            } else if (pol == "continuation") {
                if (!path) {
                    const WaveProfile seed = place_pulse(pr, continuation_pulse, cfg.seed_center);
                    path = continuation_path(pr, seed, cfg.continuation_r, cfg.seed_center, cfg.continuation);
                }
                auto w = solve_from_path(pr, *path, r, cfg.newton);
                if (!w) continue;
                last = *w;
            } else {
                throw std::invalid_argument("unknown seed policy '" + pol + "'");
            }
            if (last.converged) {
                found = last;
                row.seed = pol;
                break;
            }
        }
        if (found) {
            row.converged = true;
            row.residual = found->residual;
            row.front_amplitude = found->front_amplitude;
            row.iters = found->iterations;
            if (solutions) solutions->push_back(*found);
        } else if (std::isfinite(last.residual)) {
            row.residual = last.residual;
            row.front_amplitude = last.front_amplitude;
            row.iters = last.iterations;
        }
        rows.push_back(row);
    }
    return rows;
}

// Columns run independently on a worker pool; rows are merged in column order.
inline SweepResult sweep(const SweepConfig& cfg, const SemiDiscreteSeeds& semi = {}) {
    SweepResult out;
    if (cfg.r_grid.empty() || cfg.cells.empty()) return out;
    const bool want_pulses = std::find(cfg.policy.begin(), cfg.policy.end(), "timesim") != cfg.policy.end();
    std::map<double, WaveProfile> pulses;
    if (want_pulses)
        for (double r : cfg.r_grid) pulses.emplace(r, simulate_pulse(cfg.model, cfg.kernel, r, cfg.pulse));
    const WaveProfile cont = simulate_pulse(cfg.model, cfg.kernel, cfg.continuation_r, cfg.pulse);

    const std::size_t ncol = cfg.cells.size();
    std::vector<std::vector<SweepRow>> rows(ncol);
    std::vector<std::vector<FullyDiscreteWave>> sols(ncol);
    std::vector<std::string> errors(ncol);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < ncol; i = next++) {
            try {
                rows[i] = sweep_column(cfg, cfg.cells[i].first, cfg.cells[i].second, pulses, cont, semi,
                                       cfg.keep_solutions ? &sols[i] : nullptr);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int nw = std::max(1, cfg.workers);
    if (nw == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < ncol; ++i) {
        if (!errors[i].empty()) throw std::runtime_error("sweep column failed: " + errors[i]);
        out.rows.insert(out.rows.end(), rows[i].begin(), rows[i].end());
        out.solutions.insert(out.solutions.end(), sols[i].begin(), sols[i].end());
    }
    return out;
}

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string sweep_to_csv(const SweepResult& s) {
    std::ostringstream os;
    os << "p,q,c,r,converged,residual,front_amplitude,iters,seed\n";
    for (const auto& r : s.rows)
        os << r.p << ',' << r.q << ',' << format_number(r.c) << ',' << format_number(r.r) << ','
           << (r.converged ? 1 : 0) << ',' << format_number(r.residual) << ',' << format_number(r.front_amplitude)
           << ',' << r.iters << ',' << r.seed << '\n';
    return os.str();
}

// Detunings that admit at least `min_speeds` distinct converged wavespeeds.
inline std::map<double, std::vector<double>> multivalued_detunings(const SweepResult& s, std::size_t min_speeds = 2) {
    std::map<double, std::vector<double>> by_r;
    for (const auto& row : s.rows)
        if (row.converged) by_r[row.r].push_back(row.c);
    std::map<double, std::vector<double>> out;
    for (auto& [r, cs] : by_r) {
        std::sort(cs.begin(), cs.end());
        cs.erase(std::unique(cs.begin(), cs.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 cs.end());
        if (cs.size() >= min_speeds) out.emplace(r, cs);
    }
    return out;
}

struct ShiftCheck {
    double discrepancy = std::numeric_limits<double>::infinity();
    double r_difference = 0.0;
    bool resolved = false;
};

// Re-solve from the solution shifted by `steps` grid points (xi -> xi + steps/p) and compare after shifting
// back on points at least `margin` away from the window ends. With free_r the phase is pinned to the
// shifted profile and r is re-solved as well.
inline ShiftCheck check_shift_periodicity(const FullyDiscreteProblem& pr, const FullyDiscreteWave& w,
                                          bool free_r, long steps = 1, double margin = 10.0,
                                          const FullyDiscreteOptions& opt = {}) {
    const WaveProfile& U = w.profile;
    WaveProfile shifted = U;
    for (long j = U.lo(); j <= U.hi(); ++j)
        for (int i = 0; i < U.d; ++i) shifted.at(j, i) = U.value(j + steps, i);
    const FullyDiscreteWave y =
        free_r ? solve_free_detuning(pr, w.r, shifted, shifted, opt) : solve_fully_discrete_wave(pr, w.r, shifted, opt);
    ShiftCheck out;
    out.resolved = y.converged;
    if (!y.converged) return out;
    const long edge = long(std::ceil(margin * double(U.p)));
    double d = 0.0;
    for (long j = U.lo() + edge + std::abs(steps); j <= U.hi() - edge - std::abs(steps); ++j)
        for (int i = 0; i < U.d; ++i) d = std::max(d, std::abs(y.profile.at(j - steps, i) - U.at(j, i)));
    out.discrepancy = d;
    out.r_difference = std::abs(y.r - w.r);
    return out;
}

// Reference wave evaluated at xi + theta on the grid p by cubic interpolation from its fine grid.
inline WaveProfile restrict_shifted(const WaveProfile& fine, long p, long L, double theta, Extension ext) {
    WaveProfile out(p, L, fine.d, ext);
    out.P_minus = fine.P_minus;
    out.P_plus = fine.P_plus;
    for (long j = out.lo(); j <= out.hi(); ++j)
        for (int i = 0; i < fine.d; ++i) out.at(j, i) = interpolate_cubic(fine, out.xi(j) + theta, i);
    return out;
}

// sum over the grid of <Phi0-(xi + theta), U(xi) - U0(xi + theta)>.
inline double normalization_functional(const WaveProfile& U, const SemiDiscreteWave& ref, double theta) {
    if (ref.Phi_minus.values.empty()) throw std::invalid_argument("reference wave carries no adjoint kernel profile");
    double s = 0.0;
    for (long j = U.lo(); j <= U.hi(); ++j)
        for (int i = 0; i < U.d; ++i) {
            const double x = U.xi(j) + theta;
            s += interpolate_cubic(ref.Phi_minus, x, i) * (U.at(j, i) - interpolate_cubic(ref.U0, x, i));
        }
    return s;
}

// Sign-change scan of the normalization functional over theta in [a, b]; returns the first root by bisection.
inline std::optional<double> normalization_root(const WaveProfile& U, const SemiDiscreteWave& ref, double a, double b,
                                                int samples = 64) {
    double x0 = a, f0 = normalization_functional(U, ref, a);
    for (int s = 1; s <= samples; ++s) {
        const double x1 = a + (b - a) * double(s) / double(samples);
        const double f1 = normalization_functional(U, ref, x1);
        if (f0 == 0.0) return x0;
        if (f0 * f1 < 0.0) {
            double lo = x0, hi = x1, flo = f0;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi), fm = normalization_functional(U, ref, mid);
                if (flo * fm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            return 0.5 * (lo + hi);
        }
        x0 = x1;
        f0 = f1;
    }
    return std::nullopt;
}

// p^{-1} sum [ |U - V|^2 + |D U - D V|^2 ] over the window.
inline double uniqueness_metric(const BdfScheme& s, const RationalCoupling& c, const WaveProfile& U,
                                const WaveProfile& V) {
    require_same_grid(U, V);
    const WaveProfile DU = apply_discrete_derivative(s, c, U), DV = apply_discrete_derivative(s, c, V);
    double acc = 0.0;
    for (std::size_t i = 0; i < U.values.size(); ++i) {
        const double a = U.values[i] - V.values[i], b = DU.values[i] - DV.values[i];
        acc += a * a + b * b;
    }
    return acc / double(U.p);
}

inline json fully_discrete_to_json(const FullyDiscreteWave& w) {
    return json{{"p", w.coupling.p},
                {"q", w.coupling.q},
                {"k", w.k},
                {"dt", w.dt},
                {"c", w.c},
                {"r", w.r},
                {"residual", w.residual},
                {"front_amplitude", w.front_amplitude},
                {"iterations", w.iterations},
                {"converged", w.converged}};
}

}  // namespace latticewave
