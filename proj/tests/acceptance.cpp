// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "latticewave.hpp"

using namespace latticewave;

namespace {

// Tolerances, pinned.
constexpr double kResidual = 1e-10;
constexpr double kAmplitude = 0.5;
constexpr double kPolyExact = 1e-12;
constexpr double kOrderBand = 0.1;
constexpr double kIdentity = 1e-12;
constexpr double kNegativity = 1e-12;
constexpr double kFormBand = 2.0;
constexpr double kSlopeBand = 0.05;
constexpr double kKernelMatch = 1e-6;
constexpr double kHyperbolic = 1e-8;
constexpr double kProbeFinal = 1e-3;
constexpr double kResolvent = 1e-8;
constexpr double kUnitSolve = 1e-10;
constexpr double kRatioGrowth = 0.25;
constexpr double kSpeedMatch = 0.02;

const std::vector<std::pair<long, long>> kCouplings{{3, 1}, {8, 5}, {7, 3}, {16, 5}};
const std::vector<int> kOrders{1, 2, 6};

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), s);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

ReactionModel fhn() { return fhn_model(0.01, 5.0); }
InteractionKernel fhn_kernel() { return build_nearest_neighbor_kernel(2, 1, 1.0 / (0.625 * 0.625)); }
constexpr double kFhnClock = 1.6;  // 1/h
constexpr double kFhnDt = 2.0;

FullyDiscreteProblem fhn_problem(long p, long q) {
    return {fhn(), fhn_kernel(), bdf_scheme(1), make_rational(p, q), kFhnDt, kFhnClock, 80, Extension::Neumann};
}

// Exact BDF coefficients from the Lagrange basis on nodes 0, -1, ..., -k.
std::pair<std::vector<Rational>, Rational> lagrange_bdf(int k) {
    auto dl = [k](int j) {
        Rational s(0);
        for (int m = 0; m <= k; ++m) {
            if (m == j) continue;
            Rational prod = Rational(1) / Rational(m - j);
            for (int i = 0; i <= k; ++i)
                if (i != j && i != m) prod *= Rational(i) / Rational(i - j);
            s += prod;
        }
        return s;
    };
    std::vector<Rational> mu(std::size_t(k + 1));
    const Rational l0 = dl(0);
    for (int j = 0; j <= k; ++j) mu[std::size_t(k - j)] = dl(j) / l0;
    return {mu, Rational(1) / l0};
}

WaveProfile compact_profile(long p, long L, long margin, int d, std::mt19937_64& rng) {
    WaveProfile w(p, L, d);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (long j = w.lo() + margin; j <= w.hi() - margin; ++j)
        for (int i = 0; i < d; ++i) w.at(j, i) = U(rng);
    return w;
}

struct NagumoSetup {
    ReactionModel model = nagumo_model();
    InteractionKernel kernel = build_nearest_neighbor_kernel(1, 1, 1.0);
    SemiDiscreteWave wide, narrow;

    NagumoSetup() {
        wide = solve_semidiscrete_wave(model, kernel, 0.25, tanh_front(model, 16, 30), 0.0);
        attach_spectrum(wide, model, kernel, false);
        narrow = solve_semidiscrete_wave(model, kernel, 0.25, tanh_front(model, 16, 15), wide.c0);
        attach_spectrum(narrow, model, kernel, false);
    }
};

const NagumoSetup& nagumo() {
    static const NagumoSetup s;
    return s;
}

// ---- criteria ----

Outcome sweep_cell_and_multivalued() {
    SweepConfig cfg;
    cfg.model = fhn();
    cfg.kernel = fhn_kernel();
    cfg.scheme = bdf_scheme(1);
    cfg.dt = kFhnDt;
    cfg.lhs_scale = kFhnClock;
    cfg.L = 80;
    cfg.cells = {{8, 5}, {4, 3}};
    cfg.r_grid = percent_grid(7, 15);
    cfg.policy = {"continuation"};
    const SweepResult res = sweep(cfg);
    const SweepRow* target = nullptr;
    for (const auto& row : res.rows)
        if (row.p == 8 && row.q == 5 && std::abs(row.r - 0.11) < 1e-12) target = &row;
    if (!target) return {false, "cell (8,5) r=0.11 missing from the sweep"};
    const bool cell = target->converged && target->residual < kResidual && target->front_amplitude > kAmplitude;
    const auto multi = multivalued_detunings(res);
    std::string d = "c=" + fmt(target->c) + " r=0.11 converged=" + (target->converged ? "yes" : "no") +
                    " residual=" + fmt(target->residual) + " amplitude=" + fmt(target->front_amplitude) +
                    "; detunings with >=2 speeds: " + std::to_string(multi.size());
    if (!multi.empty()) {
        const auto& [r, cs] = *multi.begin();
        d += " (r=" + fmt(r) + ": c=" + fmt(cs.front()) + ", " + fmt(cs.back()) + ")";
    }
    return {cell && !multi.empty() && target->c == 0.3125, d};
}

Outcome bdf_suite() {
    bool ok = true;
    double poly = 0.0, worst_order = 0.0;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int k = 1; k <= 6; ++k) {
        const BdfScheme s = bdf_scheme(k);
        const auto [mu, beta] = lagrange_bdf(k);
        ok = ok && s.mu == mu && s.beta == beta;
        for (int deg = 0; deg <= k; ++deg) {
            const double x = U(rng);
            const double exact = deg == 0 ? 0.0 : deg * std::pow(x, deg - 1);
            poly = std::max(poly, std::abs(discrete_derivative_fn(s, 3.0, [deg](double y) { return std::pow(y, deg); }, x) - exact));
        }
        // a scheme of order k differentiates exactly to order l <= k; its sine error decays like M^{-k}
        const ConvergenceProbe pr = convergence_order_probe(s, [](double y) { return std::sin(y); },
                                                            [](double y) { return std::cos(y); }, {4, 8, 16, 32});
        worst_order = std::max(worst_order, std::abs(pr.slope - double(k)));
    }
    return {ok && poly < kPolyExact && worst_order < kOrderBand,
            std::string("rational table ") + (ok ? "exact" : "MISMATCH") + ", polynomial defect " + fmt(poly) +
                ", worst |order - k| " + fmt(worst_order)};
}

Outcome identity_suite() {
    const NagumoSetup& N = nagumo();
    std::mt19937_64 rng(348);
    double intertwine = 0.0, commute = 0.0, isometry = 0.0, sbp = 0.0;
    int n_int = 0, n_comm = 0, n_iso = 0, n_sbp = 0;
    for (const auto& [p, q] : kCouplings) {
        const RationalCoupling c = make_rational(p, q);
        for (int k : kOrders) {
            const BdfScheme s = bdf_scheme(k);
            const OperatorContext ctx{&N.kernel, &N.model, &s, &N.wide};
            const TwistedOperator K = build_twisted_operator(OperatorKind::K_kM, ctx, c, 8, 1);
            const SpMat LkM = assemble_LkM(ctx, c, 8);
            for (int t = 0; t < 9; ++t) {
                const WaveProfile phi = compact_profile(p, 8, 3 * p, 1, rng);
                const PeriodicField a = K.apply(embed_isometry(phi, c));
                const PeriodicField b = embed_isometry(from_vector(LkM * to_vector(phi), phi), c);
                for (std::size_t i = 0; i < a.values.size(); ++i)
                    intertwine = std::max(intertwine, std::abs(a.values[i] - b.values[i]));
                ++n_int;

                const WaveProfile u = compact_profile(p, 12, 6 * p, 1, rng), v = compact_profile(p, 12, 6 * p, 1, rng);
                const double l = inner_product_scaled(apply_discrete_derivative(s, c, u), v);
                const double r = inner_product_scaled(u, apply_discrete_derivative(s, c, v, true));
                sbp = std::max(sbp, std::abs(l - r) / std::max(1.0, std::abs(l)));
                ++n_sbp;

                const WaveProfile x = compact_profile(p, 6, 2, 2, rng), y = compact_profile(p, 6, 2, 2, rng);
                const PeriodicField X = embed_isometry(x, c), Y = embed_isometry(y, c);
                isometry = std::max(isometry, std::abs(inner_product_field(X, Y) - inner_product_scaled(x, y)));
                ++n_iso;

                LimitField th(c.q, c.t, 8, 6, 1);
                std::uniform_real_distribution<double> U(-1.0, 1.0);
                for (auto& w : th.values) w = U(rng);
                const CommutationDefect d = harmonic_commutation_defect(th, t % c.q);
                commute = std::max({commute, d.projection, d.modulated});
                ++n_comm;
            }
        }
    }
    const int n = std::min({n_int, n_comm, n_iso, n_sbp});
    return {n >= 100 && intertwine < kIdentity && commute < kIdentity && isometry < kIdentity && sbp < kIdentity,
            std::to_string(n) + " inputs each; intertwining " + fmt(intertwine) + ", commutation " + fmt(commute) +
                ", isometry " + fmt(isometry) + ", summation by parts " + fmt(sbp)};
}

Outcome negativity_suite() {
    const InteractionKernel g = build_gaussian_kernel(1, 1, 1.0);
    double neg = -std::numeric_limits<double>::infinity();
    unsigned long long seed = 1;
    for (const auto& [p, q] : kCouplings) neg = std::max(neg, quadratic_form_negativity(g, make_rational(p, q), 10, 250, seed++));

    const InteractionKernel nn = build_nearest_neighbor_kernel(1, 1, 1.0);
    double spread = 0.0;
    for (int k : kOrders) {
        double hi = 0.0, lo = std::numeric_limits<double>::infinity();
        for (long M : {2L, 4L, 8L, 16L}) {
            const double K = derivative_form_constant(bdf_scheme(k), M, nn, 200, 7).K;
            hi = std::max(hi, K);
            lo = std::min(lo, K);
        }
        spread = std::max(spread, hi / lo);
    }

    auto f = [](double x) { return x >= 0.0 ? std::exp(-x) : 0.0; };
    auto h = [](double x) { return std::exp(-x * x); };
    const double exact = 0.5 * std::sqrt(M_PI) * std::exp(0.25) * std::erfc(0.5);
    std::vector<double> Ms, es;
    for (double M : {4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
        Ms.push_back(M);
        es.push_back(riemann_sum_error(f, h, exact, M, 12.0));
    }
    const double slope = loglog_slope(Ms, es);
    return {neg <= kNegativity && spread < kFormBand && std::abs(slope + 1.0) < kSlopeBand,
            "max <Delta_M Phi, Phi> over 1000 fields " + fmt(neg) + ", worst K spread over M " + fmt(spread) +
                "x, Riemann error slope " + fmt(slope)};
}

Outcome limit_suite() {
    const NagumoSetup& N = nagumo();
    const BdfScheme s = bdf_scheme(1);
    const OperatorContext ctx{&N.kernel, &N.model, &s, &N.wide};
    bool kernel_ok = true;
    double mismatch = 0.0;
    for (const auto& [q, t] : std::vector<std::pair<long, long>>{{2, 1}, {5, 3}}) {
        const LimitKernelReport r = limit_kernel_check(ctx, q, t);
        kernel_ok = kernel_ok && r.one_dimensional;
        mismatch = std::max(mismatch, r.vector_mismatch);
    }

    const ReactionModel m = fhn();
    const InteractionKernel k = fhn_kernel();
    SemiSeedOptions o;
    o.p0 = 4;
    o.pulse.lhs_scale = kFhnClock;
    const SemiDiscreteWave w = semidiscrete_from_simulation(m, k, 0.11, o);
    const CharacteristicContext cc{&m, &k, 0.11, w.c0, 0.0, 0.0};
    const HyperbolicityReport hyp = hyperbolicity_scan(cc, {0.0, 0.25, 0.5, 0.75, 1.0}, 1024, 8, kHyperbolic);

    auto Z = [](long a, double x, int) {
        const double y = x / 6.0;
        return std::abs(y) < 1.0 ? (1.0 + double(a) / 2.0) * std::exp(-1.0 / (1.0 - y * y)) : 0.0;
    };
    const LimitProbeReport pr = laplacian_limit_probe(build_gaussian_kernel(1, 1, 1.0),
                                                      fixed_rotation_sequence(2, 1, {16, 64, 256, 1024, 4096, 16384}), Z, 1, 14.0);
    const bool probe_ok = pr.monotone && pr.norms.size() == 6 && pr.norms.back() < kProbeFinal;
    return {kernel_ok && mismatch < kKernelMatch && hyp.pass && probe_ok,
            "limit kernel one-dimensional " + std::string(kernel_ok ? "yes" : "no") + " mismatch " + fmt(mismatch) +
                "; FHN min |det| " + fmt(hyp.min_abs_det) + " (c0=" + fmt(w.c0) + "); probe " + fmt(pr.norms.front()) +
                " -> " + fmt(pr.norms.back()) + (pr.monotone ? " monotone" : " NOT monotone")};
}

Outcome resolvent_suite() {
    const NagumoSetup& N = nagumo();
    const SemiDiscreteWave& w = N.wide;
    const SpMat L0 = assemble_L0(N.model, N.kernel, 0.25, w.c0, w.U0);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    double worst = 0.0, kernel = 0.0;
    const Eigen::VectorXd pp = to_vector(w.Phi_plus);
    for (double delta : {0.01, 0.05}) {
        for (int t = 0; t < 10; ++t) {
            Eigen::VectorXd g(L0.rows());
            for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = U(rng);
            worst = std::max(worst, resolvent_decomposition_check(L0, w.Phi_plus, w.Phi_minus, delta, g).relative_error);
        }
        const ResolventCheck rc = resolvent_decomposition_check(L0, w.Phi_plus, w.Phi_minus, delta, pp);
        kernel = std::max(kernel, (rc.direct - pp / delta).norm() / (pp / delta).norm());
    }
    return {worst < kResolvent && kernel < kResolvent,
            "two-path relative error " + fmt(worst) + ", kernel case " + fmt(kernel)};
}

Outcome quasi_inverse_suite() {
    const NagumoSetup& N = nagumo();
    const BdfScheme s = bdf_scheme(2);
    double unit = 0.0;
    std::vector<double> ratios, kappas;
    for (long M : {2L, 4L, 8L}) {
        const RationalCoupling c = make_rational(M, 1);
        {
            const OperatorContext ctx{&N.kernel, &N.model, &s, &N.narrow};
            QuasiInverse Q(ctx, c, 15);
            const QuasiInverseResult r = Q.solve(-Q.wave_derivative());
            unit = std::max({unit, std::abs(r.gamma - 1.0), r.V.lpNorm<Eigen::Infinity>()});
            double kappa = std::numeric_limits<double>::infinity();
            for (double f : {0.5, 0.25, 0.125}) kappa = std::min(kappa, spectral_convergence_diagnostic(ctx, c, 15, 0.1 * f));
            kappas.push_back(kappa);
        }
        const OperatorContext ctx{&N.kernel, &N.model, &s, &N.wide};
        QuasiInverse Q(ctx, c, 30);
        std::mt19937_64 rng(11);
        std::normal_distribution<double> amp;
        std::uniform_real_distribution<double> ctr(-10.0, 10.0);
        const WaveProfile grid(M, 30, 1);
        double worst = 0.0;
        for (int t = 0; t < 20; ++t) {
            Eigen::VectorXd psi = Eigen::VectorXd::Zero(Q.size());
            for (int b = 0; b < 5; ++b) {
                const double a = amp(rng), x = ctr(rng);
                for (long j = grid.lo(); j <= grid.hi(); ++j) psi(grid.flat(j, 0)) += a * std::exp(-std::pow(grid.xi(j) - x, 2));
            }
            worst = std::max(worst, Q.solve(psi).ratio);
        }
        ratios.push_back(worst);
    }
    double growth = 0.0;
    for (double r : ratios) growth = std::max(growth, r / ratios.front() - 1.0);
    const double kappa_hat = *std::min_element(kappas.begin(), kappas.end());
    return {unit < kUnitSolve && growth < kRatioGrowth && kappa_hat > 0.0,
            "unit solve defect " + fmt(unit) + ", ratio " + fmt(ratios[0]) + "/" + fmt(ratios[1]) + "/" + fmt(ratios[2]) +
                " at M=2/4/8 (growth " + fmt(growth) + "), kappa_hat " + fmt(kappa_hat)};
}

Outcome cross_solver() {
    // (4,3) cell, front held at xi = 30 with r free, then the lattice run at that r
    const FullyDiscreteProblem pr = fhn_problem(4, 3);
    const WaveProfile seed = place_pulse(pr, simulate_pulse(pr.model, pr.kernel, 0.15), 30.0);
    const FullyDiscreteWave w = solve_free_detuning(pr, 0.15, seed, seed);
    if (!w.converged) return {false, "free-detuning solve at (4,3) did not converge"};

    SimulationState st = make_state(front_initial_state(pr.model, 400, 370), kFhnDt);
    StepOptions so;
    so.lhs_scale = kFhnClock;
    so.tol = 1e-11;
    const Trajectory tr = simulate(st, pr.model, pr.kernel, bdf_scheme(1), w.r, 240, so);
    const double sim = -measure_wavespeed(tr.times, tr.positions).speed;
    const double rel = std::abs(sim - pr.c()) / pr.c();
    return {rel < kSpeedMatch, "BVP c=" + fmt(pr.c()) + " at r=" + fmt(w.r) + ", lattice run c=" + fmt(sim) +
                                   " (relative " + fmt(rel) + ")"};
}

}  // namespace

int main() {
    report(1, "sweep cell and multivalued r(c)", sweep_cell_and_multivalued);
    report(2, "BDF coefficients and exactness", bdf_suite);
    report(3, "operator identities", identity_suite);
    report(4, "negativity and boundedness", negativity_suite);
    report(5, "limiting system", limit_suite);
    report(6, "resolvent decomposition", resolvent_suite);
    report(7, "quasi-inverse and spectral diagnostic", quasi_inverse_suite);
    report(8, "cross-solver wavespeed", cross_solver);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures;
}
