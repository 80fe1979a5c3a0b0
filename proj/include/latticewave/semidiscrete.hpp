#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "assembly.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace latticewave {

struct SemiDiscreteWave {
    double c0 = 0.0;
    double r = 0.0;
    WaveProfile U0;
    WaveProfile Phi_plus;
    WaveProfile Phi_minus;
    double lambda_tilde = std::numeric_limits<double>::quiet_NaN();
    double residual = 0.0;
    int iterations = 0;
    bool c_vanishes = false;
    double sigma_min = 0.0;
    double sigma_second = 0.0;
};

struct NewtonOptions {
    int max_iter = 50;
    double tol = 1e-10;
    bool damping = true;
};

class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Fourth-order central difference on spacing 1/p with extension-supplied ghosts.
inline double central_derivative(const WaveProfile& w, long j, int i) {
    const double p = double(w.p);
    return (-w.value(j + 2, i) + 8.0 * w.value(j + 1, i) - 8.0 * w.value(j - 1, i) + w.value(j - 2, i)) *
           p / 12.0;
}

inline void add_central_derivative(Triplets& T, long row, const WaveProfile& w, long j, int i, double scale) {
    const double s = scale * double(w.p) / 12.0;
    add_tap(T, row, w, j + 2, i, -s);
    add_tap(T, row, w, j + 1, i, 8.0 * s);
    add_tap(T, row, w, j - 1, i, -8.0 * s);
    add_tap(T, row, w, j - 2, i, s);
}

inline WaveProfile central_derivative_profile(const WaveProfile& w) {
    WaveProfile out = w.zeros_like();
    for (long j = w.lo(); j <= w.hi(); ++j)
        for (int i = 0; i < w.d; ++i) out.at(j, i) = central_derivative(w, j, i);
    return out;
}

// c U' - tau sum alpha_m [U(.+m) + U(.-m) - 2U] - G(U; r) at every window point.
inline WaveProfile semidiscrete_residual(const ReactionModel& model, const InteractionKernel& k, double r,
                                         double c, const WaveProfile& U) {
    WaveProfile F = U.zeros_like();
    std::vector<double> g(static_cast<std::size_t>(U.d));
    for (long j = U.lo(); j <= U.hi(); ++j) {
        model.G(&U.values[std::size_t(U.flat(j, 0))], r, g.data());
        for (int i = 0; i < U.d; ++i) {
            const double lap = laplacian_at(k, U, j, i);
            F.at(j, i) = c * central_derivative(U, j, i) - lap - g[std::size_t(i)];
        }
    }
    return F;
}

// Matrix of L0 = c D - Delta_0 - DG(U) on the window (ghost samples enter through the extension).
inline SpMat assemble_L0(const ReactionModel& model, const InteractionKernel& k, double r, double c,
                         const WaveProfile& U) {
    const long n = U.size() * U.d;
    Triplets T;
    T.reserve(std::size_t(n) * std::size_t(8 + 3 * k.m_max + U.d));
    std::vector<double> J(std::size_t(U.d * U.d));
    for (long j = U.lo(); j <= U.hi(); ++j) {
        for (int i = 0; i < U.d; ++i) {
            const long row = U.flat(j, i);
            if (c != 0.0) add_central_derivative(T, row, U, j, i, c);
            add_neg_laplacian(T, row, k, U, j, i);
        }
        add_neg_reaction_jacobian(T, model, r, U, j, J);
    }
    SpMat A(n, n);
    A.setFromTriplets(T.begin(), T.end());
    return A;
}

// Front P- + (P+ - P-)(1 + tanh(xi/width))/2 on the fine grid.
inline WaveProfile tanh_front(const ReactionModel& model, long p0, long L, double width = 2.0) {
    WaveProfile w(p0, L, model.d, Extension::ConstantLimits);
    w.P_minus = model.P_minus;
    w.P_plus = model.P_plus;
    for (long j = w.lo(); j <= w.hi(); ++j) {
        const double s = 0.5 * (1.0 + std::tanh(w.xi(j) / width));
        for (int i = 0; i < model.d; ++i)
            w.at(j, i) = model.P_minus[std::size_t(i)] + s * (model.P_plus[std::size_t(i)] - model.P_minus[std::size_t(i)]);
    }
    return w;
}

// Newton on the discretized MFDE with unknown c and the phase condition <seed', U - seed> = 0.
inline SemiDiscreteWave solve_semidiscrete_wave(const ReactionModel& model, const InteractionKernel& k, double r,
                                                const WaveProfile& seed, double c_guess,
                                                const NewtonOptions& opt = {}) {
    if (seed.d != model.d || k.d != model.d) throw std::invalid_argument("dimension mismatch between model, kernel and seed");
    if (max_equilibrium_defect(model, r) > 1e-12) throw std::invalid_argument("model limits are not equilibria");
    WaveProfile U = seed;
    U.P_minus = model.P_minus;
    U.P_plus = model.P_plus;
    const WaveProfile dseed = central_derivative_profile(seed);
    const Eigen::VectorXd t = to_vector(dseed);
    const Eigen::VectorXd s0 = to_vector(seed);
    const long n = U.size() * U.d;
    double c = c_guess;

    auto residual_norm = [&](const WaveProfile& V, double cc) {
        const WaveProfile F = semidiscrete_residual(model, k, r, cc, V);
        const double ph = t.dot(to_vector(V) - s0) / double(V.p);
        return std::max(sup_norm(F), std::abs(ph));
    };

    double res = residual_norm(U, c);
    int it = 0;
    for (; it < opt.max_iter && !(res < opt.tol); ++it) {
        const WaveProfile F = semidiscrete_residual(model, k, r, c, U);
        SpMat A = assemble_L0(model, k, r, c, U);
        const WaveProfile dU = central_derivative_profile(U);
        Triplets T;
        T.reserve(std::size_t(A.nonZeros() + 2 * n));
        append_matrix(T, A);
        for (long q = 0; q < n; ++q) {
            T.emplace_back(int(q), int(n), dU.values[std::size_t(q)]);
            T.emplace_back(int(n), int(q), t(q) / double(U.p));
        }
        SpMat B(n + 1, n + 1);
        B.setFromTriplets(T.begin(), T.end());
        Eigen::VectorXd rhs(n + 1);
        rhs.head(n) = -to_vector(F);
        rhs(n) = -t.dot(to_vector(U) - s0) / double(U.p);
        Eigen::VectorXd dx;
        try {
            SparseSolver S(B);
            dx = S.solve(rhs);
        } catch (const std::exception&) {
            throw SolveError("singular bordered Jacobian in the semi-discrete wave solve");
        }
        if (!dx.allFinite()) throw SolveError("semi-discrete Newton step is not finite");
        double lam = 1.0;
        for (int bt = 0; bt < 12; ++bt) {
            WaveProfile V = U;
            for (long q = 0; q < n; ++q) V.values[std::size_t(q)] += lam * dx(q);
            const double cc = c + lam * dx(n);
            const double rn = residual_norm(V, cc);
            if (!opt.damping || rn < res || bt == 11) {
                U = V;
                c = cc;
                res = rn;
                break;
            }
            lam *= 0.5;
        }
    }
    if (!(res < opt.tol))
        throw SolveError("semi-discrete Newton did not converge (residual " + std::to_string(res) + ")");

    SemiDiscreteWave w;
    w.c0 = c;
    w.r = r;
    w.U0 = U;
    w.residual = sup_norm(semidiscrete_residual(model, k, r, c, U));
    w.iterations = it;
    w.c_vanishes = std::abs(c) < 1e-8;
    return w;
}

struct WaveSpectrum {
    WaveProfile Phi_plus;
    WaveProfile Phi_minus;
    double sigma_min = 0.0;
    double sigma_second = 0.0;
    double operator_norm = 0.0;  // Frobenius norm as scale reference
    double lambda_tilde = std::numeric_limits<double>::quiet_NaN();
    double pairing = 0.0;        // <Phi+, Phi-> before normalization
};

// Kernel and cokernel of L0 from the smallest singular triplet; Phi+ scaled to match U0'.
inline WaveSpectrum compute_wave_spectrum(const SpMat& L0, const SemiDiscreteWave& w, bool eigenvalues = true) {
    WaveSpectrum sp;
    const SingularTriplet t = smallest_singular(L0, 80);
    sp.sigma_min = t.sigma;
    sp.operator_norm = L0.norm();
    const SingularTriplet t2 = smallest_singular(L0, 80, {t.right}, 3);
    sp.sigma_second = t2.sigma;

    const WaveProfile dU = central_derivative_profile(w.U0);
    const Eigen::VectorXd du = to_vector(dU);
    Eigen::VectorXd plus = t.right * (t.right.dot(du) / t.right.squaredNorm());
    Eigen::VectorXd minus = t.left;
    const double p0 = double(w.U0.p);
    sp.pairing = plus.dot(minus) / p0;
    if (std::abs(sp.pairing) < 1e-300) throw SolveError("kernel and cokernel are orthogonal: eigenvalue 0 is not simple");
    minus /= sp.pairing;
    WaveProfile like = w.U0.zeros_like();
    like.P_minus.assign(std::size_t(like.d), 0.0);
    like.P_plus.assign(std::size_t(like.d), 0.0);
    like.extension = Extension::ConstantLimits;
    sp.Phi_plus = from_vector(plus, like);
    sp.Phi_minus = from_vector(minus, like);

    if (eigenvalues && L0.rows() <= 3000) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(L0), false);
        const double period = 2.0 * M_PI * std::abs(w.c0);
        double lt = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            const std::complex<double> z = es.eigenvalues()(i);
            bool on_lattice = false;
            if (period > 0.0) {
                const double nn = std::round(z.imag() / period);
                on_lattice = std::abs(z - std::complex<double>(0.0, nn * period)) < 1e-4;
            } else {
                on_lattice = std::abs(z) < 1e-4;
            }
            if (!on_lattice) lt = std::min(lt, z.real());
        }
        sp.lambda_tilde = lt;
    }
    return sp;
}

// Convenience: solve, then attach the spectral data.
inline void attach_spectrum(SemiDiscreteWave& w, const ReactionModel& model, const InteractionKernel& k,
                            bool eigenvalues = true) {
    const SpMat L0 = assemble_L0(model, k, w.r, w.c0, w.U0);
    const WaveSpectrum sp = compute_wave_spectrum(L0, w, eigenvalues);
    w.Phi_plus = sp.Phi_plus;
    w.Phi_minus = sp.Phi_minus;
    w.sigma_min = sp.sigma_min;
    w.sigma_second = sp.sigma_second;
    w.lambda_tilde = sp.lambda_tilde;
}

struct TailFit {
    double left_slope = 0.0;   // d log|U - P-| / d xi on the left outer quarter (positive when decaying)
    double right_slope = 0.0;  // negative when decaying
    bool ok = false;
};

inline TailFit fit_tail_decay(const WaveProfile& U, double floor = 1e-13) {
    auto fit = [&](long a, long b, const std::vector<double>& P) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (long j = a; j <= b; ++j) {
            double dev = 0.0;
            for (int i = 0; i < U.d; ++i) dev = std::max(dev, std::abs(U.at(j, i) - P[std::size_t(i)]));
            if (dev < floor) continue;
            const double x = U.xi(j), y = std::log(dev);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++n;
        }
        if (n < 3) return std::numeric_limits<double>::quiet_NaN();
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    TailFit f;
    const long q = U.size() / 4;
    f.left_slope = fit(U.lo(), U.lo() + q, U.P_minus);
    f.right_slope = fit(U.hi() - q, U.hi(), U.P_plus);
    f.ok = (std::isnan(f.left_slope) || f.left_slope > 0.01) && (std::isnan(f.right_slope) || f.right_slope < -0.01);
    return f;
}

struct ResolventCheck {
    double relative_error = 0.0;
    double kernel_coefficient = 0.0;  // <Phi-, G>/<Phi-, Phi+>
    int neumann_terms = 0;
    Eigen::VectorXd direct;
    Eigen::VectorXd decomposed;
};

// (L0 + delta)^{-1} G two ways: sparse LU directly, and the kernel term plus the Neumann series of
// (I + delta L0^{-1})^{-1} applied to the bordered quasi-inverse.
inline ResolventCheck resolvent_decomposition_check(const SpMat& L0, const WaveProfile& Phi_plus,
                                                    const WaveProfile& Phi_minus, double delta,
                                                    const Eigen::VectorXd& G, double delta0 = 0.1) {
    if (!(delta > 0.0) || !(delta < delta0)) throw std::invalid_argument("delta must lie in (0, delta0)");
    const long n = L0.rows();
    const Eigen::VectorXd pp = to_vector(Phi_plus), pm = to_vector(Phi_minus);
    SpMat I(n, n);
    I.setIdentity();
    SpMat A = L0 + delta * I;
    SparseSolver direct(A);
    ResolventCheck out;
    out.direct = direct.solve(G);

    // bordered [[L0, Phi+], [Phi-^T, 0]] realizes L0^{-1} on the complement <Phi-, .> = 0
    Triplets T;
    append_matrix(T, L0);
    for (long q = 0; q < n; ++q) {
        T.emplace_back(int(q), int(n), pp(q));
        T.emplace_back(int(n), int(q), pm(q));
    }
    SpMat B(n + 1, n + 1);
    B.setFromTriplets(T.begin(), T.end());
    SparseSolver border(B);
    auto Linv = [&](const Eigen::VectorXd& y) {
        Eigen::VectorXd rhs(n + 1);
        rhs.head(n) = y;
        rhs(n) = 0.0;
        return Eigen::VectorXd(border.solve(rhs).head(n));
    };

    const double a = pm.dot(G) / pm.dot(pp);
    out.kernel_coefficient = a;
    const Eigen::VectorXd Z = Linv(G - a * pp);
    Eigen::VectorXd X = Z, term = Z;
    int terms = 0;
    for (; terms < 2000; ++terms) {
        term = -delta * Linv(term);
        X += term;
        if (term.norm() <= 1e-17 * X.norm()) break;
    }
    out.neumann_terms = terms + 1;
    out.decomposed = (a / delta) * pp + X;
    out.relative_error = (out.direct - out.decomposed).norm() / out.direct.norm();
    return out;
}

inline json wave_to_json(const SemiDiscreteWave& w) {
    return json{{"c0", w.c0},
                {"r", w.r},
                {"residual", w.residual},
                {"lambda_tilde", std::isfinite(w.lambda_tilde) ? json(w.lambda_tilde) : json(nullptr)},
                {"iterations", w.iterations},
                {"sigma_min", w.sigma_min},
                {"sigma_second", w.sigma_second},
                {"c_vanishes", w.c_vanishes}};
}

}  // namespace latticewave
