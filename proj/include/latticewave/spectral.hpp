#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "assembly.hpp"
#include "bdf.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "semidiscrete.hpp"

namespace latticewave {

using cplx = std::complex<double>;

enum class OperatorKind { T_M, Delta_M, K_kM, K_star_kM, T_qtheta, Delta_qtheta, K_qtheta, K_star_qtheta };

inline std::string to_string(OperatorKind k) {
    switch (k) {
    case OperatorKind::T_M: return "T_M";
    case OperatorKind::Delta_M: return "Delta_M";
    case OperatorKind::K_kM: return "K_kM";
    case OperatorKind::K_star_kM: return "K_star_kM";
    case OperatorKind::T_qtheta: return "T_qtheta";
    case OperatorKind::Delta_qtheta: return "Delta_qtheta";
    case OperatorKind::K_qtheta: return "K_qtheta";
    case OperatorKind::K_star_qtheta: return "K_star_qtheta";
    }
    return "?";
}

inline bool is_limit_kind(OperatorKind k) {
    return k == OperatorKind::T_qtheta || k == OperatorKind::Delta_qtheta || k == OperatorKind::K_qtheta ||
           k == OperatorKind::K_star_qtheta;
}

// Theta(zeta = a/q, xi = j/p0) for a in Z_q (periodic in a) and xi in [-L, L]; zero beyond the window.
struct LimitField {
    long q = 1;
    long t = 1;
    long p0 = 1;
    long L = 0;
    int d = 1;
    std::vector<double> values;  // ((a * size) + (j - lo)) * d + i

    LimitField() = default;
    LimitField(long q_, long t_, long p0_, long L_, int d_)
        : q(q_), t(t_), p0(p0_), L(L_), d(d_), values(std::size_t(q_ * (2 * L_ * p0_ + 1) * d_), 0.0) {}

    long size() const { return 2 * L * p0 + 1; }
    long lo() const { return -L * p0; }
    long hi() const { return L * p0; }
    double xi(long j) const { return double(j) / double(p0); }
    long wrap(long a) const { return ((a % q) + q) % q; }
    long flat(long a, long j, int i) const { return (wrap(a) * size() + (j - lo())) * d + i; }
    double& at(long a, long j, int i) { return values[std::size_t(flat(a, j, i))]; }
    double at(long a, long j, int i) const { return values[std::size_t(flat(a, j, i))]; }
    double get(long a, long j, int i) const { return (j < lo() || j > hi()) ? 0.0 : at(a, j, i); }

    LimitField zeros_like() const {
        LimitField z = *this;
        std::fill(z.values.begin(), z.values.end(), 0.0);
        return z;
    }
};

// Copies of a profile on every strand: pi_perp Phi.
inline LimitField replicate_profile(const WaveProfile& w, long q, long t) {
    LimitField f(q, t, w.p, w.L, w.d);
    for (long a = 0; a < q; ++a)
        for (long j = w.lo(); j <= w.hi(); ++j)
            for (int i = 0; i < w.d; ++i) f.at(a, j, i) = w.at(j, i);
    return f;
}

// L^2(R, l2_{q,perp}) inner product with the periodic convention Theta(1, xi) = Theta(0, xi).
inline double inner_product_limit(const LimitField& u, const LimitField& v) {
    double s = 0.0;
    for (std::size_t k = 0; k < u.values.size(); ++k) s += u.values[k] * v.values[k];
    return s / (double(u.q) * double(u.p0));
}

struct OperatorContext {
    const InteractionKernel* kernel = nullptr;
    const ReactionModel* model = nullptr;
    const BdfScheme* scheme = nullptr;
    const SemiDiscreteWave* wave = nullptr;
};

struct TwistedOperator {
    OperatorKind kind = OperatorKind::T_M;
    RationalCoupling coupling;
    SpMat matrix;
    PeriodicField field_like;
    LimitField limit_like;

    PeriodicField apply(const PeriodicField& f) const {
        if (is_limit_kind(kind)) throw std::logic_error("limit operator applied to an H_M field");
        PeriodicField out = f.zeros_like();
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(f.values.data(), Eigen::Index(f.values.size()));
        const Eigen::VectorXd y = matrix * x;
        for (Eigen::Index i = 0; i < y.size(); ++i) out.values[std::size_t(i)] = y(i);
        return out;
    }

    LimitField apply(const LimitField& f) const {
        if (!is_limit_kind(kind)) throw std::logic_error("H_M operator applied to a limit field");
        LimitField out = f.zeros_like();
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(f.values.data(), Eigen::Index(f.values.size()));
        const Eigen::VectorXd y = matrix * x;
        for (Eigen::Index i = 0; i < y.size(); ++i) out.values[std::size_t(i)] = y(i);
        return out;
    }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("operator context is missing " + what);
}

// Adds weight * Phi(a + da, b + db, i) to row, with the seam reduction; samples beyond the window drop out.
inline void add_field_entry(Triplets& T, const PeriodicField& f, long row, long a, long b, int i, double w) {
    f.normalize(a, b);
    if (b < f.b_lo || b > f.b_hi || w == 0.0) return;
    T.emplace_back(int(row), int(f.flat(a, b, i)), w);
}

inline void add_limit_entry(Triplets& T, const LimitField& f, long row, long a, long j, int i, double w) {
    if (j < f.lo() || j > f.hi() || w == 0.0) return;
    T.emplace_back(int(row), int(f.flat(a, j, i)), w);
}

inline std::vector<double> wave_jacobian_at(const OperatorContext& ctx, double x) {
    const WaveProfile& U0 = ctx.wave->U0;
    std::vector<double> u(static_cast<std::size_t>(U0.d)), J(std::size_t(U0.d * U0.d));
    for (int i = 0; i < U0.d; ++i) u[std::size_t(i)] = interpolate_cubic(U0, x, i);
    ctx.model->DG(u.data(), ctx.wave->r, J.data());
    return J;
}

}  // namespace detail

// Matrix of the requested operator on H_M (window from field_for_window) or on the limit field (fine grid p0).
inline TwistedOperator build_twisted_operator(OperatorKind kind, const OperatorContext& ctx,
                                              const RationalCoupling& c, long L, int d, long p0 = 0) {
    TwistedOperator op;
    op.kind = kind;
    op.coupling = c;
    const bool needs_kernel = kind != OperatorKind::T_M && kind != OperatorKind::T_qtheta;
    const bool needs_wave = kind == OperatorKind::K_kM || kind == OperatorKind::K_star_kM ||
                            kind == OperatorKind::K_qtheta || kind == OperatorKind::K_star_qtheta;
    if (needs_kernel) detail::require(ctx.kernel != nullptr, "the interaction kernel");
    if (needs_wave) {
        detail::require(ctx.wave != nullptr, "the semi-discrete wave");
        detail::require(ctx.model != nullptr, "the reaction model");
    }
    if (kind == OperatorKind::K_kM || kind == OperatorKind::K_star_kM)
        detail::require(ctx.scheme != nullptr, "the BDF scheme");
    Triplets T;

    if (!is_limit_kind(kind)) {
        const PeriodicField f = field_for_window(c, d, L);
        op.field_like = f;
        const long q = c.q;
        std::vector<double> mu;
        double dscale = 0.0;
        if (ctx.scheme) {
            mu = ctx.scheme->mu_double();
            dscale = c.M() / ctx.scheme->beta_double();
        }
        for (long b = f.b_lo; b <= f.b_hi; ++b)
            for (long a = 0; a < q; ++a) {
                std::vector<double> J;
                if (needs_wave) J = detail::wave_jacobian_at(ctx, double(b * q + a) / double(c.p));
                for (int i = 0; i < d; ++i) {
                    const long row = f.flat(a, b, i);
                    if (kind == OperatorKind::T_M) {
                        detail::add_field_entry(T, f, row, a + c.t, b + c.n, i, 1.0);
                        continue;
                    }
                    const double sgn = (kind == OperatorKind::Delta_M) ? 1.0 : -1.0;
                    if (i < ctx.kernel->d_diff) {
                        double diag = 0.0;
                        for (int m = 1; m <= ctx.kernel->m_max; ++m) {
                            const double w = sgn * ctx.kernel->tau * ctx.kernel->alpha(m, i);
                            detail::add_field_entry(T, f, row, a + m * c.t, b + m * c.n, i, w);
                            detail::add_field_entry(T, f, row, a - m * c.t, b - m * c.n, i, w);
                            diag -= 2.0 * w;
                        }
                        detail::add_field_entry(T, f, row, a, b, i, diag);
                    }
                    if (kind == OperatorKind::Delta_M) continue;
                    const int k = ctx.scheme->k;
                    const double c0 = ctx.wave->c0;
                    for (int n = 0; n <= k; ++n) {
                        const long db = (kind == OperatorKind::K_kM) ? -(k - n) : (k - n);
                        detail::add_field_entry(T, f, row, a, b + db, i, c0 * dscale * mu[std::size_t(n)]);
                    }
                    for (int e = 0; e < d; ++e) {
                        const double v = (kind == OperatorKind::K_kM) ? J[std::size_t(i * d + e)] : J[std::size_t(e * d + i)];
                        detail::add_field_entry(T, f, row, a, b, e, -v);
                    }
                }
            }
        const long n = long(f.values.size());
        op.matrix = SpMat(n, n);
    } else {
        if (p0 <= 0) {
            detail::require(ctx.wave != nullptr, "a fine grid resolution p0");
            p0 = ctx.wave->U0.p;
        }
        if (needs_wave && (ctx.wave->U0.p != p0 || ctx.wave->U0.L < L))
            throw std::invalid_argument("limit operator grid must match the semi-discrete wave grid");
        const LimitField f(c.q, c.t, p0, L, d);
        op.limit_like = f;
        const double c0 = needs_wave ? ctx.wave->c0 : 0.0;
        const double dsgn = (kind == OperatorKind::K_qtheta) ? 1.0 : -1.0;
        for (long a = 0; a < f.q; ++a)
            for (long j = f.lo(); j <= f.hi(); ++j) {
                std::vector<double> J;
                if (needs_wave) {
                    J.resize(std::size_t(d * d));
                    ctx.model->DG(&ctx.wave->U0.values[std::size_t(ctx.wave->U0.flat(j, 0))], ctx.wave->r, J.data());
                }
                for (int i = 0; i < d; ++i) {
                    const long row = f.flat(a, j, i);
                    if (kind == OperatorKind::T_qtheta) {
                        detail::add_limit_entry(T, f, row, a + f.t, j + p0, i, 1.0);
                        continue;
                    }
                    const double sgn = (kind == OperatorKind::Delta_qtheta) ? 1.0 : -1.0;
                    if (i < ctx.kernel->d_diff) {
                        double diag = 0.0;
                        for (int m = 1; m <= ctx.kernel->m_max; ++m) {
                            const double w = sgn * ctx.kernel->tau * ctx.kernel->alpha(m, i);
                            detail::add_limit_entry(T, f, row, a + m * f.t, j + m * p0, i, w);
                            detail::add_limit_entry(T, f, row, a - m * f.t, j - m * p0, i, w);
                            diag -= 2.0 * w;
                        }
                        detail::add_limit_entry(T, f, row, a, j, i, diag);
                    }
                    if (kind == OperatorKind::Delta_qtheta) continue;
                    // same fourth-order stencil as the semi-discrete solver
                    const double s = dsgn * c0 * double(p0) / 12.0;
                    detail::add_limit_entry(T, f, row, a, j + 2, i, -s);
                    detail::add_limit_entry(T, f, row, a, j + 1, i, 8.0 * s);
                    detail::add_limit_entry(T, f, row, a, j - 1, i, -8.0 * s);
                    detail::add_limit_entry(T, f, row, a, j - 2, i, s);
                    for (int e = 0; e < d; ++e) {
                        const double v = (kind == OperatorKind::K_qtheta) ? J[std::size_t(i * d + e)] : J[std::size_t(e * d + i)];
                        detail::add_limit_entry(T, f, row, a, j, e, -v);
                    }
                }
            }
        const long n = long(f.values.size());
        op.matrix = SpMat(n, n);
    }
    op.matrix.setFromTriplets(T.begin(), T.end());
    return op;
}

// L_{k,M} = c0 D_{k,M} - Delta_0 - DG(pi U0) on the grid p^{-1}Z in [-L, L], zero beyond the window.
inline SpMat assemble_LkM(const OperatorContext& ctx, const RationalCoupling& c, long L, bool adjoint = false) {
    detail::require(ctx.kernel && ctx.model && ctx.scheme && ctx.wave, "kernel, model, scheme and wave");
    WaveProfile g(c.p, L, ctx.model->d, Extension::ConstantLimits);
    const auto mu = ctx.scheme->mu_double();
    const double a = ctx.wave->c0 * c.M() / ctx.scheme->beta_double();
    const int k = ctx.scheme->k, d = g.d;
    const long n = g.size() * d;
    Triplets T;
    for (long j = g.lo(); j <= g.hi(); ++j) {
        const auto J = detail::wave_jacobian_at(ctx, g.xi(j));
        for (int i = 0; i < d; ++i) {
            const long row = g.flat(j, i);
            for (int m = 0; m <= k; ++m) {
                const long jj = adjoint ? j + (k - m) * c.q : j - (k - m) * c.q;
                if (g.inside(jj)) T.emplace_back(int(row), int(g.flat(jj, i)), a * mu[std::size_t(m)]);
            }
            add_neg_laplacian(T, row, *ctx.kernel, g, j, i);
            for (int e = 0; e < d; ++e) {
                const double v = adjoint ? J[std::size_t(e * d + i)] : J[std::size_t(i * d + e)];
                if (v != 0.0) T.emplace_back(int(row), int(g.flat(j, e)), -v);
            }
        }
    }
    SpMat A(n, n);
    A.setFromTriplets(T.begin(), T.end());
    return A;
}

// D_{k,M} on the grid with zero extension.
inline SpMat assemble_discrete_derivative(const BdfScheme& s, const RationalCoupling& c, long L, int d,
                                          bool adjoint = false) {
    WaveProfile g(c.p, L, d, Extension::ConstantLimits);
    const auto mu = s.mu_double();
    const double a = c.M() / s.beta_double();
    Triplets T;
    for (long j = g.lo(); j <= g.hi(); ++j)
        for (int i = 0; i < d; ++i)
            for (int m = 0; m <= s.k; ++m) {
                const long jj = adjoint ? j + (s.k - m) * c.q : j - (s.k - m) * c.q;
                if (g.inside(jj)) T.emplace_back(int(g.flat(j, i)), int(g.flat(jj, i)), a * mu[std::size_t(m)]);
            }
    SpMat D(g.size() * d, g.size() * d);
    D.setFromTriplets(T.begin(), T.end());
    return D;
}

// pi Phi on the grid p from a fine-grid profile by cubic interpolation.
inline Eigen::VectorXd restrict_to_grid(const WaveProfile& fine, const RationalCoupling& c, long L) {
    WaveProfile g(c.p, L, fine.d, Extension::ConstantLimits);
    Eigen::VectorXd v(g.size() * g.d);
    for (long j = g.lo(); j <= g.hi(); ++j)
        for (int i = 0; i < g.d; ++i) v(g.flat(j, i)) = interpolate_cubic(fine, g.xi(j), i);
    return v;
}

// pi D_{k,M} U0: the stencil applied to the function U0 (limits extend beyond its window).
inline Eigen::VectorXd restricted_wave_derivative(const OperatorContext& ctx, const RationalCoupling& c, long L) {
    const WaveProfile& U0 = ctx.wave->U0;
    WaveProfile g(c.p, L, U0.d, Extension::ConstantLimits);
    const auto mu = ctx.scheme->mu_double();
    const double a = c.M() / ctx.scheme->beta_double();
    Eigen::VectorXd v(g.size() * g.d);
    for (long j = g.lo(); j <= g.hi(); ++j)
        for (int i = 0; i < g.d; ++i) {
            double s = 0.0;
            for (int m = 0; m <= ctx.scheme->k; ++m)
                s += mu[std::size_t(m)] * interpolate_cubic(U0, g.xi(j) - double(ctx.scheme->k - m) / c.M(), i);
            v(g.flat(j, i)) = a * s;
        }
    return v;
}

// ---- characteristic matrices and hyperbolicity ----

struct CharacteristicContext {
    const ReactionModel* model = nullptr;
    const InteractionKernel* kernel = nullptr;
    double r = 0.0;
    double c0 = 0.0;
    double rho = 0.0;  // homotopy: rho DG(P-) + (1 - rho) DG(P+)
    cplx lambda = 0.0;
};

inline Eigen::MatrixXd homotopy_jacobian(const CharacteristicContext& ctx) {
    return ctx.rho * ctx.model->jacobian(ctx.model->P_minus, ctx.r) +
           (1.0 - ctx.rho) * ctx.model->jacobian(ctx.model->P_plus, ctx.r);
}

// c0 i y + 2 tau A(y) - DG_rho + lambda.
inline Eigen::MatrixXcd characteristic_matrix(const CharacteristicContext& ctx, double y) {
    const int d = ctx.model->d;
    Eigen::MatrixXcd D = -homotopy_jacobian(ctx).cast<cplx>();
    for (int i = 0; i < d; ++i) {
        D(i, i) += cplx(0.0, ctx.c0 * y) + ctx.lambda;
        if (i < ctx.kernel->d_diff) D(i, i) += 2.0 * ctx.kernel->tau * symbol(*ctx.kernel, i, y);
    }
    return D;
}

// The limit operator applied to e^{z xi} V at xi = 0, V in C^{q d} indexed by (a, i).
inline Eigen::MatrixXcd twisted_characteristic_matrix(const CharacteristicContext& ctx, long q, long t, cplx z) {
    const int d = ctx.model->d;
    const long n = q * d;
    const Eigen::MatrixXd J = homotopy_jacobian(ctx);
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(n, n);
    auto idx = [&](long a, int i) { return Eigen::Index((((a % q) + q) % q) * d + i); };
    for (long a = 0; a < q; ++a)
        for (int i = 0; i < d; ++i) {
            const Eigen::Index row = idx(a, i);
            D(row, row) += ctx.c0 * z + ctx.lambda;
            if (i < ctx.kernel->d_diff)
                for (int m = 1; m <= ctx.kernel->m_max; ++m) {
                    const double w = ctx.kernel->tau * ctx.kernel->alpha(m, i);
                    D(row, idx(a + m * t, i)) -= w * std::exp(double(m) * z);
                    D(row, idx(a - m * t, i)) -= w * std::exp(-double(m) * z);
                    D(row, row) += 2.0 * w;
                }
            for (int e = 0; e < d; ++e) D(row, idx(a, e)) -= J(i, e);
        }
    return D;
}

struct HyperbolicityReport {
    double min_abs_det = std::numeric_limits<double>::infinity();
    double argmin_y = 0.0;
    double argmin_rho = 0.0;
    bool pass = false;
    long evaluations = 0;
};

// min |det| over y in [0, 2 pi) shifted by 2 pi k for |k| <= periods, each rho; local minima refined by
// golden-section search so isolated zeros are found, not just sampled.
inline HyperbolicityReport hyperbolicity_scan(CharacteristicContext ctx, const std::vector<double>& rho_grid,
                                              int y_points = 1024, int periods = 8, double threshold = 1e-8,
                                              std::optional<std::pair<long, long>> twist = std::nullopt) {
    if (rho_grid.empty() || y_points < 3) throw std::invalid_argument("hyperbolicity scan needs nonempty grids");
    HyperbolicityReport rep;
    for (double rho : rho_grid) {
        if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("rho must lie in [0, 1]");
        ctx.rho = rho;
        auto f = [&](double y) {
            ++rep.evaluations;
            if (twist) return std::abs(twisted_characteristic_matrix(ctx, twist->first, twist->second, cplx(0.0, y)).determinant());
            return std::abs(characteristic_matrix(ctx, y).determinant());
        };
        auto consider = [&](double y, double v) {
            if (v < rep.min_abs_det) {
                rep.min_abs_det = v;
                rep.argmin_y = y;
                rep.argmin_rho = rho;
            }
        };
        for (int k = -periods; k <= periods; ++k) {
            const double h = 2.0 * M_PI / double(y_points);
            std::vector<double> ys(std::size_t(y_points + 2)), vs(ys.size());
            for (int s = -1; s <= y_points; ++s) {
                ys[std::size_t(s + 1)] = 2.0 * M_PI * double(k) + h * double(s);
                vs[std::size_t(s + 1)] = f(ys[std::size_t(s + 1)]);
            }
            for (std::size_t s = 1; s + 1 < ys.size(); ++s) {
                consider(ys[s], vs[s]);
                if (!(vs[s] <= vs[s - 1] && vs[s] <= vs[s + 1])) continue;
                double lo = ys[s - 1], hi = ys[s + 1];
                const double g = 0.5 * (std::sqrt(5.0) - 1.0);
                double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo), f1 = f(x1), f2 = f(x2);
                for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
                    if (f1 < f2) {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - g * (hi - lo);
                        f1 = f(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + g * (hi - lo);
                        f2 = f(x2);
                    }
                }
                consider(f1 < f2 ? x1 : x2, std::min(f1, f2));
            }
        }
    }
    rep.pass = rep.min_abs_det > threshold;
    return rep;
}

// ---- harmonic projections ----

struct ComplexProfile {
    long p = 1;
    long L = 0;
    int d = 1;
    std::vector<cplx> values;

    ComplexProfile() = default;
    ComplexProfile(long p_, long L_, int d_) : p(p_), L(L_), d(d_), values(std::size_t((2 * L_ * p_ + 1) * d_)) {}
    long lo() const { return -L * p; }
    long hi() const { return L * p; }
    cplx& at(long j, int i) { return values[std::size_t((j - lo()) * d + i)]; }
    cplx at(long j, int i) const { return values[std::size_t((j - lo()) * d + i)]; }
    cplx get(long j, int i) const { return (j < lo() || j > hi()) ? cplx(0.0) : at(j, i); }
};

// [Pi_n Theta](xi) = sum_{n'} zeta_q^{n n'} Theta(n' theta, xi).
inline ComplexProfile harmonic_projection(const LimitField& f, long n) {
    if (n < 0 || n >= f.q) throw std::out_of_range("harmonic index must lie in 0..q-1");
    if (std::gcd(f.t, f.q) != 1) throw std::invalid_argument("rotation number requires gcd(theta q, q) = 1");
    ComplexProfile out(f.p0, f.L, f.d);
    for (long np = 0; np < f.q; ++np) {
        const cplx w = std::polar(1.0, 2.0 * M_PI * double((n * np) % f.q) / double(f.q));
        const long a = (np * f.t) % f.q;
        for (long j = f.lo(); j <= f.hi(); ++j)
            for (int i = 0; i < f.d; ++i) out.at(j, i) += w * f.at(a, j, i);
    }
    return out;
}

// T_0 X (xi) = X(xi + 1).
inline ComplexProfile unit_shift(const ComplexProfile& x) {
    ComplexProfile out = x;
    for (long j = x.lo(); j <= x.hi(); ++j)
        for (int i = 0; i < x.d; ++i) out.at(j, i) = x.get(j + x.p, i);
    return out;
}

// X_n(xi) = zeta_q^{-n xi} [Pi_n Theta](xi).
inline ComplexProfile modulate(const ComplexProfile& x, long n, long q) {
    ComplexProfile out = x;
    for (long j = x.lo(); j <= x.hi(); ++j) {
        const cplx w = std::polar(1.0, -2.0 * M_PI * double(n) * (double(j) / double(x.p)) / double(q));
        for (int i = 0; i < x.d; ++i) out.at(j, i) *= w;
    }
    return out;
}

// sup |T_0 Pi_n Theta - zeta^n Pi_n T Theta| and sup |T_0 X_n - zeta^{-n xi} Pi_n T Theta| over points whose
// unit shift stays inside the window.
struct CommutationDefect {
    double projection = 0.0;
    double modulated = 0.0;
};

inline CommutationDefect harmonic_commutation_defect(const LimitField& theta, long n) {
    OperatorContext none;
    const RationalCoupling c{theta.q + theta.t, theta.q, 1, theta.t};  // only q and t are read
    const TwistedOperator T = build_twisted_operator(OperatorKind::T_qtheta, none, c, theta.L, theta.d, theta.p0);
    const LimitField Tt = T.apply(theta);
    const ComplexProfile P = harmonic_projection(theta, n), PT = harmonic_projection(Tt, n);
    const ComplexProfile lhs = unit_shift(P);
    const ComplexProfile X = modulate(P, n, theta.q), lhs2 = unit_shift(X), rhs2 = modulate(PT, n, theta.q);
    const cplx zn = std::polar(1.0, 2.0 * M_PI * double(n) / double(theta.q));
    CommutationDefect d;
    for (long j = P.lo(); j + P.p <= P.hi(); ++j)
        for (int i = 0; i < P.d; ++i) {
            d.projection = std::max(d.projection, std::abs(lhs.at(j, i) - zn * PT.at(j, i)));
            d.modulated = std::max(d.modulated, std::abs(lhs2.at(j, i) - rhs2.at(j, i)));
        }
    return d;
}

// ---- limit kernel ----

struct LimitKernelReport {
    double sigma_min = 0.0;
    double sigma_second = 0.0;
    double scale = 0.0;            // Frobenius norm of the window matrix
    double vector_mismatch = 0.0;  // sup |v - pi_perp Phi0+| after normalization and sign alignment
    bool one_dimensional = false;
};

inline LimitKernelReport limit_kernel_check(const OperatorContext& ctx, long q, long t, double rel_tol = 1e-6) {
    const WaveProfile& U0 = ctx.wave->U0;
    const RationalCoupling c{q + t, q, 1, t};
    const TwistedOperator K = build_twisted_operator(OperatorKind::K_qtheta, ctx, c, U0.L, U0.d, U0.p);
    LimitKernelReport rep;
    rep.scale = K.matrix.norm();
    const SingularTriplet s1 = smallest_singular(K.matrix, 80);
    const SingularTriplet s2 = smallest_singular(K.matrix, 80, {s1.right}, 5);
    rep.sigma_min = s1.sigma;
    rep.sigma_second = s2.sigma;
    WaveProfile plus = ctx.wave->Phi_plus.values.empty() ? central_derivative_profile(U0) : ctx.wave->Phi_plus;
    const LimitField ref = replicate_profile(plus, q, t);
    Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(ref.values.data(), Eigen::Index(ref.values.size()));
    r.normalize();
    Eigen::VectorXd v = s1.right.normalized();
    if (v.dot(r) < 0) v = -v;
    rep.vector_mismatch = (v - r).lpNorm<Eigen::Infinity>();
    rep.one_dimensional = rep.sigma_min < rel_tol * rep.scale && rep.sigma_second > rel_tol * rep.scale;
    return rep;
}

// ---- quasi-inverse ----

struct QuasiInverseResult {
    double gamma = 0.0;
    Eigen::VectorXd V;
    double norm_V_Y1 = 0.0;  // sqrt(|V|^2 + |D V|^2) in the scaled norm
    double norm_Psi = 0.0;
    double ratio = 0.0;      // (|gamma| + |V|_{Y1}) / |Psi|
};

// Solves [[L_{k,M}, -pi D U0], [<pi Phi0-, .>, 0]] [V; gamma] = [Psi; 0].
class QuasiInverse {
public:
    QuasiInverse(const OperatorContext& ctx, const RationalCoupling& c, long L) : c_(c), L_(L) {
        if (ctx.wave->Phi_minus.values.empty()) throw std::invalid_argument("wave carries no adjoint kernel profile");
        const SpMat A = assemble_LkM(ctx, c, L);
        n_ = A.rows();
        dU_ = restricted_wave_derivative(ctx, c, L);
        phi_ = restrict_to_grid(ctx.wave->Phi_minus, c, L);
        D_ = assemble_discrete_derivative(*ctx.scheme, c, L, ctx.model->d);
        Triplets T;
        append_matrix(T, A);
        for (long i = 0; i < n_; ++i) {
            if (dU_(i) != 0.0) T.emplace_back(int(i), int(n_), -dU_(i));
            if (phi_(i) != 0.0) T.emplace_back(int(n_), int(i), phi_(i) / double(c.p));
        }
        SpMat B(n_ + 1, n_ + 1);
        B.setFromTriplets(T.begin(), T.end());
        try {
            solver_.emplace(B);
        } catch (const std::exception&) {
            throw SolveError("bordered quasi-inverse matrix is singular at this M");
        }
    }

    const Eigen::VectorXd& wave_derivative() const { return dU_; }
    long size() const { return n_; }

    QuasiInverseResult solve(const Eigen::VectorXd& Psi) {
        if (Psi.size() != n_) throw std::invalid_argument("right-hand side has the wrong length");
        Eigen::VectorXd rhs(n_ + 1);
        rhs.head(n_) = Psi;
        rhs(n_) = 0.0;
        const Eigen::VectorXd x = solver_->solve(rhs);
        QuasiInverseResult r;
        r.V = x.head(n_);
        r.gamma = x(n_);
        const double p = double(c_.p);
        r.norm_V_Y1 = std::sqrt((r.V.squaredNorm() + (D_ * r.V).squaredNorm()) / p);
        r.norm_Psi = std::sqrt(Psi.squaredNorm() / p);
        r.ratio = r.norm_Psi > 0.0 ? (std::abs(r.gamma) + r.norm_V_Y1) / r.norm_Psi : 0.0;
        return r;
    }

private:
    RationalCoupling c_;
    long L_;
    long n_ = 0;
    Eigen::VectorXd dU_, phi_;
    SpMat D_;
    std::optional<SparseSolver> solver_;
};

inline QuasiInverseResult quasi_inverse_solve(const OperatorContext& ctx, const RationalCoupling& c, long L,
                                              const Eigen::VectorXd& Psi) {
    QuasiInverse Q(ctx, c, L);
    return Q.solve(Psi);
}

// ---- spectral convergence diagnostic ----

// sqrt of the smallest generalized eigenvalue of |(L+delta)Phi|^2 + delta^{-2} <pi Phi0-, (L+delta)Phi>^2
// against |Phi|^2 + |D Phi|^2, all in the Y_M inner product (isometric to H_M). The adjoint variant uses
// L^T, D^T and Phi0+.
inline double spectral_convergence_diagnostic(const OperatorContext& ctx, const RationalCoupling& c, long L,
                                              double delta, bool adjoint = false) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    const SpMat Ls = assemble_LkM(ctx, c, L, adjoint);
    const long n = Ls.rows();
    const double w = 1.0 / double(c.p);
    Eigen::MatrixXd B = Eigen::MatrixXd(Ls);
    B.diagonal().array() += delta;
    const Eigen::MatrixXd D = Eigen::MatrixXd(assemble_discrete_derivative(*ctx.scheme, c, L, ctx.model->d, adjoint));
    const Eigen::VectorXd phi = restrict_to_grid(adjoint ? ctx.wave->Phi_plus : ctx.wave->Phi_minus, c, L);
    const Eigen::VectorXd g = w * (B.transpose() * phi);
    Eigen::MatrixXd A = w * (B.transpose() * B) + (g * g.transpose()) / (delta * delta);
    Eigen::MatrixXd N = w * (Eigen::MatrixXd::Identity(n, n) + D.transpose() * D);
    A = 0.5 * (A + A.transpose());
    N = 0.5 * (N + N.transpose());
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, N, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("generalized eigen-solve failed");
    return std::sqrt(std::max(0.0, es.eigenvalues().minCoeff()));
}

// ---- interpolation on H_M fields ----

// Order 0: Phi(zeta, xi^-) with xi^- = floor(M xi)/M; order 1: linear between xi^- and xi^+ = xi^- + 1/M.
inline double interpolate_field(const PeriodicField& f, int order, long a, double xi, int i) {
    if (order != 0 && order != 1) throw std::invalid_argument("interpolation order must be 0 or 1");
    const double M = f.coupling.M();
    const double s = xi * M;
    long b = long(std::floor(s));
    // grid points reproduce their own sample
    if (std::abs(s - std::round(s)) < 1e-12) b = long(std::round(s));
    if (b < f.b_lo || b > f.b_hi || (order == 1 && b + 1 > f.b_hi && double(b) != s))
        throw std::out_of_range("interpolation query outside the field window");
    const double lo = f.get(a, b, i);
    if (order == 0) return lo;
    const double frac = s - double(b);
    if (frac == 0.0) return lo;
    return (1.0 - frac) * lo + frac * f.get(a, b + 1, i);
}

// ---- laplacian limit probe ----

using FieldFunction = std::function<double(long a, double xi, int i)>;

struct LimitProbeReport {
    std::vector<double> M;
    std::vector<double> norms;
    double tail_bound = 0.0;  // omitted-kernel contribution, 4 tau (tail of sum alpha) |Z|
    bool monotone = false;
};

// |Delta_{M_j} Z - Delta_{q,theta} Z| in L^2(R, l2_{q,perp}) by trapezoid quadrature on [-R, R].
inline LimitProbeReport laplacian_limit_probe(const InteractionKernel& k, const std::vector<RationalCoupling>& seq,
                                              const FieldFunction& Z, int d, double R, double h = 1.0 / 256.0) {
    LimitProbeReport rep;
    if (seq.empty()) return rep;
    const long q = seq.front().q, t = seq.front().t;
    for (const auto& c : seq)
        if (c.q != q || c.t != t) throw std::invalid_argument("every coupling in the sequence must share q and theta");
    const long nodes = long(std::round(2.0 * R / h));
    double znorm2 = 0.0;
    for (long s = 0; s <= nodes; ++s) {
        const double x = -R + h * double(s), wq = (s == 0 || s == nodes) ? 0.5 * h : h;
        for (long a = 0; a < q; ++a)
            for (int i = 0; i < d; ++i) znorm2 += wq * Z(a, x, i) * Z(a, x, i) / double(q);
    }
    for (const auto& c : seq) {
        double acc = 0.0;
        for (long s = 0; s <= nodes; ++s) {
            const double x = -R + h * double(s), wq = (s == 0 || s == nodes) ? 0.5 * h : h;
            for (long a = 0; a < q; ++a)
                for (int i = 0; i < k.d_diff && i < d; ++i) {
                    double diff = 0.0;
                    for (int m = -k.m_max; m <= k.m_max; ++m) {
                        if (m == 0) continue;
                        const double al = k.alpha(std::abs(m), i);
                        // twisted shift on H_M: zeta + m theta with the seam moving 1/M per wrap
                        const long raw = a + long(m) * t;
                        const long wrapped = ((raw % q) + q) % q, wraps = (raw - wrapped) / q;
                        const double xm = x + double(long(m) * c.n + wraps) / c.M();
                        diff += al * (Z(wrapped, xm, i) - Z(wrapped, x + double(m), i));
                    }
                    diff *= k.tau;
                    acc += wq * diff * diff / double(q);
                }
        }
        rep.M.push_back(c.M());
        rep.norms.push_back(std::sqrt(acc));
    }
    rep.monotone = true;
    for (std::size_t i = 1; i < rep.norms.size(); ++i)
        if (!(rep.norms[i] < rep.norms[i - 1])) rep.monotone = false;
    rep.tail_bound = 4.0 * k.tau * k.tail_bound * std::sqrt(znorm2);
    return rep;
}

// Couplings p = n q + t for each n: fixed q and rotation number t/q.
inline std::vector<RationalCoupling> fixed_rotation_sequence(long q, long t, const std::vector<long>& ns) {
    std::vector<RationalCoupling> out;
    for (long n : ns) {
        const RationalCoupling c = make_rational(n * q + t, q);
        if (c.t != t) throw std::invalid_argument("sequence member has a different rotation number");
        out.push_back(c);
    }
    return out;
}

// ---- random fields and the quadratic form ----

// Uniform values in [-1, 1] on interior rows b in [b_lo + margin, b_hi - margin], zero elsewhere.
inline PeriodicField random_field(const RationalCoupling& c, int d, long L, long margin, std::mt19937_64& rng) {
    PeriodicField f = field_for_window(c, d, L);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (long b = f.b_lo + margin; b <= f.b_hi - margin; ++b)
        for (long a = 0; a < c.q; ++a)
            for (int i = 0; i < d; ++i) f.at(a, b, i) = U(rng);
    return f;
}

// Uniform samples in [-1, 1] at least `margin` away from the window ends, smoothed by one application of
// the nonlocal Laplacian and added back: Phi = X + Delta_0 X / (4 tau).
inline WaveProfile random_profile(long p, long L, int d, double margin, std::mt19937_64& rng,
                                  const InteractionKernel* smoother = nullptr) {
    WaveProfile w(p, L, d, Extension::ConstantLimits);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const long e = long(std::ceil(margin * double(p)));
    for (long j = w.lo() + e; j <= w.hi() - e; ++j)
        for (int i = 0; i < d; ++i) w.at(j, i) = U(rng);
    if (smoother && smoother->d == d) {
        const WaveProfile lap = apply_nonlocal_laplacian(*smoother, w);
        for (std::size_t s = 0; s < w.values.size(); ++s) w.values[s] += lap.values[s] / (4.0 * smoother->tau);
    }
    return w;
}

// max over trials of <Delta_M Phi, Phi>_{H_M} for random compactly supported fields.
inline double quadratic_form_negativity(const InteractionKernel& k, const RationalCoupling& c, long L, int trials,
                                        unsigned long long seed) {
    OperatorContext ctx;
    ctx.kernel = &k;
    const TwistedOperator D = build_twisted_operator(OperatorKind::Delta_M, ctx, c, L, k.d);
    std::mt19937_64 rng(seed);
    double worst = -std::numeric_limits<double>::infinity();
    const long margin = (k.m_max * c.p) / c.q + 2;
    for (int s = 0; s < trials; ++s) {
        const PeriodicField f = random_field(c, k.d, L, margin, rng);
        worst = std::max(worst, inner_product_field(D.apply(f), f));
    }
    return worst;
}

// ---- quadrature and discrete-derivative constants ----

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs two or more matching samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double a = std::log(x[i]), b = std::log(std::max(y[i], 1e-300));
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// |M^{-1} sum_{j in Z, |j/M| <= R} f(j/M) g(j/M) - exact|.
inline double riemann_sum_error(const std::function<double(double)>& f, const std::function<double(double)>& g,
                                double exact, double M, double R) {
    const long J = long(std::floor(R * M));
    long double s = 0.0L;
    for (long j = -J; j <= J; ++j) {
        const double x = double(j) / M;
        s += (long double)(f(x) * g(x));
    }
    return std::abs(double(s / (long double)M) - exact);
}

struct FormConstant {
    double K = 0.0;        // max M |<Phi, D Phi>| / |D Phi|^2
    double K_lower = 0.0;  // max M (-<Phi, D Phi>)^+ / |D Phi|^2
};

// Random smoothed compactly supported profiles on the grid 1/M (q = 1).
inline FormConstant derivative_form_constant(const BdfScheme& s, long M, const InteractionKernel& smoother,
                                             int trials, unsigned long long seed, long L = 12) {
    const RationalCoupling c = make_rational(M, 1);
    std::mt19937_64 rng(seed);
    FormConstant out;
    for (int t = 0; t < trials; ++t) {
        const WaveProfile phi = random_profile(M, L, 1, 3.0 + double(s.k) + double(smoother.m_max), rng, &smoother);
        const WaveProfile D = apply_discrete_derivative(s, c, phi);
        const double ip = inner_product_scaled(phi, D), n2 = inner_product_scaled(D, D);
        if (n2 == 0.0) continue;
        out.K = std::max(out.K, double(M) * std::abs(ip) / n2);
        out.K_lower = std::max(out.K_lower, double(M) * std::max(0.0, -ip) / n2);
    }
    return out;
}

// Coordinate-list dump "row col value" of an operator matrix.
inline std::string matrix_to_coo(const SpMat& A) {
    std::ostringstream os;
    os.precision(17);
    for (int col = 0; col < A.outerSize(); ++col)
        for (SpMat::InnerIterator e(A, col); e; ++e) os << e.row() << ' ' << e.col() << ' ' << e.value() << '\n';
    return os.str();
}

}  // namespace latticewave
