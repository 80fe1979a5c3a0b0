#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <boost/rational.hpp>

#include "grid.hpp"

namespace latticewave {

using Rational = boost::rational<long long>;

inline double to_double(const Rational& r) { return double(r.numerator()) / double(r.denominator()); }

// mu_0..mu_k multiply the samples at offsets -(k-n)/M; beta normalizes the derivative.
struct BdfScheme {
    int k = 1;
    std::vector<Rational> mu;
    Rational beta;

    std::vector<double> mu_double() const {
        std::vector<double> out;
        for (const auto& m : mu) out.push_back(to_double(m));
        return out;
    }
    double beta_double() const { return to_double(beta); }
};

inline BdfScheme bdf_scheme(int k) {
    BdfScheme s;
    s.k = k;
    auto R = [](long long a, long long b) { return Rational(a, b); };
    switch (k) {
    case 1:
        s.mu = {R(-1, 1), R(1, 1)};
        s.beta = R(1, 1);
        break;
    case 2:
        s.mu = {R(1, 3), R(-4, 3), R(1, 1)};
        s.beta = R(2, 3);
        break;
    case 3:
        s.mu = {R(-2, 11), R(9, 11), R(-18, 11), R(1, 1)};
        s.beta = R(6, 11);
        break;
    case 4:
        s.mu = {R(3, 25), R(-16, 25), R(36, 25), R(-48, 25), R(1, 1)};
        s.beta = R(12, 25);
        break;
    case 5:
        s.mu = {R(-12, 137), R(75, 137), R(-200, 137), R(300, 137), R(-300, 137), R(1, 1)};
        s.beta = R(60, 137);
        break;
    case 6:
        s.mu = {R(10, 147), R(-72, 147), R(225, 147), R(-400, 147), R(450, 147), R(-360, 147), R(1, 1)};
        s.beta = R(60, 147);
        break;
    default:
        throw std::invalid_argument("BDF order must lie in 1..6, got " + std::to_string(k));
    }
    return s;
}

// Offset in grid points of one time step 1/M on a grid of spacing 1/p with M = p/q.
inline long step_offset(const WaveProfile& w, const RationalCoupling& c) {
    if (w.p % c.p != 0)
        throw std::invalid_argument("grid spacing 1/" + std::to_string(w.p) +
                                    " does not divide the step 1/M = " + std::to_string(c.q) + "/" +
                                    std::to_string(c.p));
    return c.q * (w.p / c.p);
}

// [D_{k,M} Phi](xi_j) = beta^{-1} M sum_n mu_n Phi(xi_j - (k-n)/M).
inline std::vector<double> discrete_derivative(const BdfScheme& s, const RationalCoupling& c,
                                               const WaveProfile& w, long j) {
    const long off = step_offset(w, c);
    const auto mu = s.mu_double();
    const double scale = c.M() / s.beta_double();
    std::vector<double> out(std::size_t(w.d), 0.0);
    for (int i = 0; i < w.d; ++i) {
        double acc = 0.0;
        for (int n = 0; n <= s.k; ++n) acc += mu[std::size_t(n)] * w.value(j - (s.k - n) * off, i);
        out[std::size_t(i)] = scale * acc;
    }
    return out;
}

// [D*_{k,M} Phi](xi_j) = beta^{-1} M sum_n mu_n Phi(xi_j + (k-n)/M).
inline std::vector<double> adjoint_discrete_derivative(const BdfScheme& s, const RationalCoupling& c,
                                                       const WaveProfile& w, long j) {
    const long off = step_offset(w, c);
    const auto mu = s.mu_double();
    const double scale = c.M() / s.beta_double();
    std::vector<double> out(std::size_t(w.d), 0.0);
    for (int i = 0; i < w.d; ++i) {
        double acc = 0.0;
        for (int n = 0; n <= s.k; ++n) acc += mu[std::size_t(n)] * w.value(j + (s.k - n) * off, i);
        out[std::size_t(i)] = scale * acc;
    }
    return out;
}

inline WaveProfile apply_discrete_derivative(const BdfScheme& s, const RationalCoupling& c,
                                             const WaveProfile& w, bool adjoint = false) {
    WaveProfile out = w.zeros_like();
    for (long j = w.lo(); j <= w.hi(); ++j) {
        auto v = adjoint ? adjoint_discrete_derivative(s, c, w, j) : discrete_derivative(s, c, w, j);
        for (int i = 0; i < w.d; ++i) out.at(j, i) = v[std::size_t(i)];
    }
    return out;
}

// Same stencil evaluated on an analytic function at an arbitrary point.
inline double discrete_derivative_fn(const BdfScheme& s, double M, const std::function<double(double)>& f,
                                     double xi) {
    const auto mu = s.mu_double();
    double acc = 0.0;
    for (int n = 0; n <= s.k; ++n) acc += mu[std::size_t(n)] * f(xi - double(s.k - n) / M);
    return M / s.beta_double() * acc;
}

struct ConvergenceProbe {
    std::vector<double> M;
    std::vector<double> errors;
    double slope = 0.0;  // least-squares slope of -log(error) against log(M)
};

// Sup error of D_{k,M} f against f' on sample points of [a, b].
inline ConvergenceProbe convergence_order_probe(const BdfScheme& s, const std::function<double(double)>& f,
                                                const std::function<double(double)>& fprime,
                                                const std::vector<double>& M_list, double a = -3.0,
                                                double b = 3.0, int samples = 601) {
    ConvergenceProbe pr;
    for (double M : M_list) {
        double err = 0.0;
        for (int t = 0; t < samples; ++t) {
            const double x = a + (b - a) * double(t) / double(samples - 1);
            err = std::max(err, std::abs(discrete_derivative_fn(s, M, f, x) - fprime(x)));
        }
        pr.M.push_back(M);
        pr.errors.push_back(err);
    }
    const std::size_t n = pr.M.size();
    if (n >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = std::log(pr.M[i]), y = -std::log(std::max(pr.errors[i], 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        pr.slope = (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
    }
    return pr;
}

}  // namespace latticewave
