#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "grid.hpp"

namespace latticewave {

// Diagonal coupling matrices alpha_1..alpha_{m_max}, each stored as its d diagonal entries.
struct InteractionKernel {
    int d = 1;
    int d_diff = 1;
    double tau = 1.0;
    double nu = 1.0;
    int m_max = 0;
    std::vector<std::vector<double>> coefficients;  // coefficients[m-1][i]
    double tail_bound = 0.0;

    double alpha(int m, int i) const { return coefficients[std::size_t(m - 1)][std::size_t(i)]; }
};

inline void check_kernel_args(int d, int d_diff, double tau) {
    if (d < 1 || d_diff < 1 || d_diff > d)
        throw std::invalid_argument("kernel requires 1 <= d_diff <= d");
    if (!(tau > 0.0)) throw std::invalid_argument("kernel requires tau > 0");
}

// sum_{j>=1} j^2 e^{-j^2}, summed until the terms drop below 1e-16.
inline double gaussian_normalizer() {
    double s = 0.0;
    for (int j = 1;; ++j) {
        const double term = double(j) * j * std::exp(-double(j) * j);
        s += term;
        if (term < 1e-16) break;
    }
    return s;
}

inline InteractionKernel build_gaussian_kernel(int d, int d_diff, double tau, double tail_tol = 1e-14) {
    check_kernel_args(d, d_diff, tau);
    if (!(tail_tol > 0.0)) throw std::invalid_argument("tail tolerance must be positive");
    const double S = gaussian_normalizer();
    auto m2a = [&](int m) { return double(m) * m * std::exp(-double(m) * m) / S; };
    auto tail_from = [&](int m0) {
        double t = 0.0;
        for (int m = m0;; ++m) {
            const double v = m2a(m);
            t += v;
            if (v < 1e-300 || v < t * 1e-17) break;
        }
        return t;
    };
    int m_max = 1;
    while (tail_from(m_max + 1) >= tail_tol) ++m_max;

    InteractionKernel k;
    k.d = d;
    k.d_diff = d_diff;
    k.tau = tau;
    k.nu = 1.0;
    k.m_max = m_max;
    k.tail_bound = tail_from(m_max + 1);
    for (int m = 1; m <= m_max; ++m) {
        std::vector<double> a(std::size_t(d), 0.0);
        for (int i = 0; i < d_diff; ++i) a[std::size_t(i)] = std::exp(-double(m) * m) / S;
        k.coefficients.push_back(a);
    }
    return k;
}

inline InteractionKernel build_nearest_neighbor_kernel(int d, int d_diff, double tau) {
    check_kernel_args(d, d_diff, tau);
    InteractionKernel k;
    k.d = d;
    k.d_diff = d_diff;
    k.tau = tau;
    k.nu = 1.0;
    k.m_max = 1;
    std::vector<double> a(std::size_t(d), 0.0);
    for (int i = 0; i < d_diff; ++i) a[std::size_t(i)] = 1.0;
    k.coefficients.push_back(a);
    return k;
}

// A_i(z) = sum_m alpha_m^{(i,i)} (1 - cos(m z)), i zero-based.
inline double symbol(const InteractionKernel& k, int i, double z) {
    if (i < 0 || i >= k.d_diff) throw std::out_of_range("symbol component outside the diffusive block");
    double s = 0.0;
    for (int m = 1; m <= k.m_max; ++m) s += k.alpha(m, i) * (1.0 - std::cos(m * z));
    return s;
}

// Symbol for any component; zero for non-diffusive ones.
inline double symbol_any(const InteractionKernel& k, int i, double z) {
    return i < k.d_diff ? symbol(k, i, z) : 0.0;
}

struct Hs1Report {
    std::vector<double> min_symbol;      // per diffusive component, over the z grid
    std::vector<double> argmin_symbol;
    std::vector<double> normalization_residual;
    double decay_sum = 0.0;              // sum |alpha_m| e^{m nu}
    double tail_bound = 0.0;
    bool diagonal_block_ok = true;       // alpha^{(j,j)} = 0 for j >= d_diff
    bool symbol_positive = true;
    bool normalized = true;
    bool tail_ok = true;
    bool pass = true;
};

inline Hs1Report check_hs1(const InteractionKernel& k, int z_samples, double tail_tol = 1e-14,
                           double norm_tol = 1e-12) {
    if (z_samples < 16) throw std::invalid_argument("check_hs1 needs at least 16 z samples");
    Hs1Report r;
    for (int m = 1; m <= k.m_max; ++m)
        for (int j = k.d_diff; j < k.d; ++j)
            if (k.alpha(m, j) != 0.0) r.diagonal_block_ok = false;
    for (int i = 0; i < k.d_diff; ++i) {
        double mn = std::numeric_limits<double>::infinity(), arg = 0.0;
        for (int s = 1; s <= z_samples; ++s) {
            const double z = 2.0 * M_PI * double(s) / double(z_samples + 1);
            const double a = symbol(k, i, z);
            if (a < mn) {
                mn = a;
                arg = z;
            }
        }
        r.min_symbol.push_back(mn);
        r.argmin_symbol.push_back(arg);
        if (!(mn > 0.0)) r.symbol_positive = false;
        double n2 = 0.0;
        for (int m = 1; m <= k.m_max; ++m) n2 += k.alpha(m, i) * double(m) * m;
        r.normalization_residual.push_back(std::abs(n2 - 1.0));
        if (std::abs(n2 - 1.0) > norm_tol) r.normalized = false;
    }
    for (int m = 1; m <= k.m_max; ++m) {
        double amax = 0.0;
        for (int i = 0; i < k.d; ++i) amax = std::max(amax, std::abs(k.alpha(m, i)));
        r.decay_sum += amax * std::exp(m * k.nu);
    }
    r.tail_bound = k.tail_bound;
    r.tail_ok = std::isfinite(r.decay_sum) && k.nu > 0.0 && k.tail_bound < tail_tol;
    r.pass = r.diagonal_block_ok && r.symbol_positive && r.normalized && r.tail_ok;
    return r;
}

// tau sum_m alpha_m [Phi(xi+m) + Phi(xi-m) - 2 Phi(xi)], shifts by m are offsets m p.
inline WaveProfile apply_nonlocal_laplacian(const InteractionKernel& k, const WaveProfile& phi) {
    if (phi.d != k.d) throw std::invalid_argument("profile dimension does not match kernel");
    if (phi.L < k.m_max) throw std::invalid_argument("window shorter than 2 m_max");
    WaveProfile out = phi.zeros_like();
    for (long j = phi.lo(); j <= phi.hi(); ++j)
        for (int i = 0; i < k.d_diff; ++i) {
            double s = 0.0;
            const double c = phi.at(j, i);
            for (int m = 1; m <= k.m_max; ++m) {
                const long o = m * phi.p;
                s += k.alpha(m, i) * (phi.value(j + o, i) + phi.value(j - o, i) - 2.0 * c);
            }
            out.at(j, i) = k.tau * s;
        }
    return out;
}

inline json kernel_to_json(const InteractionKernel& k) {
    return json{{"d", k.d},        {"d_diff", k.d_diff},
                {"tau", k.tau},    {"nu", k.nu},
                {"m_max", k.m_max}, {"coefficients", k.coefficients},
                {"tail_bound", k.tail_bound}};
}

inline InteractionKernel kernel_from_json(const json& j) {
    InteractionKernel k;
    k.d = j.at("d").get<int>();
    k.d_diff = j.at("d_diff").get<int>();
    k.tau = j.at("tau").get<double>();
    k.nu = j.at("nu").get<double>();
    k.m_max = j.at("m_max").get<int>();
    k.coefficients = j.at("coefficients").get<std::vector<std::vector<double>>>();
    k.tail_bound = j.at("tail_bound").get<double>();
    check_kernel_args(k.d, k.d_diff, k.tau);
    if (int(k.coefficients.size()) != k.m_max)
        throw std::invalid_argument("kernel coefficient list length differs from m_max");
    for (const auto& a : k.coefficients)
        if (int(a.size()) != k.d) throw std::invalid_argument("kernel coefficient has wrong dimension");
    return k;
}

}  // namespace latticewave
