#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace latticewave {

using json = nlohmann::json;

// M = p/q with the shift count n and rotation number theta = t/q, t = p - n q in (0, q].
struct RationalCoupling {
    long p = 1;
    long q = 1;
    long n = 0;
    long t = 1;

    double M() const { return double(p) / double(q); }
    double theta() const { return double(t) / double(q); }
};

inline RationalCoupling make_rational(long p, long q) {
    if (p < 1 || q < 1)
        throw std::invalid_argument("coupling requires positive p and q");
    if (std::gcd(p, q) != 1)
        throw std::invalid_argument("coupling requires gcd(p,q)=1, got p=" + std::to_string(p) +
                                    " q=" + std::to_string(q));
    if (p < q)
        throw std::invalid_argument("coupling p/q is not in M_q (needs p >= q so that M = p/q >= 1), got p=" +
                                    std::to_string(p) + " q=" + std::to_string(q));
    RationalCoupling c;
    c.p = p;
    c.q = q;
    // theta in (0,1] means n = ceil(p/q) - 1
    c.n = (p + q - 1) / q - 1;
    c.t = p - c.n * q;
    return c;
}

enum class Extension { ConstantLimits, Neumann, Linear };

inline std::string to_string(Extension e) {
    switch (e) {
    case Extension::ConstantLimits: return "constant";
    case Extension::Neumann: return "neumann";
    case Extension::Linear: return "linear";
    }
    return "constant";
}

inline Extension extension_from_string(const std::string& s) {
    if (s == "constant") return Extension::ConstantLimits;
    if (s == "neumann") return Extension::Neumann;
    if (s == "linear") return Extension::Linear;
    throw std::invalid_argument("unknown extension rule '" + s + "'");
}

// A sample outside the window is an affine combination of at most two window samples.
struct Tap {
    long i0 = -1;
    double w0 = 0.0;
    long i1 = -1;
    double w1 = 0.0;
    double constant = 0.0;
};

// Field sampled at xi = j/p for j in [-L p, L p].
struct WaveProfile {
    long p = 1;
    long q = 1;
    long L = 0;
    int d = 1;
    std::vector<double> P_minus;
    std::vector<double> P_plus;
    Extension extension = Extension::ConstantLimits;
    std::vector<double> values;  // point-major: values[(j - lo) * d + i]

    WaveProfile() = default;
    WaveProfile(long p_, long L_, int d_, Extension ext = Extension::ConstantLimits)
        : p(p_), L(L_), d(d_), P_minus(d_, 0.0), P_plus(d_, 0.0), extension(ext),
          values(std::size_t((2 * L_ * p_ + 1) * d_), 0.0) {}

    long size() const { return 2 * L * p + 1; }
    long lo() const { return -L * p; }
    long hi() const { return L * p; }
    double xi(long j) const { return double(j) / double(p); }
    bool inside(long j) const { return j >= lo() && j <= hi(); }

    double& at(long j, int i) { return values[std::size_t((j - lo()) * d + i)]; }
    double at(long j, int i) const { return values[std::size_t((j - lo()) * d + i)]; }

    // Flat index of (j, i) inside the window.
    long flat(long j, int i) const { return (j - lo()) * d + i; }

    Tap tap(long j, int i) const {
        Tap tp;
        if (inside(j)) {
            tp.i0 = flat(j, i);
            tp.w0 = 1.0;
            return tp;
        }
        const bool left = j < lo();
        switch (extension) {
        case Extension::ConstantLimits:
            tp.constant = left ? P_minus[std::size_t(i)] : P_plus[std::size_t(i)];
            break;
        case Extension::Neumann:
            tp.i0 = flat(left ? lo() : hi(), i);
            tp.w0 = 1.0;
            break;
        case Extension::Linear: {
            const long e = left ? lo() : hi();
            const long e2 = left ? lo() + 1 : hi() - 1;
            const double s = double(j - e) / double(e2 - e);
            tp.i0 = flat(e, i);
            tp.w0 = 1.0 - s;
            tp.i1 = flat(e2, i);
            tp.w1 = s;
            break;
        }
        }
        return tp;
    }

    double value(long j, int i) const {
        if (inside(j)) return at(j, i);
        return eval_tap(tap(j, i), values.data());
    }

    static double eval_tap(const Tap& tp, const double* x) {
        double v = tp.constant;
        if (tp.i0 >= 0) v += tp.w0 * x[tp.i0];
        if (tp.i1 >= 0) v += tp.w1 * x[tp.i1];
        return v;
    }

    // Same window and metadata, zero values.
    WaveProfile zeros_like() const {
        WaveProfile z = *this;
        std::fill(z.values.begin(), z.values.end(), 0.0);
        return z;
    }
};

inline void require_same_grid(const WaveProfile& a, const WaveProfile& b) {
    if (a.p != b.p || a.L != b.L || a.d != b.d)
        throw std::invalid_argument("profiles live on different grids");
}

// mu^{-1} sum <u(xi), v(xi)> over the window.
inline double inner_product_scaled(const WaveProfile& u, const WaveProfile& v, double mu) {
    require_same_grid(u, v);
    double s = 0.0;
    for (std::size_t k = 0; k < u.values.size(); ++k) s += u.values[k] * v.values[k];
    return s / mu;
}

inline double inner_product_scaled(const WaveProfile& u, const WaveProfile& v) {
    return inner_product_scaled(u, v, double(u.p));
}

inline double norm_scaled(const WaveProfile& u) { return std::sqrt(inner_product_scaled(u, u)); }

inline double sup_norm(const WaveProfile& u) {
    double m = 0.0;
    for (double v : u.values) m = std::max(m, std::abs(v));
    return m;
}

// q^{-1}[a(0)b(0)/2 + a(1)b(1)/2 + interior], both sampled at zeta = 0, 1/q, ..., 1.
inline double inner_product_transverse(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("transverse vectors need q+1 matching samples");
    const std::size_t q = a.size() - 1;
    double s = 0.5 * (a[0] * b[0] + a[q] * b[q]);
    for (std::size_t k = 1; k < q; ++k) s += a[k] * b[k];
    return s / double(q);
}

// Element of H_M: Phi(zeta = a/q, xi = b q/p) stored for a in [0, q), b in [b_lo, b_hi].
// Values at zeta = 1 come from the seam Phi(1, xi) = Phi(0, xi + 1/M).
struct PeriodicField {
    RationalCoupling coupling;
    int d = 1;
    long b_lo = 0;
    long b_hi = 0;
    std::vector<double> values;  // ((b - b_lo) * q + a) * d + i

    PeriodicField() = default;
    PeriodicField(const RationalCoupling& c, int d_, long blo, long bhi)
        : coupling(c), d(d_), b_lo(blo), b_hi(bhi),
          values(std::size_t((bhi - blo + 1) * c.q * d_), 0.0) {}

    long nb() const { return b_hi - b_lo + 1; }
    bool inside(long a, long b) const { return a >= 0 && a < coupling.q && b >= b_lo && b <= b_hi; }

    // Reduce (a, b) with arbitrary integer a to the stored range via the seam convention.
    void normalize(long& a, long& b) const {
        const long q = coupling.q;
        long s = a >= 0 ? a / q : -((-a + q - 1) / q);
        a -= s * q;
        b += s;
    }

    long flat(long a, long b, int i) const { return ((b - b_lo) * coupling.q + a) * d + i; }

    double& at(long a, long b, int i) { return values[std::size_t(flat(a, b, i))]; }
    double at(long a, long b, int i) const { return values[std::size_t(flat(a, b, i))]; }

    // Read with seam reduction; samples beyond the window read as zero.
    double get(long a, long b, int i) const {
        normalize(a, b);
        if (b < b_lo || b > b_hi) return 0.0;
        return at(a, b, i);
    }

    PeriodicField zeros_like() const {
        PeriodicField z = *this;
        std::fill(z.values.begin(), z.values.end(), 0.0);
        return z;
    }
};

// H_M inner product M^{-1} sum_xi <.,.>_{l2_{q,perp}} with zeta = 1 read through the seam.
inline double inner_product_field(const PeriodicField& u, const PeriodicField& v) {
    const long q = u.coupling.q;
    double s = 0.0;
    std::vector<double> a(static_cast<std::size_t>(q + 1)), b(std::size_t(q + 1));
    for (long bb = u.b_lo; bb <= u.b_hi; ++bb) {
        for (int i = 0; i < u.d; ++i) {
            for (long z = 0; z <= q; ++z) {
                a[std::size_t(z)] = u.get(z, bb, i);
                b[std::size_t(z)] = v.get(z, bb, i);
            }
            s += inner_product_transverse(a, b);
        }
    }
    return s / u.coupling.M();
}

inline double norm_field(const PeriodicField& u) { return std::sqrt(inner_product_field(u, u)); }

// Field rows b covering the profile window: j = b q + a.
inline PeriodicField field_for_window(const RationalCoupling& c, int d, long L) {
    const long lo = -L * c.p, hi = L * c.p;
    auto fdiv = [](long x, long y) { return x >= 0 ? x / y : -((-x + y - 1) / y); };
    return PeriodicField(c, d, fdiv(lo, c.q), fdiv(hi, c.q));
}

// [J_M Phi](zeta, xi) = Phi(xi + zeta/M), an isometry Y_M -> H_M.
inline PeriodicField embed_isometry(const WaveProfile& phi, const RationalCoupling& c) {
    if (phi.p != c.p)
        throw std::invalid_argument("profile spacing does not match the coupling's p");
    PeriodicField f = field_for_window(c, phi.d, phi.L);
    for (long b = f.b_lo; b <= f.b_hi; ++b)
        for (long a = 0; a < c.q; ++a) {
            const long j = b * c.q + a;
            for (int i = 0; i < phi.d; ++i) f.at(a, b, i) = phi.inside(j) ? phi.at(j, i) : 0.0;
        }
    return f;
}

// Inverse of embed_isometry on the profile window.
inline WaveProfile flatten_field(const PeriodicField& f, const WaveProfile& like) {
    WaveProfile out = like.zeros_like();
    for (long j = out.lo(); j <= out.hi(); ++j)
        for (int i = 0; i < out.d; ++i) {
            long a = j, b = 0;
            f.normalize(a, b);
            out.at(j, i) = f.get(a, b, i);
        }
    return out;
}

// [pi f](xi) = f(xi) on p^{-1}Z within [-L, L].
inline WaveProfile restrict_function(const std::function<std::vector<double>(double)>& f, long p,
                                     long L, int d, Extension ext = Extension::ConstantLimits) {
    WaveProfile w(p, L, d, ext);
    for (long j = w.lo(); j <= w.hi(); ++j) {
        auto v = f(w.xi(j));
        for (int i = 0; i < d; ++i) w.at(j, i) = v[std::size_t(i)];
    }
    return w;
}

inline WaveProfile restrict_scalar(const std::function<double(double)>& f, long p, long L,
                                   Extension ext = Extension::ConstantLimits) {
    return restrict_function([&](double x) { return std::vector<double>{f(x)}; }, p, L, 1, ext);
}

// Cubic (Catmull-Rom) interpolation of a profile at an arbitrary xi.
inline double interpolate_cubic(const WaveProfile& w, double x, int i) {
    const double s = x * double(w.p);
    const long j = long(std::floor(s));
    const double t = s - double(j);
    const double y0 = w.value(j - 1, i), y1 = w.value(j, i), y2 = w.value(j + 1, i),
                 y3 = w.value(j + 2, i);
    return y1 + 0.5 * t *
                    (y2 - y0 + t * (2.0 * y0 - 5.0 * y1 + 4.0 * y2 - y3 + t * (3.0 * (y1 - y2) + y3 - y0)));
}

inline double interpolate_linear(const WaveProfile& w, double x, int i) {
    const double s = x * double(w.p);
    const long j = long(std::floor(s));
    const double t = s - double(j);
    return (1.0 - t) * w.value(j, i) + t * w.value(j + 1, i);
}

// Resample onto another grid spacing and window, keeping limits and extension.
inline WaveProfile resample(const WaveProfile& w, long p, long L, bool cubic = true) {
    WaveProfile out(p, L, w.d, w.extension);
    out.q = w.q;
    out.P_minus = w.P_minus;
    out.P_plus = w.P_plus;
    for (long j = out.lo(); j <= out.hi(); ++j)
        for (int i = 0; i < w.d; ++i)
            out.at(j, i) = cubic ? interpolate_cubic(w, out.xi(j), i) : interpolate_linear(w, out.xi(j), i);
    return out;
}

// Sampled translate xi -> Phi(xi + s), values beyond the window via the extension rule.
inline WaveProfile translate(const WaveProfile& w, double s) {
    WaveProfile out = w;
    for (long j = w.lo(); j <= w.hi(); ++j)
        for (int i = 0; i < w.d; ++i) out.at(j, i) = interpolate_linear(w, w.xi(j) + s, i);
    return out;
}

inline json profile_to_json(const WaveProfile& w) {
    return json{{"p", w.p},
                {"q", w.q},
                {"L", w.L},
                {"d", w.d},
                {"P_minus", w.P_minus},
                {"P_plus", w.P_plus},
                {"extension", to_string(w.extension)},
                {"values", w.values}};
}

inline WaveProfile profile_from_json(const json& j) {
    WaveProfile w(j.at("p").get<long>(), j.at("L").get<long>(), j.at("d").get<int>(),
                  extension_from_string(j.at("extension").get<std::string>()));
    w.q = j.value("q", 1L);
    w.P_minus = j.at("P_minus").get<std::vector<double>>();
    w.P_plus = j.at("P_plus").get<std::vector<double>>();
    w.values = j.at("values").get<std::vector<double>>();
    if (long(w.values.size()) != w.size() * w.d)
        throw std::invalid_argument("profile values length does not equal (2Lp+1)*d");
    if (long(w.P_minus.size()) != w.d || long(w.P_plus.size()) != w.d)
        throw std::invalid_argument("profile limits have wrong dimension");
    return w;
}

inline std::string profile_to_csv(const WaveProfile& w) {
    std::ostringstream os;
    os.precision(17);
    os << "xi";
    for (int i = 0; i < w.d; ++i) os << ",u" << i;
    os << "\n";
    for (long j = w.lo(); j <= w.hi(); ++j) {
        os << w.xi(j);
        for (int i = 0; i < w.d; ++i) os << "," << w.at(j, i);
        os << "\n";
    }
    return os.str();
}

}  // namespace latticewave
