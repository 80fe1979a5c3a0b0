#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "latticewave/grid.hpp"

using namespace latticewave;

namespace {

WaveProfile random_compact(const RationalCoupling& c, long L, int d, std::mt19937_64& rng) {
    WaveProfile w(c.p, L, d);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (long j = w.lo() + 2; j <= w.hi() - 2; ++j)
        for (int i = 0; i < d; ++i) w.at(j, i) = U(rng);
    return w;
}

const std::vector<std::pair<long, long>> kCouplings{{3, 1}, {8, 5}, {7, 3}, {16, 5}};

}  // namespace

TEST(Rational, ShiftCountAndRotationNumber) {
    const RationalCoupling a = make_rational(8, 5);
    EXPECT_EQ(a.n, 1);
    EXPECT_EQ(a.t, 3);
    EXPECT_DOUBLE_EQ(a.M(), 1.6);
    const RationalCoupling b = make_rational(3, 1);
    EXPECT_EQ(b.n, 2);
    EXPECT_EQ(b.t, 1);
    EXPECT_DOUBLE_EQ(b.theta(), 1.0);
    const RationalCoupling c = make_rational(16, 5);
    EXPECT_EQ(c.n, 3);
    EXPECT_EQ(c.t, 1);
}

TEST(Rational, UnitStepIdentity) {
    // 1 = (n + theta) / M for every admissible pair
    for (long p = 1; p <= 30; ++p)
        for (long q = 1; q <= p; ++q) {
            if (std::gcd(p, q) != 1) continue;
            const RationalCoupling c = make_rational(p, q);
            EXPECT_NEAR((double(c.n) + c.theta()) / c.M(), 1.0, 1e-15);
            EXPECT_GT(c.t, 0);
            EXPECT_LE(c.t, c.q);
        }
}

TEST(Rational, RejectsPairsOutsideTheory) {
    EXPECT_THROW(make_rational(4, 6), std::invalid_argument);
    try {
        make_rational(3, 5);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("M_q"), std::string::npos);
    }
    EXPECT_THROW(make_rational(0, 1), std::invalid_argument);
}

TEST(Extension, TapsFollowTheRule) {
    WaveProfile w(2, 3, 1, Extension::Neumann);
    for (long j = w.lo(); j <= w.hi(); ++j) w.at(j, 0) = double(j);
    EXPECT_EQ(w.value(w.hi() + 4, 0), double(w.hi()));
    EXPECT_EQ(w.value(w.lo() - 1, 0), double(w.lo()));
    w.extension = Extension::Linear;
    EXPECT_DOUBLE_EQ(w.value(w.hi() + 5, 0), double(w.hi() + 5));
    EXPECT_DOUBLE_EQ(w.value(w.lo() - 3, 0), double(w.lo() - 3));
    w.extension = Extension::ConstantLimits;
    w.P_minus = {-7.0};
    w.P_plus = {9.0};
    EXPECT_EQ(w.value(w.hi() + 1, 0), 9.0);
    EXPECT_EQ(w.value(w.lo() - 1, 0), -7.0);
    EXPECT_THROW(extension_from_string("periodic"), std::invalid_argument);
}

TEST(Field, SeamConvention) {
    const RationalCoupling c = make_rational(8, 5);
    PeriodicField f = field_for_window(c, 1, 3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (auto& v : f.values) v = U(rng);
    // Phi(zeta + 1, xi) = Phi(zeta, xi + 1/M)
    for (long b = f.b_lo; b < f.b_hi; ++b)
        for (long a = 0; a < c.q; ++a) {
            EXPECT_EQ(f.get(a + c.q, b, 0), f.get(a, b + 1, 0));
            EXPECT_EQ(f.get(a - c.q, b + 1, 0), f.get(a, b, 0));
        }
}

TEST(Field, EmbeddingIsAnIsometry) {
    std::mt19937_64 rng(2024);
    int trials = 0;
    for (const auto& [p, q] : kCouplings)
        for (int t = 0; t < 30; ++t) {
            const RationalCoupling c = make_rational(p, q);
            const WaveProfile phi = random_compact(c, 6, 2, rng), psi = random_compact(c, 6, 2, rng);
            const PeriodicField F = embed_isometry(phi, c), G = embed_isometry(psi, c);
            EXPECT_NEAR(inner_product_field(F, G), inner_product_scaled(phi, psi), 1e-12);
            EXPECT_NEAR(norm_field(F), norm_scaled(phi), 1e-12);
            ++trials;
        }
    EXPECT_GE(trials, 100);
}

TEST(Field, FlattenInvertsEmbedding) {
    std::mt19937_64 rng(5);
    for (const auto& [p, q] : kCouplings) {
        const RationalCoupling c = make_rational(p, q);
        const WaveProfile phi = random_compact(c, 4, 1, rng);
        const WaveProfile back = flatten_field(embed_isometry(phi, c), phi);
        EXPECT_EQ(back.values, phi.values);
    }
}

TEST(Field, TransverseTrapezoidWeights) {
    EXPECT_DOUBLE_EQ(inner_product_transverse({1, 1, 1}, {1, 1, 1}), 1.0);
    EXPECT_DOUBLE_EQ(inner_product_transverse({2, 0}, {2, 0}), 2.0);
    EXPECT_THROW(inner_product_transverse({1}, {1}), std::invalid_argument);
}

TEST(Interpolation, ReproducesLinearAndConvergesCubically) {
    WaveProfile lin = restrict_scalar([](double x) { return 3.0 * x - 1.0; }, 4, 5, Extension::Linear);
    for (double x : {-2.3, 0.01, 1.77, 3.999}) {
        EXPECT_NEAR(interpolate_cubic(lin, x, 0), 3.0 * x - 1.0, 1e-12);
        EXPECT_NEAR(interpolate_linear(lin, x, 0), 3.0 * x - 1.0, 1e-12);
    }
    std::vector<double> err;
    for (long p : {8L, 16L, 32L}) {
        const WaveProfile w = restrict_scalar([](double x) { return std::sin(x); }, p, 6);
        double e = 0.0;
        for (int s = 0; s <= 400; ++s) {
            const double x = -3.0 + 6.0 * s / 400.0;
            e = std::max(e, std::abs(interpolate_cubic(w, x, 0) - std::sin(x)));
        }
        err.push_back(e);
    }
    EXPECT_GT(std::log2(err[0] / err[1]), 2.5);
    EXPECT_GT(std::log2(err[1] / err[2]), 2.5);
}

TEST(Profile, TranslateAndResample) {
    const WaveProfile w = restrict_scalar([](double x) { return std::tanh(x); }, 16, 10, Extension::Neumann);
    const WaveProfile t = translate(w, 0.5);
    for (long j = -40; j <= 40; ++j) EXPECT_NEAR(t.at(j, 0), std::tanh(w.xi(j) + 0.5), 2e-3);
    const WaveProfile r = resample(w, 4, 8);
    EXPECT_EQ(r.p, 4);
    EXPECT_EQ(r.L, 8);
    for (long j = r.lo(); j <= r.hi(); ++j) EXPECT_NEAR(r.at(j, 0), std::tanh(r.xi(j)), 1e-12);
}

TEST(Profile, JsonRoundTripIsExact) {
    std::mt19937_64 rng(3);
    WaveProfile w = random_compact(make_rational(7, 3), 3, 2, rng);
    w.P_minus = {0.25, -1.0 / 3.0};
    w.extension = Extension::Neumann;
    const WaveProfile r = profile_from_json(json::parse(profile_to_json(w).dump()));
    EXPECT_EQ(r.values, w.values);
    EXPECT_EQ(r.P_minus, w.P_minus);
    EXPECT_EQ(r.extension, w.extension);
    json bad = profile_to_json(w);
    bad["values"].erase(0);
    EXPECT_THROW(profile_from_json(bad), std::invalid_argument);
}

TEST(Profile, CsvHeader) {
    const WaveProfile w(2, 1, 2);
    const std::string csv = profile_to_csv(w);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "xi,u0,u1");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + w.size());
}
