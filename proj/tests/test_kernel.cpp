#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "latticewave/kernel.hpp"

using namespace latticewave;

namespace {

// Independent long-double normalizer: sum_{m>=1} m^2 e^{-m^2} over plenty of terms.
long double gaussian_sum_oracle() {
    long double s = 0.0L;
    for (int m = 1; m <= 40; ++m) s += (long double)m * m * std::exp(-(long double)m * m);
    return s;
}

}  // namespace

TEST(Kernel, GaussianCoefficientsMatchDirectFormula) {
    const InteractionKernel k = build_gaussian_kernel(1, 1, 1.0);
    const long double S = gaussian_sum_oracle();
    for (int m = 1; m <= k.m_max; ++m)
        EXPECT_NEAR(k.alpha(m, 0), double(std::exp(-(long double)m * m) / S), 1e-16) << "m = " << m;
}

TEST(Kernel, GaussianTruncationIsFrozen) {
    const InteractionKernel k = build_gaussian_kernel(2, 1, 2.0);
    EXPECT_EQ(k.m_max, 6);
    EXPECT_LT(k.tail_bound, 1e-14);
    EXPECT_NEAR(k.alpha(1, 0), 0.8318274950792698, 1e-15);
}

TEST(Kernel, NormalizationHoldsPerDiffusiveComponent) {
    for (int d_diff = 1; d_diff <= 3; ++d_diff) {
        const InteractionKernel k = build_gaussian_kernel(3, d_diff, 0.7);
        for (int i = 0; i < d_diff; ++i) {
            double s = 0.0;
            for (int m = 1; m <= k.m_max; ++m) s += k.alpha(m, i) * m * m;
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Kernel, NonDiffusiveComponentsVanish) {
    const InteractionKernel k = build_gaussian_kernel(2, 1, 1.0);
    for (int m = 1; m <= k.m_max; ++m) EXPECT_EQ(k.alpha(m, 1), 0.0);
    EXPECT_TRUE(check_hs1(k, 512).diagonal_block_ok);
}

TEST(Kernel, NearestNeighborSymbol) {
    const InteractionKernel k = build_nearest_neighbor_kernel(1, 1, 3.0);
    EXPECT_DOUBLE_EQ(symbol(k, 0, M_PI), 2.0);
    EXPECT_NEAR(symbol(k, 0, M_PI / 2), 1.0, 1e-15);
    EXPECT_THROW(symbol(build_nearest_neighbor_kernel(2, 1, 1.0), 1, 0.3), std::out_of_range);
}

TEST(Kernel, SymbolPositiveOnOpenPeriod) {
    for (const auto& k : {build_gaussian_kernel(1, 1, 1.0), build_nearest_neighbor_kernel(1, 1, 1.0)}) {
        const Hs1Report r = check_hs1(k, 2048);
        EXPECT_TRUE(r.pass);
        EXPECT_TRUE(r.symbol_positive);
        for (int s = 1; s < 200; ++s) EXPECT_GT(symbol(k, 0, 2.0 * M_PI * s / 200.0), 0.0);
    }
}

TEST(Kernel, SymbolIsEvenAndPeriodic) {
    const InteractionKernel k = build_gaussian_kernel(1, 1, 1.0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    for (int t = 0; t < 100; ++t) {
        const double z = U(rng);
        EXPECT_NEAR(symbol(k, 0, z), symbol(k, 0, -z), 1e-14);
        EXPECT_NEAR(symbol(k, 0, z), symbol(k, 0, z + 2.0 * M_PI), 1e-12);
    }
}

TEST(Kernel, LaplacianOfQuadraticIsTwoTau) {
    // tau sum alpha_m [(x+m)^2 + (x-m)^2 - 2x^2] = 2 tau sum alpha_m m^2 = 2 tau
    for (const auto& k : {build_gaussian_kernel(1, 1, 1.7), build_nearest_neighbor_kernel(1, 1, 1.7)}) {
        WaveProfile w(4, 20, 1, Extension::Linear);
        for (long j = w.lo(); j <= w.hi(); ++j) w.at(j, 0) = w.xi(j) * w.xi(j);
        const WaveProfile L = apply_nonlocal_laplacian(k, w);
        for (long j = w.lo() + 4 * 8; j <= w.hi() - 4 * 8; ++j) EXPECT_NEAR(L.at(j, 0), 2.0 * 1.7, 1e-11);
    }
}

TEST(Kernel, LaplacianIsSymmetricOnCompactSupport) {
    const InteractionKernel k = build_gaussian_kernel(1, 1, 1.0);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        WaveProfile a(3, 20, 1, Extension::ConstantLimits), b = a;
        for (long j = a.lo() + 30; j <= a.hi() - 30; ++j) {
            a.at(j, 0) = U(rng);
            b.at(j, 0) = U(rng);
        }
        EXPECT_NEAR(inner_product_scaled(apply_nonlocal_laplacian(k, a), b),
                    inner_product_scaled(a, apply_nonlocal_laplacian(k, b)), 1e-12);
        EXPECT_LE(inner_product_scaled(apply_nonlocal_laplacian(k, a), a), 1e-12);
    }
}

TEST(Kernel, JsonRoundTrip) {
    const InteractionKernel k = build_gaussian_kernel(2, 1, 2.56);
    const InteractionKernel r = kernel_from_json(json::parse(kernel_to_json(k).dump()));
    EXPECT_EQ(r.m_max, k.m_max);
    EXPECT_EQ(r.coefficients, k.coefficients);
    EXPECT_EQ(r.tau, k.tau);
}

TEST(Kernel, RejectsBadArguments) {
    EXPECT_THROW(build_gaussian_kernel(1, 1, 0.0), std::invalid_argument);
    EXPECT_THROW(build_gaussian_kernel(1, 2, 1.0), std::invalid_argument);
    EXPECT_THROW(build_nearest_neighbor_kernel(2, 0, 1.0), std::invalid_argument);
    EXPECT_THROW(check_hs1(build_nearest_neighbor_kernel(1, 1, 1.0), 4), std::invalid_argument);
}
