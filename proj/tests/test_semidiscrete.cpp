#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "latticewave/fullydiscrete.hpp"
#include "latticewave/semidiscrete.hpp"
#include "latticewave/timesim.hpp"

using namespace latticewave;

namespace {

struct NagumoWave : ::testing::Test {
    static void SetUpTestSuite() {
        model = new ReactionModel(nagumo_model());
        kernel = new InteractionKernel(build_nearest_neighbor_kernel(1, 1, 1.0));
        wave = new SemiDiscreteWave(solve_semidiscrete_wave(*model, *kernel, 0.25, tanh_front(*model, 16, 30), 0.0));
        attach_spectrum(*wave, *model, *kernel, false);
    }
    static void TearDownTestSuite() {
        delete wave;
        delete kernel;
        delete model;
    }
    static ReactionModel* model;
    static InteractionKernel* kernel;
    static SemiDiscreteWave* wave;
};

ReactionModel* NagumoWave::model = nullptr;
InteractionKernel* NagumoWave::kernel = nullptr;
SemiDiscreteWave* NagumoWave::wave = nullptr;

Eigen::VectorXd random_rhs(long n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Eigen::VectorXd g(n);
    for (long i = 0; i < n; ++i) g(i) = U(rng);
    return g;
}

}  // namespace

TEST_F(NagumoWave, ConvergesToFrozenSpeed) {
    EXPECT_LT(wave->residual, 1e-10);
    EXPECT_NEAR(wave->c0, 0.34977526468518411, 1e-9);
    EXPECT_FALSE(wave->c_vanishes);
    EXPECT_LT(sup_norm(semidiscrete_residual(*model, *kernel, 0.25, wave->c0, wave->U0)), 1e-10);
}

// Lattice simulation with a small time step is an independent route to the same speed.
TEST_F(NagumoWave, AgreesWithLatticeSimulation) {
    SimulationState s = make_state(front_initial_state(*model, 100, 0), 0.01);
    const Trajectory tr = simulate(s, *model, *kernel, bdf_scheme(2), 0.25, 6000);
    const WavespeedReport ws = measure_wavespeed(tr.times, tr.positions);
    EXPECT_NEAR(-ws.speed, wave->c0, 1e-5);
}

TEST_F(NagumoWave, KernelIsOneDimensional) {
    EXPECT_LT(wave->sigma_min, 1e-10);
    EXPECT_GT(wave->sigma_second, 1e-2);
    const WaveProfile d = central_derivative_profile(wave->U0);
    double e = 0.0;
    for (std::size_t i = 0; i < d.values.size(); ++i) e = std::max(e, std::abs(d.values[i] - wave->Phi_plus.values[i]));
    // the discrete kernel vector and the fourth-order derivative differ by the stencil truncation
    EXPECT_LT(e, 1e-6);
    EXPECT_NEAR(inner_product_scaled(wave->Phi_plus, wave->Phi_minus), 1.0, 1e-10);
}

TEST_F(NagumoWave, TailsDecay) {
    const TailFit f = fit_tail_decay(wave->U0);
    EXPECT_TRUE(f.ok);
    EXPECT_GT(f.left_slope, 0.0);
    EXPECT_LT(f.right_slope, 0.0);
}

TEST_F(NagumoWave, ResolventDecompositionAgrees) {
    const SpMat L0 = assemble_L0(*model, *kernel, 0.25, wave->c0, wave->U0);
    std::mt19937_64 rng(77);
    for (double delta : {0.01, 0.05})
        for (int t = 0; t < 10; ++t) {
            const ResolventCheck rc = resolvent_decomposition_check(L0, wave->Phi_plus, wave->Phi_minus, delta,
                                                                    random_rhs(L0.rows(), rng));
            EXPECT_LT(rc.relative_error, 1e-8) << "delta " << delta;
        }
}

TEST_F(NagumoWave, ResolventActsDiagonallyOnKernel) {
    const SpMat L0 = assemble_L0(*model, *kernel, 0.25, wave->c0, wave->U0);
    const Eigen::VectorXd pp = to_vector(wave->Phi_plus);
    for (double delta : {0.01, 0.05}) {
        const ResolventCheck rc = resolvent_decomposition_check(L0, wave->Phi_plus, wave->Phi_minus, delta, pp);
        EXPECT_LT((rc.direct - pp / delta).norm() / (pp / delta).norm(), 1e-8);
        EXPECT_LT(rc.relative_error, 1e-8);
    }
    EXPECT_THROW(resolvent_decomposition_check(L0, wave->Phi_plus, wave->Phi_minus, 0.2, pp), std::invalid_argument);
}

TEST(SemiDiscrete, SpeedDecreasesTowardBalancedDetuning) {
    const ReactionModel m = nagumo_model();
    const InteractionKernel k = build_nearest_neighbor_kernel(1, 1, 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {0.2, 0.25, 0.3}) {
        const SemiDiscreteWave w = solve_semidiscrete_wave(m, k, r, tanh_front(m, 8, 25), 0.0);
        EXPECT_LT(w.c0, prev);
        EXPECT_GT(w.c0, 0.0);
        prev = w.c0;
    }
}

TEST(SemiDiscrete, CentralDerivativeIsFourthOrder) {
    std::vector<double> err;
    for (long p : {8L, 16L}) {
        const WaveProfile w = restrict_scalar([](double x) { return std::sin(x); }, p, 6, Extension::Linear);
        const WaveProfile d = central_derivative_profile(w);
        double e = 0.0;
        for (long j = -3 * p; j <= 3 * p; ++j) e = std::max(e, std::abs(d.at(j, 0) - std::cos(w.xi(j))));
        err.push_back(e);
    }
    EXPECT_GT(std::log2(err[0] / err[1]), 3.8);
}

TEST(SemiDiscrete, FitzHughNagumoPulseFromSimulation) {
    const ReactionModel m = fhn_model(0.01, 5.0);
    const InteractionKernel k = build_nearest_neighbor_kernel(2, 1, 2.56);
    SemiSeedOptions o;
    o.p0 = 4;
    o.pulse.lhs_scale = 1.6;
    const SemiDiscreteWave w = semidiscrete_from_simulation(m, k, 0.11, o);
    EXPECT_LT(w.residual, 1e-10);
    EXPECT_NEAR(w.c0, 0.71645110562611347, 1e-6);
}

TEST(SemiDiscrete, RejectsMismatchedDimensions) {
    const ReactionModel m = fhn_model(0.01, 5.0);
    const InteractionKernel k = build_nearest_neighbor_kernel(1, 1, 1.0);
    EXPECT_THROW(solve_semidiscrete_wave(m, k, 0.1, tanh_front(m, 4, 10), 0.1), std::invalid_argument);
}
