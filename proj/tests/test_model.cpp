#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "latticewave/model.hpp"

using namespace latticewave;

TEST(Model, FitzHughNagumoFormula) {
    const ReactionModel m = fhn_model(0.01, 5.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1.0, 2.0);
    for (int t = 0; t < 50; ++t) {
        const double u = U(rng), w = U(rng), r = 0.3 * (U(rng) + 1.0) / 3.0;
        const auto g = m.eval({u, w}, r);
        EXPECT_NEAR(g[0], u * (1 - u) * (u - r) - w, 1e-14);
        EXPECT_NEAR(g[1], 0.01 * (u - 5.0 * w), 1e-15);
    }
}

TEST(Model, JacobiansMatchFiniteDifferences) {
    EXPECT_LT(jacobian_fd_defect(fhn_model(0.01, 5.0), 0.11), 1e-7);
    EXPECT_LT(jacobian_fd_defect(nagumo_model(), 0.3), 1e-7);
}

TEST(Model, DetuningDerivativeMatchesDifferences) {
    for (const auto& m : {fhn_model(0.01, 5.0), nagumo_model()}) {
        ReactionModel fd = m;
        fd.dGdr = nullptr;
        std::vector<double> a(std::size_t(m.d)), b(std::size_t(m.d));
        const std::vector<double> U{0.37, 0.02};
        m.eval_dr(U.data(), 0.2, a.data());
        fd.eval_dr(U.data(), 0.2, b.data());
        for (int i = 0; i < m.d; ++i) EXPECT_NEAR(a[std::size_t(i)], b[std::size_t(i)], 1e-8);
    }
}

TEST(Model, EquilibriaAreZeros) {
    for (double r : {0.05, 0.11, 0.3, 0.7}) {
        EXPECT_LT(max_equilibrium_defect(fhn_model(0.01, 5.0), r), 1e-12);
        EXPECT_LT(max_equilibrium_defect(nagumo_model(), r), 1e-12);
    }
}

TEST(Model, FitzHughNagumoSatisfiesCrossCondition) {
    const Hs3Report rep = check_hs3(fhn_model(0.01, 5.0), 0.11);
    EXPECT_TRUE(rep.hs2);
    EXPECT_TRUE(rep.b_holds);
    EXPECT_EQ(rep.branch, "b");
    EXPECT_DOUBLE_EQ(*fhn_model(0.01, 5.0).gamma_cross, 100.0);
}

TEST(Model, FitzHughNagumoDefinitenessFailsAtSmallDetuning) {
    // -DG(0) = [[r, 1], [-rho, rho gamma]] has symmetric part with eigenvalue below zero for small r
    EXPECT_FALSE(check_hs3(fhn_model(0.01, 5.0), 0.01).a_holds);
}

TEST(Model, NagumoSatisfiesDefiniteness) {
    const Hs3Report rep = check_hs3(nagumo_model(), 0.25);
    EXPECT_TRUE(rep.a_holds);
    EXPECT_EQ(rep.branch, "a");
    EXPECT_FALSE(nagumo_model().gamma_cross.has_value());
}

TEST(Model, SymmetricPartCriterion) {
    Eigen::MatrixXd A(2, 2);
    A << 1, 5, -5, 1;  // skew part is irrelevant
    EXPECT_TRUE(symmetric_part_positive(A));
    A << 1, 3, 3, 1;
    EXPECT_FALSE(symmetric_part_positive(A));
}

TEST(Model, FromJson) {
    const ReactionModel m = model_from_json(json{{"name", "fhn"}, {"rho", 0.02}, {"gamma", 4.0}});
    EXPECT_DOUBLE_EQ(*m.gamma_cross, 50.0);
    EXPECT_EQ(model_from_json(json{{"name", "nagumo"}}).d, 1);
    EXPECT_THROW(model_from_json(json{{"name", "brusselator"}}), std::invalid_argument);
    EXPECT_THROW(fhn_model(-1.0, 5.0), std::invalid_argument);
}
