#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

namespace latticewave {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

struct SparseSolver {
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    SpMat At;
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lut;
    bool has_transpose = false;

    explicit SparseSolver(const SpMat& A, bool with_transpose = false) {
        lu.compute(A);
        if (lu.info() != Eigen::Success) throw std::runtime_error("sparse LU factorization failed");
        if (with_transpose) {
            At = A.transpose();
            lut.compute(At);
            if (lut.info() != Eigen::Success) throw std::runtime_error("sparse LU factorization failed");
            has_transpose = true;
        }
    }
    Eigen::VectorXd solve(const Eigen::VectorXd& b) { return lu.solve(b); }
    Eigen::VectorXd solve_transpose(const Eigen::VectorXd& b) {
        if (!has_transpose) throw std::logic_error("transpose factorization not requested");
        return lut.solve(b);
    }
};

struct SingularTriplet {
    double sigma = 0.0;
    Eigen::VectorXd right;  // A right = sigma left
    Eigen::VectorXd left;
};

// Smallest singular triplet by inverse iteration on A^T A, optionally orthogonal to `deflate`.
inline SingularTriplet smallest_singular(const SpMat& A, int iterations = 60,
                                         const std::vector<Eigen::VectorXd>& deflate = {},
                                         unsigned seed = 1) {
    SparseSolver S(A, true);
    const Eigen::Index n = A.cols();
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x(i) = std::sin(0.37 * double(i + 1) * double(seed) + 0.1);
    auto project = [&](Eigen::VectorXd& v) {
        for (const auto& e : deflate) v -= e.dot(v) / e.squaredNorm() * e;
    };
    project(x);
    x.normalize();
    for (int it = 0; it < iterations; ++it) {
        Eigen::VectorXd y = S.solve_transpose(x);
        Eigen::VectorXd z = S.solve(y);
        project(z);
        const double nz = z.norm();
        if (!(nz > 0.0) || !std::isfinite(nz)) throw std::runtime_error("inverse iteration broke down");
        Eigen::VectorXd xn = z / nz;
        if (xn.dot(x) < 0) xn = -xn;
        const double change = (xn - x).norm();
        x = xn;
        if (change < 1e-15) break;
    }
    SingularTriplet t;
    t.right = x;
    t.sigma = (A * x).norm();
    // A^{-T} v is parallel to the left vector and stays accurate when sigma is tiny
    t.left = S.solve_transpose(x).normalized();
    if ((A * x).dot(t.left) < 0) t.left = -t.left;
    return t;
}

// Left null-ish vector: smallest singular vector of A^T.
inline SingularTriplet smallest_singular_left(const SpMat& A, int iterations = 60) {
    SpMat At = A.transpose();
    return smallest_singular(At, iterations);
}

inline double frobenius(const SpMat& A) { return A.norm(); }

}  // namespace latticewave
