#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "grid.hpp"
#include "kernel.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace latticewave {

// Accumulates weight * (sample at lattice index j, component i) into a sparse row.
inline void add_tap(Triplets& T, long row, const WaveProfile& w, long j, int i, double weight) {
    const Tap tp = w.tap(j, i);
    if (tp.i0 >= 0 && tp.w0 != 0.0) T.emplace_back(int(row), int(tp.i0), weight * tp.w0);
    if (tp.i1 >= 0 && tp.w1 != 0.0) T.emplace_back(int(row), int(tp.i1), weight * tp.w1);
}

// Row entries of -tau sum_m alpha_m [S^{m} + S^{-m} - 2] with S the unit shift (offset p).
inline void add_neg_laplacian(Triplets& T, long row, const InteractionKernel& k, const WaveProfile& U, long j,
                              int i, double scale = 1.0) {
    if (i >= k.d_diff) return;
    double diag = 0.0;
    for (int m = 1; m <= k.m_max; ++m) {
        const double a = scale * k.tau * k.alpha(m, i);
        if (a == 0.0) continue;
        const long o = m * U.p;
        add_tap(T, row, U, j + o, i, -a);
        add_tap(T, row, U, j - o, i, -a);
        diag += 2.0 * a;
    }
    if (diag != 0.0) T.emplace_back(int(row), int(row), diag);
}

inline double laplacian_at(const InteractionKernel& k, const WaveProfile& U, long j, int i) {
    if (i >= k.d_diff) return 0.0;
    const double u = U.at(j, i);
    double s = 0.0;
    for (int m = 1; m <= k.m_max; ++m) {
        const long o = m * U.p;
        s += k.alpha(m, i) * (U.value(j + o, i) + U.value(j - o, i) - 2.0 * u);
    }
    return k.tau * s;
}

// Rows of -DG(U(xi_j)) for every component at point j.
inline void add_neg_reaction_jacobian(Triplets& T, const ReactionModel& model, double r, const WaveProfile& U,
                                      long j, std::vector<double>& scratch) {
    scratch.resize(std::size_t(U.d * U.d));
    model.DG(&U.values[std::size_t(U.flat(j, 0))], r, scratch.data());
    for (int i = 0; i < U.d; ++i)
        for (int b = 0; b < U.d; ++b) {
            const double v = scratch[std::size_t(i * U.d + b)];
            if (v != 0.0) T.emplace_back(int(U.flat(j, i)), int(U.flat(j, b)), -v);
        }
}

inline void append_matrix(Triplets& T, const SpMat& A, int row0 = 0, int col0 = 0) {
    for (int col = 0; col < A.outerSize(); ++col)
        for (SpMat::InnerIterator e(A, col); e; ++e)
            T.emplace_back(row0 + int(e.row()), col0 + int(e.col()), e.value());
}

inline Eigen::VectorXd to_vector(const WaveProfile& w) {
    return Eigen::Map<const Eigen::VectorXd>(w.values.data(), Eigen::Index(w.values.size()));
}

inline WaveProfile from_vector(const Eigen::VectorXd& v, const WaveProfile& like) {
    WaveProfile out = like;
    for (Eigen::Index i = 0; i < v.size(); ++i) out.values[std::size_t(i)] = v(i);
    return out;
}

}  // namespace latticewave
