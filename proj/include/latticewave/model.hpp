#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grid.hpp"

namespace latticewave {

// Reaction term G(U; r) with its Jacobian (row-major d x d) and the two equilibria.
struct ReactionModel {
    std::string name;
    int d = 1;
    int d_diff = 1;
    std::function<void(const double* U, double r, double* out)> G;
    std::function<void(const double* U, double r, double* out)> DG;
    std::function<void(const double* U, double r, double* out)> dGdr;  // optional; central differences otherwise
    std::vector<double> P_minus;
    std::vector<double> P_plus;
    std::optional<double> gamma_cross;
    json params = json::object();

    std::vector<double> eval(const std::vector<double>& U, double r) const {
        std::vector<double> out(static_cast<std::size_t>(d));
        G(U.data(), r, out.data());
        return out;
    }

    Eigen::MatrixXd jacobian(const std::vector<double>& U, double r) const {
        std::vector<double> J(std::size_t(d * d));
        DG(U.data(), r, J.data());
        Eigen::MatrixXd M(d, d);
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) M(a, b) = J[std::size_t(a * d + b)];
        return M;
    }

    void eval_dr(const double* U, double r, double* out) const {
        if (dGdr) return dGdr(U, r, out);
        std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
        const double h = 1e-6;
        G(U, r + h, a.data());
        G(U, r - h, b.data());
        for (int i = 0; i < d; ++i) out[i] = (a[std::size_t(i)] - b[std::size_t(i)]) / (2 * h);
    }
};

inline ReactionModel fhn_model(double rho, double gamma) {
    if (!(rho > 0.0) || !(gamma > 0.0)) throw std::invalid_argument("fhn model requires rho > 0 and gamma > 0");
    ReactionModel m;
    m.name = "fhn";
    m.d = 2;
    m.d_diff = 1;
    m.G = [rho, gamma](const double* U, double r, double* out) {
        const double u = U[0], w = U[1];
        out[0] = u * (1.0 - u) * (u - r) - w;
        out[1] = rho * (u - gamma * w);
    };
    m.DG = [rho, gamma](const double* U, double r, double* J) {
        const double u = U[0];
        J[0] = -3.0 * u * u + 2.0 * (1.0 + r) * u - r;
        J[1] = -1.0;
        J[2] = rho;
        J[3] = -rho * gamma;
    };
    m.dGdr = [](const double* U, double, double* out) {
        out[0] = -U[0] * (1.0 - U[0]);
        out[1] = 0.0;
    };
    m.P_minus = {0.0, 0.0};
    m.P_plus = {0.0, 0.0};
    m.gamma_cross = 1.0 / rho;
    m.params = json{{"rho", rho}, {"gamma", gamma}};
    return m;
}

inline ReactionModel nagumo_model() {
    ReactionModel m;
    m.name = "nagumo";
    m.d = 1;
    m.d_diff = 1;
    m.G = [](const double* U, double r, double* out) {
        const double u = U[0];
        out[0] = u * (1.0 - u) * (u - r);
    };
    m.DG = [](const double* U, double r, double* J) {
        const double u = U[0];
        J[0] = -3.0 * u * u + 2.0 * (1.0 + r) * u - r;
    };
    m.dGdr = [](const double* U, double, double* out) { out[0] = -U[0] * (1.0 - U[0]); };
    m.P_minus = {0.0};
    m.P_plus = {1.0};
    m.params = json::object();
    return m;
}

inline ReactionModel model_from_json(const json& j) {
    const std::string name = j.at("name").get<std::string>();
    if (name == "fhn") return fhn_model(j.value("rho", 0.01), j.value("gamma", 5.0));
    if (name == "nagumo") return nagumo_model();
    throw std::invalid_argument("unknown model '" + name + "'");
}

inline bool symmetric_part_positive(const Eigen::MatrixXd& A, double tol = 1e-10) {
    if (A.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (A + A.transpose()));
    return es.eigenvalues().minCoeff() > tol;
}

inline double max_equilibrium_defect(const ReactionModel& m, double r) {
    double e = 0.0;
    for (const auto& P : {m.P_minus, m.P_plus})
        for (double v : m.eval(P, r)) e = std::max(e, std::abs(v));
    return e;
}

struct Hs3Report {
    bool hs2 = false;
    double hs2_defect = 0.0;
    bool a_holds = false;
    bool b_holds = false;
    bool b_blocks_ok = false;
    bool b_cross_ok = false;
    double cross_defect = 0.0;
    int samples = 0;
    std::string branch;  // "a", "b" or "none"
};

// (a): symmetric parts of -DG(P-) and -DG(P+) positive definite.
// (b): diagonal blocks of -DG(P+-) positive, and DG^{[1,2]}(U) = -Gamma DG^{[2,1]}(U)^T on samples in [lo, hi]^d.
inline Hs3Report check_hs3(const ReactionModel& m, double r, int samples = 100, double lo = -1.0,
                           double hi = 2.0, unsigned seed = 12345, double tol = 1e-10) {
    Hs3Report rep;
    rep.samples = samples;
    rep.hs2_defect = max_equilibrium_defect(m, r);
    rep.hs2 = rep.hs2_defect < 1e-12;
    const Eigen::MatrixXd Jm = -m.jacobian(m.P_minus, r), Jp = -m.jacobian(m.P_plus, r);
    rep.a_holds = symmetric_part_positive(Jm, tol) && symmetric_part_positive(Jp, tol);

    const int k = m.d_diff, d = m.d;
    if (m.gamma_cross && k < d) {
        rep.b_blocks_ok = true;
        for (const auto& J : {Jm, Jp}) {
            rep.b_blocks_ok = rep.b_blocks_ok && symmetric_part_positive(J.topLeftCorner(k, k), tol) &&
                              symmetric_part_positive(J.bottomRightCorner(d - k, d - k), tol);
        }
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> U(lo, hi);
        double defect = 0.0;
        for (int s = 0; s < samples; ++s) {
            std::vector<double> u(static_cast<std::size_t>(d));
            for (auto& v : u) v = U(rng);
            const Eigen::MatrixXd J = m.jacobian(u, r);
            const Eigen::MatrixXd d12 = J.topRightCorner(k, d - k);
            const Eigen::MatrixXd d21 = J.bottomLeftCorner(d - k, k);
            defect = std::max(defect, (d12 + *m.gamma_cross * d21.transpose()).cwiseAbs().maxCoeff());
        }
        rep.cross_defect = defect;
        rep.b_cross_ok = defect <= 1e-12 * std::max(1.0, *m.gamma_cross);
        rep.b_holds = rep.b_blocks_ok && rep.b_cross_ok;
    }
    rep.branch = rep.a_holds ? "a" : (rep.b_holds ? "b" : "none");
    return rep;
}

// Largest relative deviation of DG from central differences of G over random points.
inline double jacobian_fd_defect(const ReactionModel& m, double r, int samples = 100, unsigned seed = 7,
                                 double lo = -1.0, double hi = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(lo, hi);
    double worst = 0.0;
    const double h = 1e-6;
    for (int s = 0; s < samples; ++s) {
        std::vector<double> u(static_cast<std::size_t>(m.d));
        for (auto& v : u) v = U(rng);
        const Eigen::MatrixXd J = m.jacobian(u, r);
        for (int b = 0; b < m.d; ++b) {
            auto up = u, um = u;
            up[std::size_t(b)] += h;
            um[std::size_t(b)] -= h;
            const auto gp = m.eval(up, r), gm = m.eval(um, r);
            for (int a = 0; a < m.d; ++a) {
                const double fd = (gp[std::size_t(a)] - gm[std::size_t(a)]) / (2 * h);
                worst = std::max(worst, std::abs(fd - J(a, b)) / std::max(1.0, std::abs(J(a, b))));
            }
        }
    }
    return worst;
}

}  // namespace latticewave
