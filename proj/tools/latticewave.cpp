#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "latticewave.hpp"

#ifndef LATTICEWAVE_VERSION
#define LATTICEWAVE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace latticewave;

namespace {

// Mathematical non-convergence, as opposed to a bad config.
struct NonConvergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Output {
    fs::path dir;
    std::string hash;

    void json_file(const std::string& name, json j) const {
        j["config_hash"] = hash;
        std::ofstream(dir / name) << j.dump(2) << '\n';
    }
    void csv_file(const std::string& name, const std::string& body) const {
        std::ofstream(dir / name) << "# config_hash: " << hash << '\n' << body;
    }
};

NewtonOptions newton_options(const RunConfig& c) {
    NewtonOptions o;
    o.tol = c.run.tol;
    o.max_iter = c.run.max_iter;
    return o;
}

FullyDiscreteOptions fd_options(const RunConfig& c) {
    FullyDiscreteOptions o;
    o.tol = c.run.tol;
    o.max_iter = c.run.max_iter;
    return o;
}

SemiSeedOptions semi_seed(const RunConfig& c) {
    SemiSeedOptions o;
    o.p0 = c.grid.p0;
    o.L = c.grid.L_semi;
    o.center = -double(c.grid.L_semi) / 2.4;
    o.pulse.lhs_scale = c.lhs_scale();
    return o;
}

SemiDiscreteWave semi_wave(const RunConfig& c, const ReactionModel& m, const InteractionKernel& k) {
    SemiDiscreteWave w;
    try {
        if (c.model.name == "nagumo")
            w = solve_semidiscrete_wave(m, k, c.run.r, tanh_front(m, c.grid.p0, c.grid.L_semi), 0.0, newton_options(c));
        else
            w = semidiscrete_from_simulation(m, k, c.run.r, semi_seed(c), newton_options(c));
    } catch (const SolveError& e) {
        throw NonConvergence(e.what());
    } catch (const StepError& e) {
        throw NonConvergence(e.what());
    }
    attach_spectrum(w, m, k, w.U0.size() * w.U0.d <= 3000);
    log(LogLevel::Info, "semi-discrete wave c0 = " + format_number(w.c0));
    return w;
}

int check_assumptions(const RunConfig& c, const Output& out) {
    const ReactionModel m = model_from_config(c);
    const InteractionKernel k = kernel_from_config(c, m.d, m.d_diff);
    const Hs1Report h1 = check_hs1(k, 4096, c.kernel.tail_tol);
    const Hs3Report h3 = check_hs3(m, c.run.r);
    out.json_file("assumptions.json",
                  {{"HS1",
                    {{"pass", h1.pass},
                     {"symbol_positive", h1.symbol_positive},
                     {"min_symbol", h1.min_symbol},
                     {"normalized", h1.normalized},
                     {"tail_bound", h1.tail_bound},
                     {"diagonal_block_ok", h1.diagonal_block_ok}}},
                   {"HS2", {{"pass", h3.hs2}, {"defect", h3.hs2_defect}}},
                   {"HS3",
                    {{"a", h3.a_holds},
                     {"b", h3.b_holds},
                     {"branch", h3.branch},
                     {"cross_defect", h3.cross_defect},
                     {"gamma", m.gamma_cross ? json(*m.gamma_cross) : json(nullptr)}}},
                   {"kernel", kernel_to_json(k)},
                   {"r", c.run.r}});
    return 0;
}

int solve_semi(const RunConfig& c, const Output& out) {
    const ReactionModel m = model_from_config(c);
    const InteractionKernel k = kernel_from_config(c, m.d, m.d_diff);
    const SemiDiscreteWave w = semi_wave(c, m, k);
    json j = wave_to_json(w);
    j["tail"] = {{"left", fit_tail_decay(w.U0).left_slope}, {"right", fit_tail_decay(w.U0).right_slope}};
    out.json_file("semi_wave.json", j);
    out.csv_file("semi_profile.csv", profile_to_csv(w.U0));
    return 0;
}

SweepConfig sweep_config(const RunConfig& c, const ReactionModel& m, const InteractionKernel& k) {
    SweepConfig s;
    s.model = m;
    s.kernel = k;
    s.scheme = bdf_scheme(c.scheme_k);
    s.dt = c.grid.dt;
    s.lhs_scale = c.lhs_scale();
    s.L = c.grid.L;
    s.policy = c.run.seed_policy;
    s.seed_center = c.run.seed_center;
    s.continuation_r = c.run.seed_r;
    s.newton = fd_options(c);
    s.continuation.newton = s.newton;
    s.workers = c.run.workers;
    return s;
}

int solve_wave(const RunConfig& c, const Output& out) {
    const ReactionModel m = model_from_config(c);
    const InteractionKernel k = kernel_from_config(c, m.d, m.d_diff);
    const RationalCoupling rc = make_rational(c.grid.p, c.grid.q);
    SweepConfig s = sweep_config(c, m, k);
    s.cells = {{rc.p, rc.q}};
    s.r_grid = {c.run.r};
    s.keep_solutions = true;
    const SweepResult res = sweep(s);
    const SweepRow& row = res.rows.front();
    json j = {{"p", row.p},         {"q", row.q},         {"c", row.c},        {"r", row.r},
              {"converged", row.converged}, {"seed", row.seed}, {"residual", row.residual},
              {"front_amplitude", row.front_amplitude}, {"iterations", row.iters}};
    out.json_file("wave.json", j);
    if (!row.converged) throw NonConvergence("no seed policy converged at (p,q,r) = (" + std::to_string(row.p) + "," +
                                             std::to_string(row.q) + "," + format_number(row.r) + ")");
    out.csv_file("wave_profile.csv", profile_to_csv(res.solutions.front().profile));
    return 0;
}

int run_sweep(const RunConfig& c, const Output& out) {
    const ReactionModel m = model_from_config(c);
    const InteractionKernel k = kernel_from_config(c, m.d, m.d_diff);
    SweepConfig s = sweep_config(c, m, k);
    s.cells = sweep_cells(c.grid.p_max, c.grid.q_factor);
    s.r_grid = percent_grid(c.run.r_from, c.run.r_to);
    const SweepResult res = sweep(s);
    out.csv_file("sweep.csv", sweep_to_csv(res));
    long converged = 0;
    for (const auto& r : res.rows) converged += r.converged ? 1 : 0;
    json multi = json::object();
    for (const auto& [r, cs] : multivalued_detunings(res)) multi[format_number(r)] = cs;
    out.json_file("sweep_summary.json",
                  {{"cells", s.cells.size()}, {"rows", res.rows.size()}, {"converged", converged}, {"multivalued", multi}});
    if (converged == 0) throw NonConvergence("no sweep cell converged");
    return 0;
}

int spectrum_scan(const RunConfig& c, const Output& out) {
    const ReactionModel m = model_from_config(c);
    const InteractionKernel k = kernel_from_config(c, m.d, m.d_diff);
    const SemiDiscreteWave w = semi_wave(c, m, k);
    const std::vector<double> rhos{0.0, 0.25, 0.5, 0.75, 1.0};
    CharacteristicContext cc{&m, &k, c.run.r, w.c0, 0.0, 0.0};
    const HyperbolicityReport plain = hyperbolicity_scan(cc, rhos);
    json j = {{"c0", w.c0},
              {"plain", {{"min_abs_det", plain.min_abs_det}, {"argmin_y", plain.argmin_y}, {"argmin_rho", plain.argmin_rho}, {"pass", plain.pass}}}};
    if (c.grid.p >= c.grid.q) {
        const RationalCoupling rc = make_rational(c.grid.p, c.grid.q);
        const HyperbolicityReport tw = hyperbolicity_scan(cc, rhos, 1024, 8, 1e-8, std::make_pair(rc.q, rc.t));
        const BdfScheme sc = bdf_scheme(c.scheme_k);
        const OperatorContext ctx{&k, &m, &sc, &w};
        const LimitKernelReport lk = limit_kernel_check(ctx, rc.q, rc.t);
        j["twisted"] = {{"q", rc.q}, {"theta_numerator", rc.t}, {"min_abs_det", tw.min_abs_det}, {"argmin_y", tw.argmin_y}, {"pass", tw.pass}};
        j["limit_kernel"] = {{"sigma_min", lk.sigma_min},
                             {"sigma_second", lk.sigma_second},
                             {"scale", lk.scale},
                             {"vector_mismatch", lk.vector_mismatch},
                             {"one_dimensional", lk.one_dimensional}};
    }
    out.json_file("spectrum.json", j);
    return 0;
}

int diagnostic(const RunConfig& c, const Output& out) {
    const ReactionModel m = model_from_config(c);
    const InteractionKernel k = kernel_from_config(c, m.d, m.d_diff);
    const SemiDiscreteWave w = semi_wave(c, m, k);
    const BdfScheme sc = bdf_scheme(c.scheme_k);
    const OperatorContext ctx{&k, &m, &sc, &w};
    const long L = c.grid.L_semi;
    std::mt19937_64 rng(c.run.rng_seed);
    json rows = json::array();
    for (long M : {2L, 4L, 8L}) {
        const RationalCoupling rc = make_rational(M, 1);
        double kappa = std::numeric_limits<double>::infinity();
        json e = json::array();
        for (double f : {0.5, 0.25, 0.125}) {
            const double v = spectral_convergence_diagnostic(ctx, rc, L, f * c.run.delta0);
            e.push_back(v);
            kappa = std::min(kappa, v);
        }
        QuasiInverse Q(ctx, rc, L);
        const QuasiInverseResult unit = Q.solve(-Q.wave_derivative());
        double ratio = 0.0;
        for (int t = 0; t < 20; ++t) {
            const WaveProfile psi = random_profile(M, L, m.d, 2.0, rng, &k);
            ratio = std::max(ratio, Q.solve(to_vector(psi)).ratio);
        }
        rows.push_back({{"M", M}, {"E", e}, {"kappa_hat", kappa}, {"quasi_inverse_unit_gamma", unit.gamma},
                        {"quasi_inverse_unit_V", unit.V.lpNorm<Eigen::Infinity>()}, {"stability_ratio", ratio}});
    }
    const SpMat L0 = assemble_L0(m, k, w.r, w.c0, w.U0);
    json res = json::array();
    for (double delta : {0.01, 0.05}) {
        const WaveProfile g = random_profile(w.U0.p, w.U0.L, m.d, 2.0, rng);
        const ResolventCheck rcheck = resolvent_decomposition_check(L0, w.Phi_plus, w.Phi_minus, delta, to_vector(g), c.run.delta0);
        res.push_back({{"delta", delta}, {"relative_error", rcheck.relative_error}, {"neumann_terms", rcheck.neumann_terms}});
    }
    out.json_file("diagnostic.json", {{"c0", w.c0}, {"rows", rows}, {"resolvent", res}, {"delta0", c.run.delta0}});
    return 0;
}

int simulate_cmd(const RunConfig& c, const Output& out) {
    const ReactionModel m = model_from_config(c);
    const InteractionKernel k = kernel_from_config(c, m.d, m.d_diff);
    const BdfScheme sc = bdf_scheme(c.scheme_k);
    const long sites = c.run.sim_sites;
    SimulationState s = make_state(front_initial_state(m, sites, sites - 30), c.grid.dt);
    StepOptions so;
    so.lhs_scale = c.lhs_scale();
    so.tol = std::min(c.run.tol, 1e-11);
    so.max_iter = c.run.max_iter;
    Trajectory tr;
    try {
        tr = simulate(s, m, k, sc, c.run.r, c.run.sim_steps, so, 0.5, 0, c.run.snapshot_stride);
    } catch (const StepError& e) {
        throw NonConvergence(e.what());
    }
    WavespeedReport ws;
    try {
        ws = measure_wavespeed(tr.times, tr.positions);
    } catch (const std::runtime_error& e) {
        throw NonConvergence(e.what());
    }
    json j = wavespeed_to_json(ws);
    j["c"] = -ws.speed;
    j["lhs_scale"] = so.lhs_scale;
    out.json_file("wavespeed.json", j);
    std::ostringstream traj;
    traj << "t,position\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        traj << format_number(tr.times[i]) << ',' << format_number(tr.positions[i]) << '\n';
    out.csv_file("trajectory.csv", traj.str());
    for (std::size_t i = 0; i < tr.snapshots.size(); ++i)
        out.csv_file("snapshot_" + std::to_string(i) + ".csv", profile_to_csv(tr.snapshots[i]));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Travelling waves of fully discrete lattice reaction-diffusion systems"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    int workers = 0;
    long long seed = -1;
    double tol = 0.0;
    app.add_option("--config", config_path, "JSON run configuration")->required();
    app.add_option("--out", out_dir, "output directory (overrides run.output_dir)");
    app.add_option("--workers", workers, "sweep worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "rng seed (overrides run.rng_seed)")->check(CLI::NonNegativeNumber);
    app.add_option("--tol", tol, "Newton tolerance (overrides run.tol)")->check(CLI::PositiveNumber);
    for (const auto& cmd : known_commands()) app.add_subcommand(cmd);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        cfg = load_config(config_path);
        cfg.run.command = command;
        if (!out_dir.empty()) cfg.run.output_dir = out_dir;
        if (workers > 0) cfg.run.workers = workers;
        if (seed >= 0) cfg.run.rng_seed = static_cast<unsigned long long>(seed);
        if (tol > 0.0) cfg.run.tol = tol;
        validate(cfg);
    } catch (const ConfigError& e) {
        log(LogLevel::Error, e.what());
        return 1;
    }

    Output out{cfg.run.output_dir, config_hash(cfg)};
    std::error_code ec;
    fs::create_directories(out.dir, ec);
    if (ec) {
        log(LogLevel::Error, "cannot create output directory " + out.dir.string() + ": " + ec.message());
        return 1;
    }
    log(LogLevel::Info, command + " config " + out.hash);

    const auto t0 = std::chrono::steady_clock::now();
    int rc = 0;
    std::string status = "ok", message;
    try {
        if (command == "check-assumptions") rc = check_assumptions(cfg, out);
        else if (command == "solve-semi") rc = solve_semi(cfg, out);
        else if (command == "solve-wave") rc = solve_wave(cfg, out);
        else if (command == "sweep") rc = run_sweep(cfg, out);
        else if (command == "spectrum-scan") rc = spectrum_scan(cfg, out);
        else if (command == "diagnostic") rc = diagnostic(cfg, out);
        else rc = simulate_cmd(cfg, out);
    } catch (const NonConvergence& e) {
        rc = 2;
        status = "non-convergence";
        message = e.what();
    } catch (const SolveError& e) {
        rc = 2;
        status = "non-convergence";
        message = e.what();
    } catch (const std::invalid_argument& e) {
        rc = 1;
        status = "config-error";
        message = e.what();
    } catch (const std::exception& e) {
        rc = 2;
        status = "failure";
        message = e.what();
    }
    if (!message.empty()) log(LogLevel::Error, message);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.json_file("run_metadata.json", {{"command", command},
                                        {"version", LATTICEWAVE_VERSION},
                                        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." + std::to_string(EIGEN_MINOR_VERSION)},
                                        {"config", config_to_json(cfg)},
                                        {"rng_seed", cfg.run.rng_seed},
                                        {"seed_policy", cfg.run.seed_policy},
                                        {"newton", {{"tol", cfg.run.tol}, {"max_iter", cfg.run.max_iter}, {"variant", "undamped"}}},
                                        {"status", status},
                                        {"message", message},
                                        {"exit_code", rc},
                                        {"wall_time_s", wall}});
    return rc;
}
