#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bdf.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "model.hpp"

namespace latticewave {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelBlock {
    std::string name = "fhn";
    double rho = 0.01;
    double gamma = 5.0;
};

struct KernelBlock {
    std::string name = "nearest_neighbor";  // or "gaussian"
    std::optional<double> tau;
    std::optional<double> h;                // tau = 1/h^2 when tau is absent
    double tail_tol = 1e-14;

    double resolved_tau() const {
        if (tau) return *tau;
        if (h) return 1.0 / (*h * *h);
        return 1.0;
    }
};

struct GridBlock {
    long p = 8;
    long q = 5;
    long p_max = 20;      // sweep columns p = 1..p_max
    long q_factor = 2;    // q = 1..q_factor p
    long L = 80;
    double dt = 2.0;
    std::optional<double> lhs_scale;  // defaults to 1/h when the kernel is given by h
    std::string extension = "neumann";
    long p0 = 8;          // fine grid for semi-discrete and limit problems
    long L_semi = 60;
};

struct RunBlock {
    std::string command = "check-assumptions";
    double tol = 1e-10;
    int max_iter = 50;
    std::vector<std::string> seed_policy{"timesim", "semidiscrete", "continuation"};
    unsigned long long rng_seed = 1;
    std::string output_dir = "out";
    int workers = 1;
    double r = 0.11;
    int r_from = 0;       // sweep detunings in percent
    int r_to = 30;
    double seed_r = 0.15;
    double seed_center = 30.0;
    double delta0 = 0.1;
    long sim_steps = 240;
    long sim_sites = 400;
    long snapshot_stride = 0;
};

struct RunConfig {
    ModelBlock model;
    KernelBlock kernel;
    int scheme_k = 1;
    GridBlock grid;
    RunBlock run;

    double lhs_scale() const {
        if (grid.lhs_scale) return *grid.lhs_scale;
        if (kernel.h && !kernel.tau) return 1.0 / *kernel.h;
        return 1.0;
    }
};

inline const std::vector<std::string>& known_commands() {
    static const std::vector<std::string> c{"check-assumptions", "solve-semi", "solve-wave", "sweep",
                                            "spectrum-scan", "diagnostic", "simulate"};
    return c;
}

inline json config_to_json(const RunConfig& c) {
    json k{{"name", c.kernel.name}, {"tail_tol", c.kernel.tail_tol}};
    if (c.kernel.tau) k["tau"] = *c.kernel.tau;
    if (c.kernel.h) k["h"] = *c.kernel.h;
    json g{{"p", c.grid.p},         {"q", c.grid.q},   {"p_max", c.grid.p_max},         {"q_factor", c.grid.q_factor},
           {"L", c.grid.L},         {"dt", c.grid.dt}, {"extension", c.grid.extension}, {"p0", c.grid.p0},
           {"L_semi", c.grid.L_semi}};
    if (c.grid.lhs_scale) g["lhs_scale"] = *c.grid.lhs_scale;
    return json{{"model", {{"name", c.model.name}, {"rho", c.model.rho}, {"gamma", c.model.gamma}}},
                {"kernel", k},
                {"scheme", {{"k", c.scheme_k}}},
                {"grid", g},
                {"run",
                 {{"command", c.run.command},
                  {"tol", c.run.tol},
                  {"max_iter", c.run.max_iter},
                  {"seed_policy", c.run.seed_policy},
                  {"rng_seed", c.run.rng_seed},
                  {"output_dir", c.run.output_dir},
                  {"workers", c.run.workers},
                  {"r", c.run.r},
                  {"r_from", c.run.r_from},
                  {"r_to", c.run.r_to},
                  {"seed_r", c.run.seed_r},
                  {"seed_center", c.run.seed_center},
                  {"delta0", c.run.delta0},
                  {"sim_steps", c.run.sim_steps},
                  {"sim_sites", c.run.sim_sites},
                  {"snapshot_stride", c.run.snapshot_stride}}}};
}

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

template <class T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
    if (!j.contains(key)) return;
    T v{};
    read_opt(j, key, v);
    out = v;
}

inline const json& block(const json& j, const char* key) {
    static const json empty = json::object();
    if (!j.contains(key)) return empty;
    if (!j.at(key).is_object()) throw ConfigError(std::string("config block '") + key + "' must be an object");
    return j.at(key);
}

}  // namespace detail

inline void validate(const RunConfig& c) {
    if (c.model.name != "fhn" && c.model.name != "nagumo") throw ConfigError("unknown model '" + c.model.name + "'");
    if (c.kernel.name != "nearest_neighbor" && c.kernel.name != "gaussian")
        throw ConfigError("unknown kernel '" + c.kernel.name + "'");
    if (!(c.kernel.resolved_tau() > 0.0)) throw ConfigError("kernel tau must be positive");
    if (c.kernel.h && !(*c.kernel.h > 0.0)) throw ConfigError("kernel h must be positive");
    if (c.scheme_k < 1 || c.scheme_k > 6) throw ConfigError("scheme k must lie in 1..6");
    if (c.grid.p < 1 || c.grid.q < 1) throw ConfigError("grid p and q must be positive");
    if (c.grid.L < 8 || c.grid.L_semi < 8) throw ConfigError("window half-width must be at least 8");
    if (!(c.grid.dt > 0.0)) throw ConfigError("dt must be positive");
    if (c.grid.p0 < 1) throw ConfigError("fine grid p0 must be positive");
    if (c.grid.p_max < 1 || c.grid.q_factor < 1) throw ConfigError("sweep ranges must be positive");
    if (c.grid.lhs_scale && !(*c.grid.lhs_scale > 0.0)) throw ConfigError("lhs_scale must be positive");
    try {
        (void)extension_from_string(c.grid.extension);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    bool known = false;
    for (const auto& k : known_commands()) known = known || k == c.run.command;
    if (!known) throw ConfigError("unknown command '" + c.run.command + "'");
    for (const auto& s : c.run.seed_policy)
        if (s != "timesim" && s != "semidiscrete" && s != "continuation")
            throw ConfigError("unknown seed policy entry '" + s + "'");
    if (!(c.run.tol > 0.0) || c.run.max_iter < 1) throw ConfigError("Newton tolerance and cap must be positive");
    if (c.run.workers < 1) throw ConfigError("workers must be at least 1");
    if (c.run.r_from > c.run.r_to) throw ConfigError("r_from exceeds r_to");
    if (!(c.run.delta0 > 0.0)) throw ConfigError("delta0 must be positive");
    if (c.run.sim_steps < 1 || c.run.sim_sites < 16) throw ConfigError("simulation length and lattice must be positive");
}

inline RunConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c;
    const json& m = detail::block(j, "model");
    detail::read_opt(m, "name", c.model.name);
    detail::read_opt(m, "rho", c.model.rho);
    detail::read_opt(m, "gamma", c.model.gamma);
    const json& k = detail::block(j, "kernel");
    detail::read_opt(k, "name", c.kernel.name);
    detail::read_opt(k, "tau", c.kernel.tau);
    detail::read_opt(k, "h", c.kernel.h);
    detail::read_opt(k, "tail_tol", c.kernel.tail_tol);
    detail::read_opt(detail::block(j, "scheme"), "k", c.scheme_k);
    const json& g = detail::block(j, "grid");
    detail::read_opt(g, "p", c.grid.p);
    detail::read_opt(g, "q", c.grid.q);
    detail::read_opt(g, "p_max", c.grid.p_max);
    detail::read_opt(g, "q_factor", c.grid.q_factor);
    detail::read_opt(g, "L", c.grid.L);
    detail::read_opt(g, "dt", c.grid.dt);
    detail::read_opt(g, "lhs_scale", c.grid.lhs_scale);
    detail::read_opt(g, "extension", c.grid.extension);
    detail::read_opt(g, "p0", c.grid.p0);
    detail::read_opt(g, "L_semi", c.grid.L_semi);
    const json& r = detail::block(j, "run");
    detail::read_opt(r, "command", c.run.command);
    detail::read_opt(r, "tol", c.run.tol);
    detail::read_opt(r, "max_iter", c.run.max_iter);
    detail::read_opt(r, "seed_policy", c.run.seed_policy);
    detail::read_opt(r, "rng_seed", c.run.rng_seed);
    detail::read_opt(r, "output_dir", c.run.output_dir);
    detail::read_opt(r, "workers", c.run.workers);
    detail::read_opt(r, "r", c.run.r);
    detail::read_opt(r, "r_from", c.run.r_from);
    detail::read_opt(r, "r_to", c.run.r_to);
    detail::read_opt(r, "seed_r", c.run.seed_r);
    detail::read_opt(r, "seed_center", c.run.seed_center);
    detail::read_opt(r, "delta0", c.run.delta0);
    detail::read_opt(r, "sim_steps", c.run.sim_steps);
    detail::read_opt(r, "sim_sites", c.run.sim_sites);
    detail::read_opt(r, "snapshot_stride", c.run.snapshot_stride);
    validate(c);
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// FNV-1a over the sorted-key compact serialization. Where results go and how many threads produce them
// do not change the results, so output_dir and workers are left out.
inline std::string config_hash(const RunConfig& c) {
    json j = config_to_json(c);
    j["run"].erase("output_dir");
    j["run"].erase("workers");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

inline ReactionModel model_from_config(const RunConfig& c) {
    return c.model.name == "nagumo" ? nagumo_model() : fhn_model(c.model.rho, c.model.gamma);
}

inline InteractionKernel kernel_from_config(const RunConfig& c, int d, int d_diff) {
    const double tau = c.kernel.resolved_tau();
    return c.kernel.name == "gaussian" ? build_gaussian_kernel(d, d_diff, tau, c.kernel.tail_tol)
                                       : build_nearest_neighbor_kernel(d, d_diff, tau);
}

// ---- logging ----

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
    const char* env = std::getenv("LATTICEWAVE_LOG");
    if (!env) return LogLevel::Error;
    const std::string s(env);
    if (s == "debug") return LogLevel::Debug;
    if (s == "info") return LogLevel::Info;
    return LogLevel::Error;
}

inline void log(LogLevel level, const std::string& msg) {
    if (int(level) > int(log_level())) return;
    static const char* names[] = {"error", "info", "debug"};
    std::fprintf(stderr, "[latticewave %s] %s\n", names[int(level)], msg.c_str());
}

}  // namespace latticewave
