// noiseloom — command-line front end: sample | evolve | stats | validate | exact.
//
// Exit codes: 0 success, 1 domain error, 2 I/O, format, or usage error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "noiseloom/noiseloom.hpp"

namespace {

using nlohmann::json;
using namespace noiseloom;

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw FormatError("config file " + path + ": expected a JSON object");
    return j;
}

// Flags win over config-file values: only options the user did not pass on the
// command line are filled from the config.
template <typename T>
void fill_from_config(const CLI::Option* opt, const json& cfg, const char* key, T& var) {
    if (opt != nullptr && opt->count() > 0) return;
    if (!cfg.contains(key)) return;
    try {
        var = cfg[key].get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("config field '") + key + "': " + e.what());
    }
}

std::size_t resolve_workers(std::size_t flag_value) {
    const char* env = std::getenv("NOISE_LOOM_WORKERS");
    if (env == nullptr || *env == '\0') return flag_value;
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == nullptr || *end != '\0' || v == 0) {
        throw InvalidParameter("NOISE_LOOM_WORKERS must be a positive integer, got '" +
                               std::string(env) + "'");
    }
    return static_cast<std::size_t>(v);
}

void require(bool ok, const std::string& message) {
    if (!ok) throw FormatError(message);
}

opensim::SystemSpec load_system(const std::string& selector) {
    if (selector == "pure-dephasing") return opensim::pure_dephasing_qubit();
    std::ifstream in(selector);
    if (!in) throw IoError("cannot open system file: " + selector);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("system file " + selector + ": " + e.what());
    }
    for (const char* key : {"H", "V", "rho"}) {
        if (!j.contains(key)) {
            throw FormatError("system file " + selector + ": missing field '" + key + "'");
        }
    }
    return opensim::SystemSpec(envmodel::matrix_from_json(j["H"], "H"),
                               envmodel::matrix_from_json(j["V"], "V"),
                               qcore::DensityMatrix(envmodel::matrix_from_json(j["rho"], "rho")));
}

struct SampleArgs {
    std::string model_path, output, config;
    double gamma = 0.0, omega = 0.0, dt = 0.0;
    std::size_t steps = 0, ensemble = 0, workers = 1;
    std::uint64_t seed = 0;
};

int run_sample(const SampleArgs& a, bool have_model, bool have_gamma, bool have_omega,
               bool have_seed) {
    require(!a.output.empty(), "sample: missing --output path");
    require(have_seed, "sample: --seed is required (no silent nondeterminism)");
    require(a.dt > 0.0 && a.steps > 0 && a.ensemble > 0,
            "sample: --dt, --steps and --ensemble must be positive");

    std::optional<envmodel::EnvironmentModel> env;
    if (have_model) {
        env = envmodel::load_model(a.model_path);
    } else {
        require(have_gamma && have_omega,
                "sample: provide either --model or both --gamma and --omega");
        env = envmodel::build_rtn_env(a.gamma, a.omega);
    }

    const auto ens = sampler::sample_ensemble(*env, a.dt, a.steps, a.ensemble, a.seed,
                                              resolve_workers(a.workers));
    sampler::save_ensemble(ens, a.output);

    std::vector<std::size_t> counts(ens.omega_values.size(), 0);
    for (const auto& traj : ens.trajectories)
        for (auto idx : traj.outcome_indices) counts[idx] += 1;
    const double total = static_cast<double>(ens.size() * ens.steps());

    std::cout << "sampled " << ens.size() << " trajectories, k = " << ens.steps()
              << ", dt = " << util::format_g17(ens.dt()) << ", model " << env->label() << "\n";
    std::cout << "empirical marginals:";
    for (std::size_t i = 0; i < counts.size(); ++i) {
        std::cout << " p(" << util::format_g17(ens.omega_values[i])
                  << ") = " << static_cast<double>(counts[i]) / total;
    }
    std::cout << "\nwrote " << a.output << "\n";
    return 0;
}

struct EvolveArgs {
    std::string ensemble_path, system = "pure-dephasing", integrator = "pc", output, config;
    double gamma = 0.0;
    std::size_t workers = 1;
};

int run_evolve(const EvolveArgs& a, bool have_gamma) {
    require(!a.ensemble_path.empty(), "evolve: missing --ensemble input path");
    require(!a.output.empty(), "evolve: missing --output path");
    require(a.integrator == "pc" || a.integrator == "rk4",
            "evolve: --integrator must be pc or rk4");

    const auto ens = sampler::load_ensemble(a.ensemble_path);
    const auto sys = load_system(a.system);
    const auto integ = a.integrator == "pc" ? opensim::Integrator::PiecewiseConstant
                                            : opensim::Integrator::RungeKutta4;

    auto report = opensim::evolve_ensemble(sys, ens, integ, resolve_workers(a.workers));

    if (have_gamma) {
        const double span =
            ens.omega_values.back() - ens.omega_values.front();  // noise strength omega
        opensim::attach_reference(report, opensim::rtn_reference(report.times, a.gamma, span));
    }
    opensim::write_report_csv(report, a.output);

    std::cout << "evolved " << report.ensemble_size << " trajectories with " << report.integrator
              << ", " << report.times.size() << " grid points\n";
    if (have_gamma) {
        std::cout << "reference deviation: rms = " << report.rms << ", max = " << report.max_abs
                  << "\n";
    }
    std::cout << "wrote " << a.output << "\n";
    return 0;
}

struct StatsArgs {
    std::string ensemble_path, acf_path = "acf.csv", psd_path = "psd.csv", config;
    std::size_t lags = 0;
};

int run_stats(const StatsArgs& a) {
    require(!a.ensemble_path.empty(), "stats: missing --ensemble input path");
    const auto ens = sampler::load_ensemble(a.ensemble_path);
    std::size_t lags = a.lags;
    if (lags == 0) lags = std::min<std::size_t>(ens.steps() - 1, 25);

    const auto acf = noisestats::pooled_autocorrelation(ens, lags);
    noisestats::write_acf_csv(acf, a.acf_path);
    const auto psd = noisestats::estimate_psd(ens, lags);
    noisestats::write_psd_csv(psd, a.psd_path);

    std::cout << "acf over " << lags << " lags -> " << a.acf_path << "\n";
    std::cout << "psd (" << psd.s.size() << " frequencies) -> " << a.psd_path << "\n";
    return 0;
}

struct ValidateArgs {
    std::string model_path, config;
    std::size_t k = 3;
    double dt = 0.0;
    std::size_t budget = quasiprob::kDefaultBudget;
};

int run_validate(const ValidateArgs& a) {
    require(!a.model_path.empty(), "validate: missing --model path");
    require(a.dt > 0.0 && a.k >= 1, "validate: --dt must be positive and --k >= 1");

    const auto model = envmodel::load_model(a.model_path);
    if (!model.is_exact()) {
        throw InvalidParameter("validate: witness requires an exact environment model");
    }

    nlohmann::ordered_json out;
    out["model"] = model.label();
    out["fingerprint"] = model.fingerprint();
    out["dt"] = a.dt;
    out["witness"] = nlohmann::ordered_json::array();
    for (std::size_t k = 1; k <= a.k; ++k) {
        const auto w = quasiprob::validity_witness(model.exact(),
                                                   quasiprob::TimeGrid::uniform(a.dt, k),
                                                   a.budget);
        nlohmann::ordered_json row;
        row["k"] = k;
        row["offdiag_mass"] = w.offdiag_mass;
        row["kolmogorov_residual"] = w.kolmogorov_residual;
        out["witness"].push_back(row);
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

struct ExactArgs {
    std::string output, config;
    double gamma = 0.0, omega = 0.0, tmax = 0.0;
    std::size_t points = 0;
};

int run_exact(const ExactArgs& a) {
    require(!a.output.empty(), "exact: missing --output path");
    require(a.points >= 2, "exact: --points must be at least 2");
    require(a.tmax > 0.0, "exact: --tmax must be positive");

    std::ofstream out(a.output, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + a.output);
    out << "t,coherence\n";
    for (std::size_t i = 0; i < a.points; ++i) {
        const double t = a.tmax * static_cast<double>(i) / static_cast<double>(a.points - 1);
        out << util::format_g17(t) << ','
            << util::format_g17(opensim::exact_rtn_coherence(a.gamma, a.omega, t)) << '\n';
    }
    if (!out) throw IoError("write failed: " + a.output);
    std::cout << "wrote " << a.output << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noiseloom: measured-trajectory surrogate-noise workbench"};
    app.require_subcommand(1);

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "sample a trajectory ensemble");
    auto* sa_model = sample->add_option("--model", sa.model_path, "model definition JSON");
    auto* sa_gamma = sample->add_option("--gamma", sa.gamma, "RTN switching rate");
    auto* sa_omega = sample->add_option("--omega", sa.omega, "RTN coupling strength");
    auto* sa_dt = sample->add_option("--dt", sa.dt, "measurement interval");
    auto* sa_steps = sample->add_option("--steps", sa.steps, "measurements per trajectory");
    auto* sa_n = sample->add_option("--ensemble", sa.ensemble, "number of trajectories");
    auto* sa_seed = sample->add_option("--seed", sa.seed, "master seed (required)");
    auto* sa_out = sample->add_option("-o,--output", sa.output, "ensemble file to write");
    auto* sa_workers = sample->add_option("--workers", sa.workers, "sampling workers");
    sample->add_option("--config", sa.config, "JSON config file (flags override)");

    EvolveArgs ea;
    auto* evolve = app.add_subcommand("evolve", "replay an ensemble through an open system");
    auto* ea_in = evolve->add_option("-i,--ensemble", ea.ensemble_path, "ensemble file");
    auto* ea_sys = evolve->add_option("--system", ea.system,
                                      "'pure-dephasing' or a system spec JSON");
    auto* ea_integ = evolve->add_option("--integrator", ea.integrator, "pc | rk4");
    auto* ea_out = evolve->add_option("-o,--output", ea.output, "report CSV to write");
    auto* ea_gamma = evolve->add_option(
        "--gamma", ea.gamma, "attach the exact telegraph-noise reference for this rate");
    auto* ea_workers = evolve->add_option("--workers", ea.workers, "replay workers");
    evolve->add_option("--config", ea.config, "JSON config file (flags override)");

    StatsArgs ta;
    auto* stats = app.add_subcommand("stats", "autocorrelation and spectral density");
    auto* ta_in = stats->add_option("-i,--ensemble", ta.ensemble_path, "ensemble file");
    auto* ta_acf = stats->add_option("--acf", ta.acf_path, "ACF CSV path");
    auto* ta_psd = stats->add_option("--psd", ta.psd_path, "PSD CSV path");
    auto* ta_lags = stats->add_option("--lags", ta.lags, "lag window (default min(k-1, 25))");
    stats->add_option("--config", ta.config, "JSON config file (flags override)");

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "noise-representation validity witness");
    auto* va_model = validate->add_option("--model", va.model_path, "exact model JSON");
    auto* va_k = validate->add_option("--k", va.k, "largest sequence length");
    auto* va_dt = validate->add_option("--dt", va.dt, "grid spacing");
    auto* va_budget = validate->add_option("--budget", va.budget, "table entry budget");
    validate->add_option("--config", va.config, "JSON config file (flags override)");

    ExactArgs xa;
    auto* exact = app.add_subcommand("exact", "closed-form dephasing coherence curve");
    auto* xa_gamma = exact->add_option("--gamma", xa.gamma, "switching rate");
    auto* xa_omega = exact->add_option("--omega", xa.omega, "coupling strength");
    auto* xa_tmax = exact->add_option("--tmax", xa.tmax, "final time");
    auto* xa_points = exact->add_option("--points", xa.points, "number of rows");
    auto* xa_out = exact->add_option("-o,--output", xa.output, "CSV to write");
    exact->add_option("--config", xa.config, "JSON config file (flags override)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sample->parsed()) {
            json cfg = sa.config.empty() ? json::object() : load_config(sa.config);
            fill_from_config(sa_model, cfg, "model", sa.model_path);
            fill_from_config(sa_gamma, cfg, "gamma", sa.gamma);
            fill_from_config(sa_omega, cfg, "omega", sa.omega);
            fill_from_config(sa_dt, cfg, "dt", sa.dt);
            fill_from_config(sa_steps, cfg, "steps", sa.steps);
            fill_from_config(sa_n, cfg, "ensemble", sa.ensemble);
            fill_from_config(sa_seed, cfg, "seed", sa.seed);
            fill_from_config(sa_out, cfg, "output", sa.output);
            fill_from_config(sa_workers, cfg, "workers", sa.workers);
            const bool have_model = sa_model->count() > 0 || cfg.contains("model");
            const bool have_gamma = sa_gamma->count() > 0 || cfg.contains("gamma");
            const bool have_omega = sa_omega->count() > 0 || cfg.contains("omega");
            const bool have_seed = sa_seed->count() > 0 || cfg.contains("seed");
            return run_sample(sa, have_model, have_gamma, have_omega, have_seed);
        }
        if (evolve->parsed()) {
            json cfg = ea.config.empty() ? json::object() : load_config(ea.config);
            fill_from_config(ea_in, cfg, "ensemble", ea.ensemble_path);
            fill_from_config(ea_sys, cfg, "system", ea.system);
            fill_from_config(ea_integ, cfg, "integrator", ea.integrator);
            fill_from_config(ea_out, cfg, "output", ea.output);
            fill_from_config(ea_gamma, cfg, "gamma", ea.gamma);
            fill_from_config(ea_workers, cfg, "workers", ea.workers);
            const bool have_gamma = ea_gamma->count() > 0 || cfg.contains("gamma");
            return run_evolve(ea, have_gamma);
        }
        if (stats->parsed()) {
            json cfg = ta.config.empty() ? json::object() : load_config(ta.config);
            fill_from_config(ta_in, cfg, "ensemble", ta.ensemble_path);
            fill_from_config(ta_acf, cfg, "acf", ta.acf_path);
            fill_from_config(ta_psd, cfg, "psd", ta.psd_path);
            fill_from_config(ta_lags, cfg, "lags", ta.lags);
            return run_stats(ta);
        }
        if (validate->parsed()) {
            json cfg = va.config.empty() ? json::object() : load_config(va.config);
            fill_from_config(va_model, cfg, "model", va.model_path);
            fill_from_config(va_k, cfg, "k", va.k);
            fill_from_config(va_dt, cfg, "dt", va.dt);
            fill_from_config(va_budget, cfg, "budget", va.budget);
            return run_validate(va);
        }
        if (exact->parsed()) {
            json cfg = xa.config.empty() ? json::object() : load_config(xa.config);
            fill_from_config(xa_gamma, cfg, "gamma", xa.gamma);
            fill_from_config(xa_omega, cfg, "omega", xa.omega);
            fill_from_config(xa_tmax, cfg, "tmax", xa.tmax);
            fill_from_config(xa_points, cfg, "points", xa.points);
            fill_from_config(xa_out, cfg, "output", xa.output);
            return run_exact(xa);
        }
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
