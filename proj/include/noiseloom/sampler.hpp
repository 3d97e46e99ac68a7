// sampler.hpp — sequential projective measurement of the environment coupling:
// Born rule, collapse, inter-measurement propagation. Produces trajectory
// ensembles and persists them in the "traj-ens/1" text format.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "noiseloom/envmodel.hpp"
#include "noiseloom/errors.hpp"
#include "noiseloom/qcore.hpp"
#include "noiseloom/rng.hpp"
#include "noiseloom/util.hpp"

namespace noiseloom::sampler {

using envmodel::EnvironmentModel;
using envmodel::StepPropagator;
using qcore::complex;
using qcore::ComplexMatrix;
using qcore::DensityMatrix;
using qcore::Observable;

// One sampled outcome sequence on a uniform time grid starting at t0.
struct Trajectory {
    std::vector<std::uint16_t> outcome_indices;  // each in [0, |spectrum|)
    double grid_dt = 0.0;
    double t0 = 0.0;

    std::size_t steps() const { return outcome_indices.size(); }
};

struct TrajectoryEnsemble {
    std::vector<Trajectory> trajectories;
    std::vector<double> omega_values;  // measured spectrum, ascending
    std::string model_fingerprint;
    std::uint64_t master_seed = 0;
    std::string created_at;

    std::size_t size() const { return trajectories.size(); }
    std::size_t steps() const { return trajectories.empty() ? 0 : trajectories[0].steps(); }
    double dt() const { return trajectories.empty() ? 0.0 : trajectories[0].grid_dt; }

    // Field value of trajectory j at grid index l.
    double xi(std::size_t j, std::size_t l) const {
        return omega_values[trajectories[j].outcome_indices[l]];
    }
};

struct MeasurementOutcome {
    std::size_t index;
    DensityMatrix collapsed;
    double probability;
};

namespace detail {

inline std::vector<double> born_probabilities(const ComplexMatrix& state, const Observable& obs) {
    std::vector<double> p(obs.outcomes());
    for (std::size_t i = 0; i < obs.outcomes(); ++i) {
        const auto& proj = obs.projectors[i];
        // tr(P rho): only the diagonal of P*rho is needed.
        complex t{};
        for (std::size_t r = 0; r < state.dim(); ++r)
            for (std::size_t c = 0; c < state.dim(); ++c) t += proj(r, c) * state(c, r);
        p[i] = t.real();
    }
    return p;
}

// Inverse-CDF outcome selection plus collapse, on raw matrices.
inline std::pair<std::size_t, double> pick_outcome(const std::vector<double>& p, double rand01) {
    double cum = 0.0;
    std::size_t pick = p.size();
    for (std::size_t i = 0; i < p.size(); ++i) {
        cum += std::max(p[i], 0.0);
        if (rand01 < cum) { pick = i; break; }
    }
    if (pick == p.size()) {
        // rand01 beyond accumulated mass (round-off): take the last outcome
        // with non-negligible probability.
        for (std::size_t i = p.size(); i-- > 0;) {
            if (p[i] > 1e-14) { pick = i; break; }
        }
        if (pick == p.size()) throw DegenerateDistribution("all outcome probabilities vanish");
    }
    if (p[pick] < 1e-14) {
        throw DegenerateDistribution("selected outcome " + std::to_string(pick) +
                                     " has probability " + util::format_g17(p[pick]));
    }
    return {pick, p[pick]};
}

inline ComplexMatrix collapse(const ComplexMatrix& state, const ComplexMatrix& proj, double prob) {
    ComplexMatrix out = proj * state * proj;
    out *= complex{1.0 / prob, 0.0};
    return out.symmetrized();
}

inline Trajectory sample_one(const EnvironmentModel& env, const StepPropagator& step, double dt,
                             std::size_t k, CounterRng& stream) {
    const Observable& obs = env.coupling();
    Trajectory traj;
    traj.grid_dt = dt;
    traj.outcome_indices.reserve(k);

    ComplexMatrix state = env.initial_state().matrix();
    for (std::size_t l = 0; l < k; ++l) {
        const auto probs = born_probabilities(state, obs);
        const auto [pick, prob] = pick_outcome(probs, stream.next_unit());
        traj.outcome_indices.push_back(static_cast<std::uint16_t>(pick));
        state = collapse(state, obs.projectors[pick], prob);
        if (l + 1 < k) state = step.apply_raw(state);
    }
    return traj;
}

}  // namespace detail

// Single projective measurement: outcome index drawn by inverse CDF on
// rand01, collapsed state P rho P / p, and the outcome probability.
inline MeasurementOutcome measure_once(const DensityMatrix& state, const Observable& obs,
                                       double rand01) {
    if (obs.dim() != state.dim()) {
        throw DimensionMismatch("measure_once: observable dim " + std::to_string(obs.dim()) +
                                " vs state dim " + std::to_string(state.dim()));
    }
    const auto probs = detail::born_probabilities(state.matrix(), obs);
    double total = 0.0;
    for (double p : probs) total += p;
    if (std::abs(total - 1.0) > 1e-10) {
        throw InvalidParameter("measure_once: outcome probabilities sum to " +
                               util::format_g17(total) + ", projectors not complete");
    }
    const auto [pick, prob] = detail::pick_outcome(probs, rand01);
    return MeasurementOutcome{
        pick, DensityMatrix::unchecked(detail::collapse(state.matrix(), obs.projectors[pick], prob)),
        prob};
}

// One trajectory: measure at t0 = 0, collapse, propagate by dt, measure, ...
// for k outcomes total. The state is renormalized after every collapse.
inline Trajectory sample_trajectory(const EnvironmentModel& env, double dt, std::size_t k,
                                    CounterRng& stream) {
    if (k < 1) throw InvalidParameter("sample_trajectory: need at least one step");
    if (!(dt > 0.0)) throw InvalidParameter("sample_trajectory: dt must be positive");
    const StepPropagator step = envmodel::make_step_propagator(env, dt);
    return detail::sample_one(env, step, dt, k, stream);
}

// Ensemble of n_e independent trajectories. Trajectory j consumes the RNG
// stream derived from (master_seed, j), so the result does not depend on the
// number of workers or their scheduling.
inline TrajectoryEnsemble sample_ensemble(const EnvironmentModel& env, double dt, std::size_t k,
                                          std::size_t n_e, std::uint64_t master_seed,
                                          std::size_t workers = 1) {
    if (n_e < 1) throw InvalidParameter("sample_ensemble: need at least one trajectory");
    if (k < 1) throw InvalidParameter("sample_ensemble: need at least one step");
    if (!(dt > 0.0)) throw InvalidParameter("sample_ensemble: dt must be positive");

    TrajectoryEnsemble ens;
    ens.omega_values = env.coupling().values;
    ens.model_fingerprint = env.fingerprint();
    ens.master_seed = master_seed;
    ens.created_at = util::iso8601_utc_now();
    ens.trajectories.resize(n_e);

    const StepPropagator step = envmodel::make_step_propagator(env, dt);
    auto worker = [&](std::atomic<std::size_t>& cursor) {
        for (;;) {
            const std::size_t j = cursor.fetch_add(1);
            if (j >= n_e) return;
            CounterRng stream(master_seed, j);
            ens.trajectories[j] = detail::sample_one(env, step, dt, k, stream);
        }
    };

    if (workers <= 1) {
        std::atomic<std::size_t> cursor{0};
        worker(cursor);
    } else {
        std::atomic<std::size_t> cursor{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back([&] { worker(cursor); });
        for (auto& t : pool) t.join();
    }
    return ens;
}

// --- persistence, format "traj-ens/1" ---------------------------------------
//
// Line 1 is a JSON header; lines 2..n+1 hold comma-separated outcome indices,
// k integers per line, LF newlines, decimals with 17 significant digits.

inline std::string ensemble_header_line(const TrajectoryEnsemble& ens) {
    std::ostringstream h;
    h << "{\"format\":\"traj-ens/1\",\"dt\":" << util::format_g17(ens.dt())
      << ",\"k\":" << ens.steps() << ",\"n\":" << ens.size() << ",\"omega_values\":[";
    for (std::size_t i = 0; i < ens.omega_values.size(); ++i) {
        if (i) h << ',';
        h << util::format_g17(ens.omega_values[i]);
    }
    h << "],\"model_fingerprint\":\"" << ens.model_fingerprint << "\",\"master_seed\":"
      << ens.master_seed << ",\"created_at\":\"" << ens.created_at << "\"}";
    return h.str();
}

inline void save_ensemble(const TrajectoryEnsemble& ens, const std::string& path) {
    if (ens.size() == 0) throw InvalidParameter("save_ensemble: empty ensemble");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << ensemble_header_line(ens) << '\n';
    std::string line;
    for (const auto& traj : ens.trajectories) {
        line.clear();
        for (std::size_t l = 0; l < traj.outcome_indices.size(); ++l) {
            if (l) line.push_back(',');
            line += std::to_string(traj.outcome_indices[l]);
        }
        line.push_back('\n');
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

inline TrajectoryEnsemble load_ensemble(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open ensemble file: " + path);

    std::string header;
    if (!std::getline(in, header)) throw FormatError(path + ": missing header line");

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": bad header: " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "traj-ens/1") {
        throw FormatError(path + ": bad magic, expected format traj-ens/1");
    }
    for (const char* key : {"dt", "k", "n", "omega_values", "model_fingerprint", "master_seed"}) {
        if (!j.contains(key)) throw FormatError(path + ": header missing field '" + key + "'");
    }

    TrajectoryEnsemble ens;
    const double dt = j["dt"].get<double>();
    const std::size_t k = j["k"].get<std::size_t>();
    const std::size_t n = j["n"].get<std::size_t>();
    ens.omega_values = j["omega_values"].get<std::vector<double>>();
    ens.model_fingerprint = j["model_fingerprint"].get<std::string>();
    ens.master_seed = j["master_seed"].get<std::uint64_t>();
    ens.created_at = j.value("created_at", "");
    if (!(dt > 0.0) || k == 0 || n == 0 || ens.omega_values.empty()) {
        throw FormatError(path + ": header fields out of range");
    }

    ens.trajectories.resize(n);
    std::string line;
    for (std::size_t row = 0; row < n; ++row) {
        if (!std::getline(in, line)) {
            throw FormatError(path + ": truncated at data row " + std::to_string(row + 1) +
                              " of " + std::to_string(n));
        }
        Trajectory traj;
        traj.grid_dt = dt;
        traj.outcome_indices.reserve(k);
        std::size_t pos = 0;
        while (pos <= line.size() && traj.outcome_indices.size() < k + 1) {
            const std::size_t comma = std::min(line.find(',', pos), line.size());
            const std::string field = line.substr(pos, comma - pos);
            char* end = nullptr;
            const unsigned long v = std::strtoul(field.c_str(), &end, 10);
            if (field.empty() || end == nullptr || *end != '\0' ||
                v >= ens.omega_values.size()) {
                throw FormatError(path + ": data row " + std::to_string(row + 1) +
                                  ": bad outcome index '" + field + "'");
            }
            traj.outcome_indices.push_back(static_cast<std::uint16_t>(v));
            if (comma >= line.size()) break;
            pos = comma + 1;
        }
        if (traj.outcome_indices.size() != k) {
            throw FormatError(path + ": data row " + std::to_string(row + 1) + ": expected " +
                              std::to_string(k) + " indices, got " +
                              std::to_string(traj.outcome_indices.size()));
        }
        ens.trajectories[row] = std::move(traj);
    }
    return ens;
}

}  // namespace noiseloom::sampler
