// opensim.hpp — trajectory-conditioned von Neumann dynamics of a small open
// system: exact piecewise-constant propagation, the RK4 variant with step
// h = 2*dt, ensemble averaging, and the closed-form dephasing reference.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "noiseloom/errors.hpp"
#include "noiseloom/qcore.hpp"
#include "noiseloom/sampler.hpp"
#include "noiseloom/util.hpp"

namespace noiseloom::opensim {

using qcore::complex;
using qcore::ComplexMatrix;
using qcore::DensityMatrix;
using sampler::Trajectory;

// Open system driven by the surrogate field: H(t) = h_s + xi(t) * v_s.
struct SystemSpec {
    ComplexMatrix h_s;
    ComplexMatrix v_s;
    DensityMatrix rho0;

    SystemSpec(ComplexMatrix h, ComplexMatrix v, DensityMatrix rho)
        : h_s(std::move(h)), v_s(std::move(v)), rho0(std::move(rho)) {
        if (h_s.dim() != v_s.dim() || h_s.dim() != rho0.dim()) {
            throw DimensionMismatch("system spec: H, V, rho0 must share one dimension");
        }
        if (h_s.hermiticity_error() > qcore::kHermTol ||
            v_s.hermiticity_error() > qcore::kHermTol) {
            throw NonHermitianInput("system spec: H and V must be Hermitian");
        }
    }
};

// Qubit with h_s = 0, v_s = sz/2, initial state |+x><+x| (coherence 1/2).
inline SystemSpec pure_dephasing_qubit() {
    return SystemSpec(ComplexMatrix(2),
                      ComplexMatrix::from_rows({{0.5, 0.0}, {0.0, -0.5}}),
                      DensityMatrix(ComplexMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}})));
}

struct TimeSeries {
    std::vector<double> times;
    std::vector<ComplexMatrix> states;
};

// Exact propagation of the piecewise-constant surrogate: the field holds the
// sampled value on each [t_l, t_{l+1}) and every interval applies one cached
// matrix exponential. Unitary per interval up to round-off.
inline TimeSeries evolve_trajectory_exact_pc(const SystemSpec& sys, const Trajectory& traj,
                                             const std::vector<double>& omega_values) {
    const std::size_t k = traj.steps();
    if (k < 1) throw GridMismatch("pc evolution: empty trajectory");
    for (auto idx : traj.outcome_indices) {
        if (idx >= omega_values.size()) {
            throw IndexOutOfRange("pc evolution: outcome index " + std::to_string(idx) +
                                  " out of range");
        }
    }

    std::vector<ComplexMatrix> step(omega_values.size());
    std::vector<ComplexMatrix> step_adj(omega_values.size());
    std::vector<bool> built(omega_values.size(), false);

    TimeSeries out;
    out.times.reserve(k + 1);
    out.states.reserve(k + 1);
    ComplexMatrix rho = sys.rho0.matrix();
    out.times.push_back(traj.t0);
    out.states.push_back(rho);

    for (std::size_t l = 0; l < k; ++l) {
        const std::size_t o = traj.outcome_indices[l];
        if (!built[o]) {
            ComplexMatrix h = sys.h_s + complex{omega_values[o], 0.0} * sys.v_s;
            step[o] = qcore::hermitian_propagator(h, traj.grid_dt);
            step_adj[o] = step[o].adjoint();
            built[o] = true;
        }
        rho = step[o] * rho * step_adj[o];
        out.times.push_back(traj.t0 + traj.grid_dt * static_cast<double>(l + 1));
        out.states.push_back(rho);
    }
    return out;
}

// Classical fourth-order Runge-Kutta with step h = 2*dt: the two interior
// stages share the midpoint sample, the end stage reads the next even sample.
// A trajectory of k samples supports floor((k-1)/2) full steps; any leftover
// half-interval at the tail is not evolved.
inline TimeSeries evolve_trajectory_rk4(const SystemSpec& sys, const Trajectory& traj,
                                        const std::vector<double>& omega_values) {
    const std::size_t k = traj.steps();
    if (k < 3) throw GridMismatch("rk4 evolution: need at least 3 samples for one h = 2*dt step");
    for (auto idx : traj.outcome_indices) {
        if (idx >= omega_values.size()) {
            throw IndexOutOfRange("rk4 evolution: outcome index " + std::to_string(idx) +
                                  " out of range");
        }
    }

    const double h = 2.0 * traj.grid_dt;
    const std::size_t n_steps = (k - 1) / 2;

    auto rhs = [&](double xi, const ComplexMatrix& rho) {
        ComplexMatrix ht = sys.h_s + complex{xi, 0.0} * sys.v_s;
        ComplexMatrix c = ht * rho - rho * ht;
        c *= complex{0.0, -1.0};
        return c;
    };

    TimeSeries out;
    out.times.reserve(n_steps + 1);
    out.states.reserve(n_steps + 1);
    ComplexMatrix rho = sys.rho0.matrix();
    out.times.push_back(traj.t0);
    out.states.push_back(rho);

    for (std::size_t n = 0; n < n_steps; ++n) {
        const double x0 = omega_values[traj.outcome_indices[2 * n]];
        const double xm = omega_values[traj.outcome_indices[2 * n + 1]];
        const double x1 = omega_values[traj.outcome_indices[2 * n + 2]];

        const ComplexMatrix k1 = rhs(x0, rho);
        const ComplexMatrix k2 = rhs(xm, rho + complex{h / 2.0, 0.0} * k1);
        const ComplexMatrix k3 = rhs(xm, rho + complex{h / 2.0, 0.0} * k2);
        const ComplexMatrix k4 = rhs(x1, rho + complex{h, 0.0} * k3);

        rho += complex{h / 6.0, 0.0} * (k1 + complex{2.0, 0.0} * (k2 + k3) + k4);
        rho = rho.symmetrized();

        out.times.push_back(traj.t0 + traj.grid_dt * static_cast<double>(2 * (n + 1)));
        out.states.push_back(rho);
    }
    return out;
}

struct SimulationReport {
    std::vector<double> times;
    std::vector<ComplexMatrix> averaged;
    std::size_t ensemble_size = 0;
    std::string integrator;
    std::pair<std::size_t, std::size_t> tracked{0, 1};

    // Optional per-time exact reference for the tracked element.
    std::vector<complex> reference;
    std::vector<double> per_time_error;
    double rms = std::numeric_limits<double>::quiet_NaN();
    double max_abs = std::numeric_limits<double>::quiet_NaN();

    complex tracked_value(std::size_t i) const {
        return averaged[i](tracked.first, tracked.second);
    }
};

// Entry-wise mean over the ensemble, in fixed index order.
inline SimulationReport ensemble_average(const std::vector<TimeSeries>& series,
                                         std::string integrator_tag = "pc") {
    if (series.empty()) throw GridMismatch("ensemble_average: no series");
    const auto& first = series.front();
    for (const auto& s : series) {
        if (s.times != first.times || s.states.size() != first.states.size()) {
            throw GridMismatch("ensemble_average: series grids differ");
        }
        if (!s.states.empty() && s.states[0].dim() != first.states[0].dim()) {
            throw GridMismatch("ensemble_average: series dimensions differ");
        }
    }

    SimulationReport report;
    report.times = first.times;
    report.integrator = std::move(integrator_tag);
    report.ensemble_size = series.size();
    const double inv = 1.0 / static_cast<double>(series.size());
    report.averaged.reserve(first.states.size());
    for (std::size_t i = 0; i < first.states.size(); ++i) {
        ComplexMatrix mean(first.states[0].dim());
        for (const auto& s : series) mean += s.states[i];
        mean *= complex{inv, 0.0};
        report.averaged.push_back(std::move(mean));
    }
    return report;
}

enum class Integrator { PiecewiseConstant, RungeKutta4 };

// Replay a whole ensemble and average. Per-trajectory evolutions run on the
// requested number of workers; the average is a fixed-order reduction, so the
// result does not depend on the worker count.
inline SimulationReport evolve_ensemble(const SystemSpec& sys,
                                        const sampler::TrajectoryEnsemble& ens,
                                        Integrator integrator, std::size_t workers = 1) {
    if (ens.size() == 0) throw GridMismatch("evolve_ensemble: empty ensemble");
    std::vector<TimeSeries> series(ens.size());
    auto run = [&](std::atomic<std::size_t>& cursor) {
        for (;;) {
            const std::size_t j = cursor.fetch_add(1);
            if (j >= ens.size()) return;
            series[j] = (integrator == Integrator::PiecewiseConstant)
                            ? evolve_trajectory_exact_pc(sys, ens.trajectories[j],
                                                         ens.omega_values)
                            : evolve_trajectory_rk4(sys, ens.trajectories[j], ens.omega_values);
        }
    };
    std::atomic<std::size_t> cursor{0};
    if (workers <= 1) {
        run(cursor);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back([&] { run(cursor); });
        for (auto& t : pool) t.join();
    }
    return ensemble_average(series,
                            integrator == Integrator::PiecewiseConstant ? "pc" : "rk4");
}

// Free-induction coherence of a qubit dephased by two-valued telegraph noise
// of strength omega and switching rate gamma, starting from coherence 1/2.
inline double exact_rtn_coherence(double gamma, double omega, double t) {
    if (!(gamma > 0.0)) throw InvalidParameter("exact_rtn_coherence: gamma must be positive");
    if (!(t >= 0.0)) throw InvalidParameter("exact_rtn_coherence: t must be non-negative");

    const double mu2 = 1.0 - (omega * omega) / (4.0 * gamma * gamma);
    const double g = gamma * t;
    const double mu = std::sqrt(std::abs(mu2));
    if (mu < 1e-8) {
        return 0.5 * std::exp(-g) * (1.0 + g);
    }
    if (mu2 > 0.0) {
        // 0.5 e^{-g} [cosh(mu g) + sinh(mu g)/mu], written overflow-safe.
        const double a = 0.5 * (1.0 + 1.0 / mu) * std::exp((mu - 1.0) * g);
        const double b = 0.5 * (1.0 - 1.0 / mu) * std::exp(-(mu + 1.0) * g);
        return 0.5 * (a + b);
    }
    return 0.5 * std::exp(-g) * (std::cos(mu * g) + std::sin(mu * g) / mu);
}

inline std::vector<complex> rtn_reference(const std::vector<double>& times, double gamma,
                                          double omega) {
    std::vector<complex> ref;
    ref.reserve(times.size());
    for (double t : times) ref.emplace_back(exact_rtn_coherence(gamma, omega, t), 0.0);
    return ref;
}

struct ErrorReport {
    double rms;
    double max_abs;
    std::vector<double> per_time;
};

// Deviation of the tracked matrix element from a reference series.
inline ErrorReport error_report(const SimulationReport& report,
                                const std::vector<complex>& reference) {
    if (reference.size() != report.times.size()) {
        throw GridMismatch("error_report: reference length " + std::to_string(reference.size()) +
                           " vs grid length " + std::to_string(report.times.size()));
    }
    ErrorReport err{0.0, 0.0, {}};
    err.per_time.reserve(reference.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double d = std::abs(report.tracked_value(i) - reference[i]);
        err.per_time.push_back(d);
        sq += d * d;
        err.max_abs = std::max(err.max_abs, d);
    }
    err.rms = std::sqrt(sq / static_cast<double>(reference.size()));
    return err;
}

inline void attach_reference(SimulationReport& report, std::vector<complex> reference) {
    const ErrorReport err = error_report(report, reference);
    report.reference = std::move(reference);
    report.per_time_error = err.per_time;
    report.rms = err.rms;
    report.max_abs = err.max_abs;
}

// CSV export: t, re(coh), im(coh), |coh|, exact, abs_err. The last two columns
// are left empty when no reference is attached.
inline void write_report_csv(const SimulationReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "t,re_coh,im_coh,abs_coh,exact,abs_err\n";
    const bool have_ref = report.reference.size() == report.times.size();
    for (std::size_t i = 0; i < report.times.size(); ++i) {
        const complex c = report.tracked_value(i);
        out << util::format_g17(report.times[i]) << ',' << util::format_g17(c.real()) << ','
            << util::format_g17(c.imag()) << ',' << util::format_g17(std::abs(c)) << ',';
        if (have_ref) {
            out << util::format_g17(report.reference[i].real()) << ','
                << util::format_g17(report.per_time_error[i]);
        } else {
            out << ',';
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace noiseloom::opensim
