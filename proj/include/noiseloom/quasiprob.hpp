// quasiprob.hpp — brute-force joint probabilities, joint quasi-probabilities,
// stochastic moments, and the noise-representation validity witness for small
// exact environments; recurrence path for reduced (Lindblad) models.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "noiseloom/envmodel.hpp"
#include "noiseloom/errors.hpp"
#include "noiseloom/qcore.hpp"
#include "noiseloom/util.hpp"

namespace noiseloom::quasiprob {

using envmodel::EnvironmentModel;
using envmodel::ExactEnvironment;
using envmodel::StepPropagator;
using qcore::complex;
using qcore::ComplexMatrix;
using qcore::Observable;

inline constexpr std::size_t kDefaultBudget = 1'000'000;

// Strictly increasing measurement times t_1 < t_2 < ... < t_k, t_1 >= 0.
struct TimeGrid {
    std::vector<double> times;

    explicit TimeGrid(std::vector<double> t) : times(std::move(t)) {
        if (times.empty()) throw InvalidParameter("time grid must be non-empty");
        if (times.front() < 0.0) throw InvalidParameter("time grid must start at t >= 0");
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) {
                throw InvalidParameter("time grid must be strictly increasing");
            }
        }
    }

    static TimeGrid uniform(double dt, std::size_t k, double t0 = 0.0) {
        std::vector<double> t(k);
        for (std::size_t i = 0; i < k; ++i) t[i] = t0 + dt * static_cast<double>(i);
        return TimeGrid(std::move(t));
    }

    std::size_t size() const { return times.size(); }
};

namespace detail {

inline std::size_t checked_pow(std::size_t base, std::size_t exp, std::size_t budget,
                               const char* what) {
    double need = 1.0;
    for (std::size_t i = 0; i < exp; ++i) need *= static_cast<double>(base);
    if (need > static_cast<double>(budget)) {
        throw BudgetExceeded(std::string(what) + " requires " + util::format_g17(need) +
                             " entries, budget is " + std::to_string(budget));
    }
    std::size_t n = 1;
    for (std::size_t i = 0; i < exp; ++i) n *= base;
    return n;
}

inline std::vector<std::size_t> unpack(std::size_t packed, std::size_t n, std::size_t k) {
    std::vector<std::size_t> seq(k);
    for (std::size_t l = 0; l < k; ++l) {
        seq[l] = packed % n;
        packed /= n;
    }
    return seq;
}

inline std::size_t pack(const std::vector<std::size_t>& seq, std::size_t n) {
    std::size_t packed = 0;
    for (std::size_t l = seq.size(); l-- > 0;) packed = packed * n + seq[l];
    return packed;
}

}  // namespace detail

// Joint quasi-probability table over sequences (xi_1..xi_k, zeta_1..zeta_k).
// Entries with zeta_k != xi_k are identically zero, so only the zeta prefix is
// stored; packing is little-endian in the grid position (digit l <-> t_{l+1}).
class QuasiProbTable {
  public:
    QuasiProbTable(TimeGrid grid, std::size_t n_outcomes, std::size_t budget)
        : grid_(std::move(grid)), n_(n_outcomes) {
        const std::size_t k = grid_.size();
        detail::checked_pow(n_, 2 * k - 1, budget, "joint_quasiprob");
        stride_ = 1;
        for (std::size_t l = 0; l + 1 < k; ++l) stride_ *= n_;
        data_.assign(stride_ * stride_ * n_, complex{});
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t outcomes() const { return n_; }
    std::size_t k() const { return grid_.size(); }
    std::size_t stored_entries() const { return data_.size(); }

    complex& at(std::size_t xi_packed, std::size_t zeta_prefix_packed) {
        return data_[xi_packed * stride_ + zeta_prefix_packed];
    }
    const complex& at(std::size_t xi_packed, std::size_t zeta_prefix_packed) const {
        return data_[xi_packed * stride_ + zeta_prefix_packed];
    }

    // General accessor: exact zero when the final-time outcomes differ.
    complex entry(const std::vector<std::size_t>& xi, const std::vector<std::size_t>& zeta) const {
        if (xi.size() != k() || zeta.size() != k()) {
            throw IndexOutOfRange("quasiprob entry: sequence length mismatch");
        }
        if (xi.back() != zeta.back()) return complex{};
        std::vector<std::size_t> zpre(zeta.begin(), zeta.end() - 1);
        return at(detail::pack(xi, n_), detail::pack(zpre, n_));
    }

    complex sum() const {
        complex s{};
        for (const auto& v : data_) s += v;
        return s;
    }

    // Total absolute mass on entries with any xi_l != zeta_l.
    double offdiag_mass() const {
        double m = 0.0;
        for (std::size_t xi = 0; xi < stride_ * n_; ++xi) {
            const std::size_t xi_prefix = xi % stride_;
            for (std::size_t z = 0; z < stride_; ++z) {
                if (z != xi_prefix) m += std::abs(at(xi, z));
            }
        }
        return m;
    }

    // Largest violation of entry(xi, zeta) == conj(entry(zeta, xi)).
    double max_swap_asymmetry() const {
        double worst = 0.0;
        for (std::size_t xi = 0; xi < stride_ * n_; ++xi) {
            const std::size_t last = xi / stride_;
            const std::size_t xi_prefix = xi % stride_;
            for (std::size_t z = 0; z < stride_; ++z) {
                const std::size_t swapped_xi = z + last * stride_;
                const complex a = at(xi, z);
                const complex b = at(swapped_xi, xi_prefix);
                worst = std::max(worst, std::abs(a - std::conj(b)));
            }
        }
        return worst;
    }

    template <typename Fn>  // Fn(xi_seq, zeta_seq, value)
    void for_each(Fn&& fn) const {
        for (std::size_t xi = 0; xi < stride_ * n_; ++xi) {
            const auto xs = detail::unpack(xi, n_, k());
            for (std::size_t z = 0; z < stride_; ++z) {
                auto zs = detail::unpack(z, n_, k() - 1);
                zs.push_back(xs.back());
                fn(xs, zs, at(xi, z));
            }
        }
    }

  private:
    TimeGrid grid_;
    std::size_t n_;
    std::size_t stride_;  // n^(k-1)
    std::vector<complex> data_;
};

// Probability table over xi sequences, same little-endian packing.
struct ProbTable {
    TimeGrid grid;
    std::size_t n_outcomes;
    std::vector<double> p;  // n^k entries

    double at(const std::vector<std::size_t>& seq) const {
        return p[detail::pack(seq, n_outcomes)];
    }

    double sum() const {
        double s = 0.0;
        for (double v : p) s += v;
        return s;
    }
};

namespace detail {

// Interaction-picture projectors e^{+i t H} P e^{-i t H} for every grid time.
inline std::vector<std::vector<ComplexMatrix>> interaction_projectors(const ExactEnvironment& env,
                                                                      const TimeGrid& grid) {
    std::vector<std::vector<ComplexMatrix>> pi(grid.size());
    for (std::size_t l = 0; l < grid.size(); ++l) {
        const ComplexMatrix u_back = qcore::hermitian_propagator(env.hamiltonian, -grid.times[l]);
        const ComplexMatrix u_fwd = u_back.adjoint();
        pi[l].reserve(env.coupling.outcomes());
        for (const auto& p : env.coupling.projectors) pi[l].push_back(u_back * p * u_fwd);
    }
    return pi;
}

// Ordered products M(s) = PI(s_{k-1}, t_k) ... PI(s_0, t_1) for all sequences.
inline std::vector<ComplexMatrix> sequence_products(
    const std::vector<std::vector<ComplexMatrix>>& pi, std::size_t dim) {
    std::vector<ComplexMatrix> prods{ComplexMatrix::identity(dim)};
    const std::size_t n = pi.empty() ? 0 : pi[0].size();
    std::size_t place = 1;
    for (std::size_t level = 0; level < pi.size(); ++level) {
        std::vector<ComplexMatrix> next(prods.size() * n);
        for (std::size_t idx = 0; idx < prods.size(); ++idx) {
            for (std::size_t o = 0; o < n; ++o) {
                next[idx + o * place] = pi[level][o] * prods[idx];
            }
        }
        prods = std::move(next);
        place *= n;
    }
    return prods;
}

inline std::vector<StepPropagator> gap_propagators(const EnvironmentModel& env,
                                                   const TimeGrid& grid) {
    std::vector<StepPropagator> props;
    props.reserve(grid.size());
    for (std::size_t l = 0; l + 1 < grid.size(); ++l) {
        props.push_back(envmodel::make_step_propagator(env, grid.times[l + 1] - grid.times[l]));
    }
    return props;
}

inline void prob_recurse(const ComplexMatrix& sigma, std::size_t level, std::size_t packed,
                         std::size_t place, const Observable& obs,
                         const std::vector<StepPropagator>& gaps, std::vector<double>& out) {
    const std::size_t k_total = gaps.size() + 1;
    for (std::size_t o = 0; o < obs.outcomes(); ++o) {
        ComplexMatrix collapsed = obs.projectors[o] * sigma * obs.projectors[o];
        const std::size_t idx = packed + o * place;
        if (level + 1 == k_total) {
            double v = collapsed.trace().real();
            if (v < 0.0) {
                if (v < -1e-10) throw Error("joint_prob: negative probability " +
                                            util::format_g17(v));
                v = 0.0;
            }
            out[idx] = v;
        } else {
            prob_recurse(gaps[level].apply_raw(collapsed), level + 1, idx,
                         place * obs.outcomes(), obs, gaps, out);
        }
    }
}

}  // namespace detail

// Joint quasi-probability by direct operator products: the table entry is
// tr[M(xi) rho M(zeta)†] with M the ordered product of interaction-picture
// projectors; final-time outcomes coincide by projector orthogonality, which
// the storage enforces exactly.
inline QuasiProbTable joint_quasiprob(const ExactEnvironment& env, const TimeGrid& grid,
                                      std::size_t budget = kDefaultBudget) {
    const std::size_t n = env.coupling.outcomes();
    const std::size_t dim = env.coupling.dim();
    QuasiProbTable table(grid, n, budget);

    const auto pi = detail::interaction_projectors(env, grid);
    const auto prods = detail::sequence_products(pi, dim);

    const std::size_t k = grid.size();
    std::size_t stride = 1;
    for (std::size_t l = 0; l + 1 < k; ++l) stride *= n;

    const ComplexMatrix& rho = env.initial_state.matrix();
    std::vector<ComplexMatrix> left(prods.size(), ComplexMatrix{});
    for (std::size_t s = 0; s < prods.size(); ++s) left[s] = prods[s] * rho;

    for (std::size_t xi = 0; xi < prods.size(); ++xi) {
        const std::size_t last = xi / stride;
        const ComplexMatrix& x = left[xi];
        for (std::size_t zpre = 0; zpre < stride; ++zpre) {
            const std::size_t zeta_full = zpre + last * stride;
            const ComplexMatrix& m = prods[zeta_full];
            complex v{};
            const auto& xd = x.data();
            const auto& md = m.data();
            for (std::size_t i = 0; i < xd.size(); ++i) v += xd[i] * std::conj(md[i]);
            table.at(xi, zpre) = v;
        }
    }
    return table;
}

// Joint sequence probabilities via the collapse recurrence on unnormalized
// conditional states. For an exact model this is the diagonal of the
// quasi-probability table; for a reduced model it is the measurement
// recurrence with Markovian inter-measurement propagation.
inline ProbTable joint_prob(const EnvironmentModel& env, const TimeGrid& grid,
                            std::size_t budget = kDefaultBudget) {
    const Observable& obs = env.coupling();
    const std::size_t n = obs.outcomes();
    const std::size_t total = detail::checked_pow(n, grid.size(), budget, "joint_prob");

    ComplexMatrix sigma = env.initial_state().matrix();
    if (grid.times.front() > 0.0) {
        sigma = envmodel::make_step_propagator(env, grid.times.front()).apply_raw(sigma);
    }
    const auto gaps = detail::gap_propagators(env, grid);

    ProbTable table{grid, n, std::vector<double>(total, 0.0)};
    detail::prob_recurse(sigma, 0, 0, 1, obs, gaps, table.p);
    return table;
}

// Alternative eigenstate-sum route: sums |propagator matrix elements|^2 over
// eigenbasis paths compatible with the outcome sequence. Coincides with the
// collapse recurrence when the initial state is diagonal in the coupling
// eigenbasis and the spectrum is nondegenerate; the difference is diagnostic
// otherwise.
inline ProbTable joint_prob_eigensum(const ExactEnvironment& env, const TimeGrid& grid,
                                     std::size_t budget = kDefaultBudget) {
    const Observable& obs = env.coupling;
    const std::size_t n = obs.outcomes();
    const std::size_t dim = obs.dim();
    const std::size_t k = grid.size();
    const std::size_t total = detail::checked_pow(n, k, budget, "joint_prob_eigensum");

    const qcore::EigenSystem es = qcore::eigh(obs.source);
    // Map each eigenvector to the outcome cluster with the nearest value.
    std::vector<std::size_t> cluster(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < n; ++c) {
            if (std::abs(es.values[i] - obs.values[c]) <
                std::abs(es.values[i] - obs.values[best])) {
                best = c;
            }
        }
        cluster[i] = best;
    }

    const ComplexMatrix w = es.vectors;
    const ComplexMatrix w_dag = w.adjoint();

    // rho(t_1) in the coupling eigenbasis.
    const ComplexMatrix u1 = qcore::hermitian_propagator(env.hamiltonian, grid.times.front());
    const ComplexMatrix rho_t1 = w_dag * (u1 * env.initial_state.matrix() * u1.adjoint()) * w;

    // Squared propagator matrix elements per gap, in the coupling eigenbasis.
    std::vector<std::vector<double>> hop(k >= 1 ? k - 1 : 0);
    for (std::size_t l = 0; l + 1 < k; ++l) {
        const ComplexMatrix u =
            w_dag * qcore::hermitian_propagator(env.hamiltonian, grid.times[l + 1] - grid.times[l]) * w;
        hop[l].resize(dim * dim);
        for (std::size_t a = 0; a < dim; ++a)
            for (std::size_t b = 0; b < dim; ++b) hop[l][a * dim + b] = std::norm(u(a, b));
    }

    ProbTable table{grid, n, std::vector<double>(total, 0.0)};
    std::vector<double> weight(dim), next(dim);
    for (std::size_t packed = 0; packed < total; ++packed) {
        const auto seq = detail::unpack(packed, n, k);
        for (std::size_t i = 0; i < dim; ++i) {
            weight[i] = (cluster[i] == seq[0]) ? rho_t1(i, i).real() : 0.0;
        }
        for (std::size_t l = 0; l + 1 < k; ++l) {
            for (std::size_t m = 0; m < dim; ++m) {
                if (cluster[m] != seq[l + 1]) { next[m] = 0.0; continue; }
                double s = 0.0;
                for (std::size_t i = 0; i < dim; ++i) s += hop[l][m * dim + i] * weight[i];
                next[m] = s;
            }
            weight.swap(next);
        }
        double v = 0.0;
        for (double x : weight) v += x;
        table.p[packed] = std::max(v, 0.0);
    }
    return table;
}

struct ValidityWitness {
    double offdiag_mass;
    double kolmogorov_residual;
};

// Off-diagonal quasi-probability mass plus the worst marginalization defect:
// summing the k-time law over any interior time must reproduce the (k-1)-time
// law for a genuine classical process. Final-time marginalization holds
// identically and is excluded.
inline ValidityWitness validity_witness(const ExactEnvironment& env, const TimeGrid& grid,
                                        std::size_t budget = kDefaultBudget) {
    ValidityWitness w{0.0, 0.0};
    w.offdiag_mass = joint_quasiprob(env, grid, budget).offdiag_mass();

    const std::size_t k = grid.size();
    if (k < 2) return w;

    EnvironmentModel model(env, "witness");
    const ProbTable full = joint_prob(model, grid, budget);
    const std::size_t n = full.n_outcomes;

    for (std::size_t j = 0; j + 1 < k; ++j) {
        std::vector<double> reduced_times;
        reduced_times.reserve(k - 1);
        for (std::size_t l = 0; l < k; ++l) {
            if (l != j) reduced_times.push_back(grid.times[l]);
        }
        const ProbTable reduced = joint_prob(model, TimeGrid(std::move(reduced_times)), budget);

        std::size_t place = 1;
        for (std::size_t l = 0; l < j; ++l) place *= n;

        for (std::size_t r = 0; r < reduced.p.size(); ++r) {
            const std::size_t low = r % place;
            const std::size_t high = r / place;
            double marg = 0.0;
            for (std::size_t v = 0; v < n; ++v) {
                marg += full.p[low + v * place + high * place * n];
            }
            w.kolmogorov_residual =
                std::max(w.kolmogorov_residual, std::abs(marg - reduced.p[r]));
        }
    }
    return w;
}

// Product moment E[xi(t_k) ... xi(t_1)] of the sequence law.
inline double moment(const ProbTable& table, const std::vector<double>& omega_values) {
    if (omega_values.size() != table.n_outcomes) {
        throw DimensionMismatch("moment: outcome count mismatch");
    }
    const std::size_t k = table.grid.size();
    double acc = 0.0;
    for (std::size_t packed = 0; packed < table.p.size(); ++packed) {
        double prod = 1.0;
        std::size_t rest = packed;
        for (std::size_t l = 0; l < k; ++l) {
            prod *= omega_values[rest % table.n_outcomes];
            rest /= table.n_outcomes;
        }
        acc += prod * table.p[packed];
    }
    return acc;
}

// CSV export: one row per (xi sequence, zeta sequence), indices dash-joined.
inline void write_quasiprob_csv(const QuasiProbTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "xi_seq,zeta_seq,re,im\n";
    table.for_each([&](const std::vector<std::size_t>& xi, const std::vector<std::size_t>& zeta,
                       complex v) {
        std::string row;
        for (std::size_t l = 0; l < xi.size(); ++l) {
            if (l) row.push_back('-');
            row += std::to_string(xi[l]);
        }
        row.push_back(',');
        for (std::size_t l = 0; l < zeta.size(); ++l) {
            if (l) row.push_back('-');
            row += std::to_string(zeta[l]);
        }
        out << row << ',' << util::format_g17(v.real()) << ',' << util::format_g17(v.imag())
            << '\n';
    });
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace noiseloom::quasiprob
