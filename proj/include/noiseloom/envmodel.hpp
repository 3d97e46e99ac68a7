// envmodel.hpp — environments that can be measured: exact unitary models
// (H_E, rho_E, V_E) and Lindblad-reduced models, including the random
// telegraph noise generator.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "noiseloom/errors.hpp"
#include "noiseloom/qcore.hpp"
#include "noiseloom/rng.hpp"
#include "noiseloom/util.hpp"

namespace noiseloom::envmodel {

using qcore::complex;
using qcore::ComplexMatrix;
using qcore::DensityMatrix;
using qcore::Observable;

namespace detail {

inline ComplexMatrix transpose(const ComplexMatrix& a) {
    ComplexMatrix t(a.dim());
    for (std::size_t i = 0; i < a.dim(); ++i)
        for (std::size_t j = 0; j < a.dim(); ++j) t(j, i) = a(i, j);
    return t;
}

// Kronecker product with row-major vec convention: vec(rho)[i*d+j] = rho(i,j).
inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
    const std::size_t na = a.dim(), nb = b.dim();
    ComplexMatrix k(na * nb);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j)
            for (std::size_t p = 0; p < na; ++p)
                for (std::size_t q = 0; q < nb; ++q)
                    k(i * nb + j, p * nb + q) = a(i, p) * b(j, q);
    return k;
}

inline std::vector<complex> vec(const ComplexMatrix& rho) { return rho.data(); }

inline ComplexMatrix unvec(const std::vector<complex>& v, std::size_t dim) {
    ComplexMatrix m(dim);
    m.data() = v;
    return m;
}

// Solve A X = B in place via LU with partial pivoting.
inline ComplexMatrix lu_solve(ComplexMatrix a, ComplexMatrix b) {
    const std::size_t n = a.dim();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(a(i, k));
            if (v > best) { best = v; piv = i; }
        }
        if (best == 0.0) throw InvalidParameter("lu_solve: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(a(k, j), a(piv, j));
                std::swap(b(k, j), b(piv, j));
            }
        }
        const complex akk = a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            const complex l = a(i, k) / akk;
            a(i, k) = l;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= l * a(k, j);
            for (std::size_t j = 0; j < n; ++j) b(i, j) -= l * b(k, j);
        }
    }
    // Back substitution, column by column.
    for (std::size_t jc = 0; jc < n; ++jc) {
        for (std::size_t i = n; i-- > 0;) {
            complex s = b(i, jc);
            for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * b(j, jc);
            b(i, jc) = s / a(i, i);
        }
    }
    return b;
}

}  // namespace detail

// Superoperator matrix of rho -> A rho B on vec(rho).
inline ComplexMatrix conjugation_superop(const ComplexMatrix& a, const ComplexMatrix& b) {
    return detail::kron(a, detail::transpose(b));
}

inline ComplexMatrix apply_superop(const ComplexMatrix& sop, const ComplexMatrix& rho) {
    const std::size_t d = rho.dim();
    if (sop.dim() != d * d) {
        throw DimensionMismatch("apply_superop: generator dim " + std::to_string(sop.dim()) +
                                " does not match state dim " + std::to_string(d));
    }
    const auto& x = rho.data();
    std::vector<complex> y(d * d, complex{});
    for (std::size_t i = 0; i < d * d; ++i) {
        complex s{};
        for (std::size_t j = 0; j < d * d; ++j) s += sop(i, j) * x[j];
        y[i] = s;
    }
    return detail::unvec(y, d);
}

// Matrix exponential by scaling and squaring with a degree-13 Padé approximant.
// Works for any square complex matrix (the generators here are not Hermitian).
inline ComplexMatrix expm(const ComplexMatrix& a_in) {
    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const double theta13 = 5.371920351148152;
    const std::size_t n = a_in.dim();

    ComplexMatrix a = a_in;
    int squarings = 0;
    const double norm = a.one_norm();
    if (norm > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
        a *= complex{std::ldexp(1.0, -squarings), 0.0};
    }

    const ComplexMatrix id = ComplexMatrix::identity(n);
    const ComplexMatrix a2 = a * a;
    const ComplexMatrix a4 = a2 * a2;
    const ComplexMatrix a6 = a2 * a4;

    ComplexMatrix u = a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) +
                           b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id);
    ComplexMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
                      b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

    ComplexMatrix r = detail::lu_solve(v - u, v + u);
    for (int i = 0; i < squarings; ++i) r = r * r;
    return r;
}

// Exact unitary model: triplet (H_E, rho_E, V_E) with V_E pre-decomposed.
struct ExactEnvironment {
    ComplexMatrix hamiltonian;
    DensityMatrix initial_state;
    Observable coupling;
};

// Reduced model: Markovian generator acting on vec(rho), stationary-or-not
// initial state, and the measured observable on the reduced subspace.
struct LindbladEnvironment {
    ComplexMatrix generator;  // dim^2 x dim^2
    DensityMatrix initial_state;
    Observable coupling;
};

class EnvironmentModel {
  public:
    EnvironmentModel(ExactEnvironment env, std::string label)
        : backend_(std::move(env)), label_(std::move(label)) {
        const auto& e = exact();
        if (e.hamiltonian.dim() != e.initial_state.dim() ||
            e.coupling.dim() != e.initial_state.dim()) {
            throw DimensionMismatch("exact environment: H, rho, V must share one dimension");
        }
        if (e.hamiltonian.hermiticity_error() > qcore::kHermTol) {
            throw NonHermitianInput("exact environment: Hamiltonian not Hermitian");
        }
        fingerprint_ = compute_fingerprint();
    }

    EnvironmentModel(LindbladEnvironment env, std::string label)
        : backend_(std::move(env)), label_(std::move(label)) {
        const auto& l = lindblad();
        const std::size_t d = l.initial_state.dim();
        if (l.generator.dim() != d * d || l.coupling.dim() != d) {
            throw DimensionMismatch("lindblad environment: generator must be dim^2 x dim^2");
        }
        validate_generator();
        fingerprint_ = compute_fingerprint();
    }

    bool is_exact() const { return std::holds_alternative<ExactEnvironment>(backend_); }
    const ExactEnvironment& exact() const { return std::get<ExactEnvironment>(backend_); }
    const LindbladEnvironment& lindblad() const { return std::get<LindbladEnvironment>(backend_); }

    const Observable& coupling() const {
        return is_exact() ? exact().coupling : lindblad().coupling;
    }
    const DensityMatrix& initial_state() const {
        return is_exact() ? exact().initial_state : lindblad().initial_state;
    }
    std::size_t dim() const { return initial_state().dim(); }

    const std::string& label() const { return label_; }
    const std::string& fingerprint() const { return fingerprint_; }

  private:
    // Spot-check that the generator preserves trace and Hermiticity on
    // pseudo-random Hermitian states.
    void validate_generator() const {
        const auto& l = lindblad();
        const std::size_t d = l.initial_state.dim();
        const double scale = std::max(1.0, l.generator.one_norm());
        CounterRng rng(0x6e6f6973u, 0);
        for (int trial = 0; trial < 3; ++trial) {
            ComplexMatrix rho(d);
            for (std::size_t i = 0; i < d; ++i) {
                rho(i, i) = complex{rng.next_unit() + 0.1, 0.0};
                for (std::size_t j = i + 1; j < d; ++j) {
                    const complex z{rng.next_unit() - 0.5, rng.next_unit() - 0.5};
                    rho(i, j) = z;
                    rho(j, i) = std::conj(z);
                }
            }
            const ComplexMatrix out = apply_superop(l.generator, rho);
            if (std::abs(out.trace()) > 1e-12 * scale * std::max(1.0, rho.max_abs())) {
                throw InvalidParameter("lindblad generator does not preserve trace");
            }
            if (out.hermiticity_error() > 1e-12 * scale * std::max(1.0, rho.max_abs())) {
                throw InvalidParameter("lindblad generator does not preserve Hermiticity");
            }
        }
    }

    std::string compute_fingerprint() const {
        util::Fnv1a64 h;
        auto feed = [&h](const ComplexMatrix& m) {
            h.update("m");
            h.update(std::to_string(m.dim()));
            for (const auto& v : m.data()) {
                h.update_double(v.real());
                h.update_double(v.imag());
            }
        };
        if (is_exact()) {
            h.update("exact/");
            feed(exact().hamiltonian);
            feed(exact().initial_state.matrix());
            feed(exact().coupling.source);
        } else {
            h.update("lindblad/");
            feed(lindblad().generator);
            feed(lindblad().initial_state.matrix());
            feed(lindblad().coupling.source);
        }
        return h.hex();
    }

    std::variant<ExactEnvironment, LindbladEnvironment> backend_;
    std::string label_;
    std::string fingerprint_;
};

inline EnvironmentModel make_exact_env(ComplexMatrix hamiltonian, DensityMatrix initial_state,
                                       const ComplexMatrix& coupling_operator,
                                       std::string label = "exact") {
    ExactEnvironment env{std::move(hamiltonian), std::move(initial_state),
                         qcore::spectral_decompose(coupling_operator)};
    return EnvironmentModel(std::move(env), std::move(label));
}

inline EnvironmentModel make_lindblad_env(ComplexMatrix generator, DensityMatrix initial_state,
                                          const ComplexMatrix& coupling_operator,
                                          std::string label = "lindblad") {
    LindbladEnvironment env{std::move(generator), std::move(initial_state),
                            qcore::spectral_decompose(coupling_operator)};
    return EnvironmentModel(std::move(env), std::move(label));
}

// Two-level reduced environment whose measured coupling switches between
// +-omega/2 at rate gamma: generator L rho = -(gamma/2) [sx, [sx, rho]],
// stationary state 1/2, coupling (omega/2) sz.
inline EnvironmentModel build_rtn_env(double gamma, double omega) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InvalidParameter("build_rtn_env: gamma must be positive, got " +
                               util::format_g17(gamma));
    }
    if (!std::isfinite(omega)) {
        throw InvalidParameter("build_rtn_env: omega must be finite");
    }
    const ComplexMatrix sx = ComplexMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
    const ComplexMatrix sz = ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, -1.0}});

    // -(gamma/2)[sx,[sx,rho]] = -gamma (rho - sx rho sx) since sx^2 = 1.
    ComplexMatrix gen = conjugation_superop(sx, sx) - ComplexMatrix::identity(4);
    gen *= complex{gamma, 0.0};

    const ComplexMatrix v = sz * complex{omega / 2.0, 0.0};
    return make_lindblad_env(std::move(gen), DensityMatrix::maximally_mixed(2), v,
                             "rtn(gamma=" + util::format_g17(gamma) +
                                 ",omega=" + util::format_g17(omega) + ")");
}

// Fixed-interval propagator cached for repeated application.
class StepPropagator {
  public:
    static StepPropagator unitary(ComplexMatrix u) {
        StepPropagator p;
        p.kind_ = Kind::Unitary;
        p.op_adj_ = u.adjoint();
        p.op_ = std::move(u);
        return p;
    }

    static StepPropagator superop(ComplexMatrix channel) {
        StepPropagator p;
        p.kind_ = Kind::Superop;
        p.op_ = std::move(channel);
        return p;
    }

    ComplexMatrix apply_raw(const ComplexMatrix& rho) const {
        if (kind_ == Kind::Unitary) {
            return (op_ * rho * op_adj_).symmetrized();
        }
        return apply_superop(op_, rho).symmetrized();
    }

    DensityMatrix apply(const DensityMatrix& rho) const {
        return DensityMatrix::unchecked(apply_raw(rho.matrix()));
    }

  private:
    enum class Kind { Unitary, Superop };
    Kind kind_ = Kind::Unitary;
    ComplexMatrix op_;
    ComplexMatrix op_adj_;
};

inline StepPropagator make_step_propagator(const EnvironmentModel& env, double dt) {
    if (!(dt >= 0.0)) throw InvalidParameter("propagate: dt must be non-negative");
    if (env.is_exact()) {
        return StepPropagator::unitary(qcore::hermitian_propagator(env.exact().hamiltonian, dt));
    }
    ComplexMatrix g = env.lindblad().generator;
    g *= complex{dt, 0.0};
    return StepPropagator::superop(expm(g));
}

inline DensityMatrix propagate(const EnvironmentModel& env, const DensityMatrix& rho, double dt) {
    if (rho.dim() != env.dim()) {
        throw DimensionMismatch("propagate: state dim " + std::to_string(rho.dim()) +
                                " vs environment dim " + std::to_string(env.dim()));
    }
    return make_step_propagator(env, dt).apply(rho);
}

// Frobenius norm of L rho_0 (Lindblad) or of [H_E, rho_0] (exact); zero means
// the initial state is stationary.
inline double stationarity_residual(const EnvironmentModel& env) {
    if (env.is_exact()) {
        const auto& e = env.exact();
        const ComplexMatrix c = e.hamiltonian * e.initial_state.matrix() -
                                e.initial_state.matrix() * e.hamiltonian;
        return c.frobenius_norm();
    }
    const auto& l = env.lindblad();
    return apply_superop(l.generator, l.initial_state.matrix()).frobenius_norm();
}

}  // namespace noiseloom::envmodel
