// qcore.hpp — dense complex Hermitian linear algebra: cyclic-Jacobi
// eigendecomposition, projector extraction with degeneracy grouping, unitary
// propagation, and density-matrix hygiene.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "noiseloom/errors.hpp"

namespace noiseloom::qcore {

using complex = std::complex<double>;

inline constexpr double kHermTol = 1e-12;   // max |A - A†| entry tolerance
inline constexpr double kTraceTol = 1e-12;  // |tr(rho) - 1| tolerance
inline constexpr double kEigFloor = -1e-10; // minimum eigenvalue floor for states
inline constexpr double kDefaultDegeneracyTol = 1e-9;  // relative to spectral range

// Square dense complex matrix, row-major storage.
class ComplexMatrix {
  public:
    ComplexMatrix() = default;

    explicit ComplexMatrix(std::size_t dim) : dim_(dim), a_(dim * dim, complex{}) {}

    // Row-wise construction, e.g. ComplexMatrix::from_rows({{1, 0}, {0, -1}}).
    static ComplexMatrix from_rows(std::initializer_list<std::initializer_list<complex>> rows) {
        ComplexMatrix m(rows.size());
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != m.dim_) {
                throw InvalidParameter("from_rows: ragged row in matrix literal");
            }
            std::size_t j = 0;
            for (const auto& v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    static ComplexMatrix identity(std::size_t dim) {
        ComplexMatrix m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t dim() const { return dim_; }

    complex& operator()(std::size_t i, std::size_t j) { return a_[i * dim_ + j]; }
    const complex& operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }

    const std::vector<complex>& data() const { return a_; }
    std::vector<complex>& data() { return a_; }

    ComplexMatrix& operator+=(const ComplexMatrix& o) {
        require_same_dim(o);
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }

    ComplexMatrix& operator-=(const ComplexMatrix& o) {
        require_same_dim(o);
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }

    ComplexMatrix& operator*=(complex s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, complex s) { return a *= s; }
    friend ComplexMatrix operator*(complex s, ComplexMatrix a) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
        a.require_same_dim(b);
        const std::size_t n = a.dim_;
        ComplexMatrix c(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                const complex aik = a(i, k);
                if (aik == complex{}) continue;
                for (std::size_t j = 0; j < n; ++j) c(i, j) += aik * b(k, j);
            }
        }
        return c;
    }

    ComplexMatrix adjoint() const {
        ComplexMatrix m(dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    complex trace() const {
        complex t{};
        for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto& v : a_) s += std::norm(v);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (const auto& v : a_) m = std::max(m, std::abs(v));
        return m;
    }

    // Maximum column sum of absolute values.
    double one_norm() const {
        double m = 0.0;
        for (std::size_t j = 0; j < dim_; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < dim_; ++i) s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }

    double hermiticity_error() const {
        double m = 0.0;
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = i; j < dim_; ++j)
                m = std::max(m, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
        return m;
    }

    bool is_finite() const {
        for (const auto& v : a_) {
            if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
        }
        return true;
    }

    ComplexMatrix symmetrized() const {
        ComplexMatrix m(dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j)
                m(i, j) = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
        return m;
    }

  private:
    void require_same_dim(const ComplexMatrix& o) const {
        if (dim_ != o.dim_) {
            throw DimensionMismatch("matrix dimension mismatch: " + std::to_string(dim_) +
                                    " vs " + std::to_string(o.dim_));
        }
    }

    std::size_t dim_ = 0;
    std::vector<complex> a_;
};

struct EigenSystem {
    std::vector<double> values;  // ascending
    ComplexMatrix vectors;       // columns are the matching eigenvectors
};

// Cyclic Jacobi eigendecomposition of a Hermitian matrix. Each sweep visits
// every off-diagonal pair (p, q) and applies a unitary plane rotation that
// zeroes A(p, q); rotations compose into the eigenvector matrix, which stays
// unitary to machine precision by construction.
inline EigenSystem eigh(const ComplexMatrix& input, double herm_tol = kHermTol) {
    if (input.dim() == 0) throw InvalidParameter("eigh: empty matrix");
    if (!input.is_finite()) throw InvalidParameter("eigh: non-finite matrix entries");
    const double herr = input.hermiticity_error();
    if (herr > herm_tol) {
        throw NonHermitianInput("eigh: input not Hermitian, max |A - A†| = " +
                                std::to_string(herr));
    }

    const std::size_t n = input.dim();
    ComplexMatrix a = input.symmetrized();
    ComplexMatrix v = ComplexMatrix::identity(n);

    const double scale = std::max(a.frobenius_norm(), 1e-300);
    const double stop = 1e-14 * scale;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += std::norm(a(i, j));
        return std::sqrt(2.0 * s);
    };

    for (int sweep = 0; sweep < 100 && off_norm() > stop; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const complex apq = a(p, q);
                const double r = std::abs(apq);
                if (r <= 1e-18 * scale) {
                    continue;
                }
                const complex phase = apq / r;  // e^{i arg(apq)}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * r);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                // Columns: M <- M G with G(p,p)=c, G(p,q)=s,
                // G(q,p)=-s conj(phase), G(q,q)=c conj(phase).
                const complex gq = std::conj(phase);
                for (std::size_t i = 0; i < n; ++i) {
                    const complex aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * gq * aiq;
                    a(i, q) = s * aip + c * gq * aiq;
                    const complex vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * gq * viq;
                    v(i, q) = s * vip + c * gq * viq;
                }
                // Rows: M <- G† M.
                for (std::size_t j = 0; j < n; ++j) {
                    const complex apj = a(p, j), aqj = a(q, j);
                    a(p, j) = c * apj - s * phase * aqj;
                    a(q, j) = s * apj + c * phase * aqj;
                }
                a(p, q) = complex{};
                a(q, p) = complex{};
                a(p, p) = complex{a(p, p).real(), 0.0};
                a(q, q) = complex{a(q, q).real(), 0.0};
            }
        }
    }

    EigenSystem out;
    out.values.resize(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i).real();
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });
    out.vectors = ComplexMatrix(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

struct Diagnostics {
    double trace_error;
    double hermiticity_error;
    double min_eigenvalue;
};

// The three deviations used to enforce density-matrix invariants.
inline Diagnostics dm_diagnostics(const ComplexMatrix& rho) {
    Diagnostics d{};
    d.trace_error = std::abs(rho.trace() - complex{1.0, 0.0});
    d.hermiticity_error = rho.hermiticity_error();
    const EigenSystem es = eigh(rho.symmetrized(), 1e100);
    d.min_eigenvalue = es.values.empty() ? 0.0 : es.values.front();
    return d;
}

// Hermitian, unit-trace, positive-semidefinite (within tolerance) state.
class DensityMatrix {
  public:
    explicit DensityMatrix(ComplexMatrix m) : m_(std::move(m)) {
        const Diagnostics d = dm_diagnostics(m_);
        if (d.hermiticity_error > kHermTol) {
            throw InvalidParameter("density matrix not Hermitian, deviation " +
                                   std::to_string(d.hermiticity_error));
        }
        if (d.trace_error > kTraceTol) {
            throw InvalidParameter("density matrix trace off by " +
                                   std::to_string(d.trace_error));
        }
        if (d.min_eigenvalue < kEigFloor) {
            throw InvalidParameter("density matrix has negative eigenvalue " +
                                   std::to_string(d.min_eigenvalue));
        }
    }

    // Hot paths that already guarantee validity may skip the checks.
    static DensityMatrix unchecked(ComplexMatrix m) { return DensityMatrix(std::move(m), 0); }

    static DensityMatrix maximally_mixed(std::size_t dim) {
        ComplexMatrix m = ComplexMatrix::identity(dim);
        m *= complex{1.0 / static_cast<double>(dim), 0.0};
        return unchecked(std::move(m));
    }

    static DensityMatrix pure(const std::vector<complex>& amplitudes) {
        double norm2 = 0.0;
        for (const auto& c : amplitudes) norm2 += std::norm(c);
        if (norm2 <= 0.0) throw InvalidParameter("pure state with zero norm");
        ComplexMatrix m(amplitudes.size());
        for (std::size_t i = 0; i < amplitudes.size(); ++i)
            for (std::size_t j = 0; j < amplitudes.size(); ++j)
                m(i, j) = amplitudes[i] * std::conj(amplitudes[j]) / norm2;
        return unchecked(std::move(m));
    }

    const ComplexMatrix& matrix() const { return m_; }
    std::size_t dim() const { return m_.dim(); }

  private:
    DensityMatrix(ComplexMatrix m, int) : m_(std::move(m)) {}

    ComplexMatrix m_;
};

// Eigenvalue spectrum plus orthogonal projectors of a measured operator.
struct Observable {
    std::vector<double> values;             // unique eigenvalues, strictly ascending
    std::vector<ComplexMatrix> projectors;  // same length as values
    ComplexMatrix source;

    std::size_t outcomes() const { return values.size(); }
    std::size_t dim() const { return source.dim(); }
};

// Spectral decomposition with degeneracy grouping: eigenvalues closer than
// degeneracy_tol (scaled by the spectral range) share one projector.
inline Observable spectral_decompose(const ComplexMatrix& m,
                                     double degeneracy_tol = kDefaultDegeneracyTol) {
    const EigenSystem es = eigh(m);
    const std::size_t n = m.dim();

    double lo = es.values.front(), hi = es.values.back();
    double absmax = std::max(std::abs(lo), std::abs(hi));
    const double tol_abs = degeneracy_tol * std::max(hi - lo, absmax);

    Observable obs;
    obs.source = m.symmetrized();
    std::size_t start = 0;
    while (start < n) {
        std::size_t stop = start + 1;
        while (stop < n && es.values[stop] - es.values[stop - 1] <= tol_abs) ++stop;
        double mean = 0.0;
        ComplexMatrix proj(n);
        for (std::size_t k = start; k < stop; ++k) {
            mean += es.values[k];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    proj(i, j) += es.vectors(i, k) * std::conj(es.vectors(j, k));
        }
        obs.values.push_back(mean / static_cast<double>(stop - start));
        obs.projectors.push_back(std::move(proj));
        start = stop;
    }
    return obs;
}

// e^{-i t H} for Hermitian H, built from the eigendecomposition so the result
// is unitary up to round-off.
inline ComplexMatrix hermitian_propagator(const ComplexMatrix& h, double t) {
    const EigenSystem es = eigh(h);
    const std::size_t n = h.dim();
    ComplexMatrix u(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            complex s{};
            for (std::size_t k = 0; k < n; ++k) {
                const complex phase = std::exp(complex{0.0, -t * es.values[k]});
                s += es.vectors(i, k) * phase * std::conj(es.vectors(j, k));
            }
            u(i, j) = s;
        }
    }
    return u;
}

// rho -> e^{-i t H} rho e^{i t H}.
inline DensityMatrix evolve_unitary(const DensityMatrix& rho, const ComplexMatrix& h, double t) {
    if (h.dim() != rho.dim()) {
        throw DimensionMismatch("evolve_unitary: Hamiltonian dim " + std::to_string(h.dim()) +
                                " vs state dim " + std::to_string(rho.dim()));
    }
    const ComplexMatrix u = hermitian_propagator(h, t);
    ComplexMatrix out = u * rho.matrix() * u.adjoint();
    return DensityMatrix::unchecked(out.symmetrized());
}

}  // namespace noiseloom::qcore
