// helpers.hpp — shared fixtures for the test suite.

#pragma once

#include <algorithm>
#include <complex>
#include <vector>

#include "noiseloom/qcore.hpp"
#include "noiseloom/rng.hpp"

namespace testutil {

using noiseloom::CounterRng;
using noiseloom::qcore::complex;
using noiseloom::qcore::ComplexMatrix;
using noiseloom::qcore::DensityMatrix;

inline ComplexMatrix pauli_x() {
    return ComplexMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}});
}

inline ComplexMatrix pauli_y() {
    return ComplexMatrix::from_rows({{0.0, complex{0.0, -1.0}}, {complex{0.0, 1.0}, 0.0}});
}

inline ComplexMatrix pauli_z() {
    return ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, -1.0}});
}

inline ComplexMatrix random_hermitian(CounterRng& rng, std::size_t dim, double scale = 1.0) {
    ComplexMatrix h(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        h(i, i) = complex{scale * (2.0 * rng.next_unit() - 1.0), 0.0};
        for (std::size_t j = i + 1; j < dim; ++j) {
            const complex z{scale * (rng.next_unit() - 0.5), scale * (rng.next_unit() - 0.5)};
            h(i, j) = z;
            h(j, i) = std::conj(z);
        }
    }
    return h;
}

inline DensityMatrix random_density(CounterRng& rng, std::size_t dim) {
    ComplexMatrix a(dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            a(i, j) = complex{rng.next_unit() - 0.5, rng.next_unit() - 0.5};
    ComplexMatrix rho = a * a.adjoint();
    const double tr = rho.trace().real();
    rho *= complex{1.0 / tr, 0.0};
    return DensityMatrix::unchecked(rho.symmetrized());
}

inline double max_entry_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a - b).max_abs();
}

inline std::vector<double> sorted_eigenvalues(const ComplexMatrix& m) {
    auto es = noiseloom::qcore::eigh(m.symmetrized(), 1e100);
    return es.values;  // already ascending
}

}  // namespace testutil
