#include <catch2/catch.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <vector>

#include "helpers.hpp"
#include "noiseloom/quasiprob.hpp"
#include "noiseloom/sampler.hpp"

using namespace noiseloom;
using namespace noiseloom::quasiprob;
using envmodel::build_rtn_env;
using envmodel::make_exact_env;
using envmodel::ExactEnvironment;
using qcore::complex;
using qcore::ComplexMatrix;
using qcore::DensityMatrix;
using testutil::pauli_x;
using testutil::pauli_z;

namespace {

// Tiny self-contained 2x2 complex calculator: the oracle below must not share
// any code path with the library.
using M2 = std::array<complex, 4>;

M2 mul(const M2& a, const M2& b) {
    return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

M2 dagger(const M2& a) {
    return {std::conj(a[0]), std::conj(a[2]), std::conj(a[1]), std::conj(a[3])};
}

complex tr(const M2& a) { return a[0] + a[3]; }

// e^{-i t (w0/2) sx} = cos(w0 t / 2) I - i sin(w0 t / 2) sx, closed form.
M2 u_half_sx(double w0, double t) {
    const double c = std::cos(w0 * t / 2.0), s = std::sin(w0 * t / 2.0);
    return {complex{c, 0.0}, complex{0.0, -s}, complex{0.0, -s}, complex{c, 0.0}};
}

// Oracle for the two-level demo: H = (w0/2) sx, V = sz, rho = |0><0|.
complex oracle_entry(double w0, const std::vector<double>& times,
                     const std::vector<std::size_t>& xi, const std::vector<std::size_t>& zeta) {
    const M2 proj[2] = {M2{complex{0.0}, complex{0.0}, complex{0.0}, complex{1.0}},   // value -1
                        M2{complex{1.0}, complex{0.0}, complex{0.0}, complex{0.0}}};  // value +1
    const M2 rho = {complex{1.0}, complex{0.0}, complex{0.0}, complex{0.0}};
    auto heis = [&](std::size_t o, double t) {
        const M2 u = u_half_sx(w0, t);
        return mul(mul(dagger(u), proj[o]), u);  // e^{+itH} P e^{-itH}
    };
    M2 left = {complex{1.0}, complex{0.0}, complex{0.0}, complex{1.0}};
    M2 right = left;
    for (std::size_t l = 0; l < times.size(); ++l) {
        left = mul(heis(xi[l], times[l]), left);
        right = mul(right, heis(zeta[l], times[l]));
    }
    return tr(mul(mul(left, rho), right));
}

ExactEnvironment demo_env(double w0) {
    return make_exact_env(complex{w0 / 2.0, 0.0} * pauli_x(), DensityMatrix::pure({1.0, 0.0}),
                          pauli_z(), "demo")
        .exact();
}

ExactEnvironment commuting_env() {
    ComplexMatrix rho(2);
    rho(0, 0) = 0.7;
    rho(1, 1) = 0.3;
    return make_exact_env(complex{0.9, 0.0} * pauli_z(), DensityMatrix(rho), pauli_z(),
                          "commuting")
        .exact();
}

}  // namespace

TEST_CASE("k = 1 quasi-probabilities are Born probabilities", "[quasiprob]") {
    CounterRng rng(41, 1);
    const auto env = make_exact_env(testutil::random_hermitian(rng, 3),
                                    testutil::random_density(rng, 3),
                                    testutil::random_hermitian(rng, 3))
                         .exact();
    const auto table = joint_quasiprob(env, TimeGrid({0.6}));
    CHECK(std::abs(table.sum() - complex{1.0, 0.0}) < 1e-10);
    CHECK(table.offdiag_mass() == 0.0);
    for (std::size_t o = 0; o < env.coupling.outcomes(); ++o) {
        CHECK(table.at(o, 0).real() >= -1e-12);
        CHECK(std::abs(table.at(o, 0).imag()) < 1e-12);
    }
}

TEST_CASE("commuting environments have a diagonal quasi-probability", "[quasiprob]") {
    const auto env = commuting_env();
    for (std::size_t k : {1u, 2u, 3u}) {
        const auto table = joint_quasiprob(env, TimeGrid::uniform(0.3, k));
        CHECK(table.offdiag_mass() < 1e-10);
        CHECK(std::abs(table.sum() - complex{1.0, 0.0}) < 1e-10);
    }
}

TEST_CASE("non-commuting demo matches the independent 2x2 oracle", "[quasiprob]") {
    const double w0 = 1.0;
    const auto env = demo_env(w0);

    SECTION("k = 2, delayed grid") {
        const std::vector<double> times{0.4, 0.8};
        const auto table = joint_quasiprob(env, TimeGrid(times));
        double offdiag = 0.0;
        for (std::size_t x1 = 0; x1 < 2; ++x1)
            for (std::size_t x2 = 0; x2 < 2; ++x2)
                for (std::size_t z1 = 0; z1 < 2; ++z1) {
                    const std::vector<std::size_t> xi{x1, x2}, zeta{z1, x2};
                    const complex lib = table.entry(xi, zeta);
                    const complex ora = oracle_entry(w0, times, xi, zeta);
                    CHECK(std::abs(lib - ora) < 1e-10);
                    if (z1 != x1) offdiag += std::abs(lib);
                }
        CHECK(offdiag > 1e-3);
        // Frozen from an independent brute-force evaluation of this grid.
        CHECK(offdiag == Approx(0.15164664532641708).margin(1e-9));
    }
    SECTION("k = 3 on the sampling grid") {
        const auto table = joint_quasiprob(env, TimeGrid::uniform(0.2, 3));
        CHECK(table.offdiag_mass() == Approx(0.039470).margin(1e-5));
        const auto fine = joint_quasiprob(env, TimeGrid::uniform(0.4, 3));
        CHECK(fine.offdiag_mass() == Approx(0.151647).margin(1e-5));
    }
    SECTION("final-time delta is exact") {
        const auto table = joint_quasiprob(env, TimeGrid::uniform(0.3, 2));
        const complex off = table.entry({0, 0}, {0, 1});
        CHECK(off.real() == 0.0);
        CHECK(off.imag() == 0.0);
    }
}

TEST_CASE("quasi-probability invariants on random environments", "[quasiprob][property]") {
    CounterRng rng(53, 8);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t dim = 2 + trial % 3;
        const std::size_t k = 1 + trial % 3;
        const auto env = make_exact_env(testutil::random_hermitian(rng, dim),
                                        testutil::random_density(rng, dim),
                                        testutil::random_hermitian(rng, dim))
                             .exact();
        std::vector<double> times;
        double t = rng.next_unit() * 0.3;
        for (std::size_t l = 0; l < k; ++l) {
            times.push_back(t);
            t += 0.2 + rng.next_unit();
        }
        const auto table = joint_quasiprob(env, TimeGrid(times));
        CHECK(std::abs(table.sum() - complex{1.0, 0.0}) < 1e-10);
        CHECK(table.max_swap_asymmetry() < 1e-10);
    }
}

TEST_CASE("joint_prob on the telegraph model", "[quasiprob]") {
    const auto env = build_rtn_env(1.0, 2.0);

    SECTION("single measurement is unbiased") {
        const auto p = joint_prob(env, TimeGrid({0.0}));
        CHECK(p.p[0] == Approx(0.5).margin(1e-12));
        CHECK(p.p[1] == Approx(0.5).margin(1e-12));
    }
    SECTION("two-step stay probability") {
        const auto p = joint_prob(env, TimeGrid::uniform(0.2, 2));
        CHECK(p.at({1, 1}) == Approx(0.5 * (1.0 + std::exp(-0.4)) / 2.0).margin(1e-12));
        CHECK(p.sum() == Approx(1.0).margin(1e-12));
    }
    SECTION("Markov-chain factorization") {
        const auto p = joint_prob(env, TimeGrid::uniform(0.2, 4));
        const double stay = (1.0 + std::exp(-0.4)) / 2.0;
        for (std::size_t packed = 0; packed < p.p.size(); ++packed) {
            double expected = 0.5;
            std::size_t digits = packed;
            std::size_t prev = digits % 2;
            digits /= 2;
            for (std::size_t l = 1; l < 4; ++l) {
                const std::size_t cur = digits % 2;
                digits /= 2;
                expected *= (cur == prev) ? stay : (1.0 - stay);
                prev = cur;
            }
            CHECK(p.p[packed] == Approx(expected).margin(1e-12));
        }
    }
}

TEST_CASE("joint_prob normalizes for random environments", "[quasiprob][property]") {
    CounterRng rng(59, 3);
    for (int trial = 0; trial < 8; ++trial) {
        const std::size_t dim = 2 + trial % 3;
        const auto model = make_exact_env(testutil::random_hermitian(rng, dim),
                                          testutil::random_density(rng, dim),
                                          testutil::random_hermitian(rng, dim));
        const auto p = joint_prob(model, TimeGrid::uniform(0.25 + rng.next_unit() * 0.2, 3));
        CHECK(p.sum() == Approx(1.0).margin(1e-10));
        for (double v : p.p) CHECK(v >= 0.0);

        // Diagonal of the quasi-probability table coincides with joint_prob.
        const auto table = joint_quasiprob(model.exact(), p.grid);
        for (std::size_t packed = 0; packed < p.p.size(); ++packed) {
            const std::size_t stride = p.p.size() / p.n_outcomes;
            CHECK(std::abs(table.at(packed, packed % stride) - complex{p.p[packed], 0.0}) <
                  1e-10);
        }
    }
}

TEST_CASE("eigenstate-sum route agrees when the initial state commutes", "[quasiprob]") {
    CounterRng rng(61, 6);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t dim = 2 + trial % 3;
        const ComplexMatrix v = testutil::random_hermitian(rng, dim);
        // Initial state diagonal in the coupling eigenbasis.
        const auto es = qcore::eigh(v);
        ComplexMatrix rho(dim);
        double total = 0.0;
        std::vector<double> weights(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            weights[i] = 0.2 + rng.next_unit();
            total += weights[i];
        }
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) {
                complex s{};
                for (std::size_t kk = 0; kk < dim; ++kk)
                    s += es.vectors(i, kk) * (weights[kk] / total) *
                         std::conj(es.vectors(j, kk));
                rho(i, j) = s;
            }

        const auto env = make_exact_env(testutil::random_hermitian(rng, dim),
                                        DensityMatrix(rho.symmetrized()), v)
                             .exact();
        const TimeGrid grid = TimeGrid::uniform(0.4, 2);
        const auto direct = joint_prob(envmodel::EnvironmentModel(env, "x"), grid);
        const auto eigensum = joint_prob_eigensum(env, grid);
        for (std::size_t i = 0; i < direct.p.size(); ++i) {
            CHECK(direct.p[i] == Approx(eigensum.p[i]).margin(1e-10));
        }
    }
}

TEST_CASE("eigenstate-sum route differs inside degenerate subspaces", "[quasiprob]") {
    // Coupling with a two-fold degenerate eigenvalue, coherent initial state in
    // that subspace, and a Hamiltonian that connects both members to the rest.
    ComplexMatrix v(3);
    v(0, 0) = 1.0;
    v(1, 1) = 1.0;
    v(2, 2) = -1.0;
    ComplexMatrix h(3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) h(i, j) = 1.0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const auto env =
        make_exact_env(h, DensityMatrix::pure({inv_sqrt2, inv_sqrt2, 0.0}), v).exact();

    const TimeGrid grid = TimeGrid::uniform(0.5, 2);
    const auto direct = joint_prob(envmodel::EnvironmentModel(env, "x"), grid);
    const auto eigensum = joint_prob_eigensum(env, grid);
    double gap = 0.0;
    for (std::size_t i = 0; i < direct.p.size(); ++i) {
        gap = std::max(gap, std::abs(direct.p[i] - eigensum.p[i]));
    }
    CHECK(gap > 1e-3);
    CHECK(direct.sum() == Approx(1.0).margin(1e-10));
    CHECK(eigensum.sum() == Approx(1.0).margin(1e-10));
}

TEST_CASE("sampled sequence frequencies follow the computed law", "[quasiprob]") {
    // Exact-environment branch of the sampler against the sequence law: total
    // variation within 4 sqrt(|outcomes|^k / N).
    const auto model = envmodel::EnvironmentModel(demo_env(1.0), "demo");
    const std::size_t k = 3, n = 20000;
    const auto ens = sampler::sample_ensemble(model, 0.3, k, n, 6077);
    const auto law = joint_prob(model, TimeGrid::uniform(0.3, k));

    std::vector<double> freq(8, 0.0);
    for (const auto& traj : ens.trajectories) {
        freq[traj.outcome_indices[0] + 2 * traj.outcome_indices[1] +
             4 * traj.outcome_indices[2]] += 1.0;
    }
    double tv = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        tv += std::abs(freq[i] / static_cast<double>(n) - law.p[i]);
    }
    tv *= 0.5;
    CHECK(tv <= 4.0 * std::sqrt(8.0 / static_cast<double>(n)));
    CHECK(tv <= 0.02);
}

TEST_CASE("validity witness", "[quasiprob]") {
    SECTION("commuting environment is a genuine stochastic process") {
        const auto env = commuting_env();
        for (std::size_t k : {1u, 2u, 3u}) {
            const auto w = validity_witness(env, TimeGrid::uniform(0.3, k));
            CHECK(w.offdiag_mass < 1e-10);
            CHECK(w.kolmogorov_residual < 1e-10);
        }
    }
    SECTION("k = 1 has no off-diagonal mass by construction") {
        const auto w = validity_witness(demo_env(1.0), TimeGrid({0.7}));
        CHECK(w.offdiag_mass == 0.0);
        CHECK(w.kolmogorov_residual == 0.0);
    }
    SECTION("non-commuting demo is flagged") {
        const auto w = validity_witness(demo_env(1.0), TimeGrid::uniform(0.2, 3));
        CHECK(w.offdiag_mass > 1e-3);
    }
}

TEST_CASE("moments of the telegraph law", "[quasiprob]") {
    const auto env = build_rtn_env(1.0, 2.0);

    const auto p1 = joint_prob(env, TimeGrid({0.4}));
    CHECK(moment(p1, env.coupling().values) == Approx(0.0).margin(1e-12));

    // Equal-time second moment: sum of p * value^2.
    double second = 0.0;
    for (std::size_t o = 0; o < 2; ++o) {
        second += p1.p[o] * env.coupling().values[o] * env.coupling().values[o];
    }
    CHECK(second == Approx(1.0).margin(1e-12));

    const auto p2 = joint_prob(env, TimeGrid::uniform(0.2, 2));
    CHECK(moment(p2, env.coupling().values) == Approx(std::exp(-0.4)).margin(1e-12));
}

TEST_CASE("budget guard", "[quasiprob]") {
    const auto env = demo_env(1.0);
    try {
        joint_quasiprob(env, TimeGrid::uniform(0.2, 12), 1000);
        FAIL("expected BudgetExceeded");
    } catch (const BudgetExceeded& e) {
        CHECK(std::string(e.what()).find("budget") != std::string::npos);
    }
    CHECK_THROWS_AS(joint_prob(build_rtn_env(1.0, 2.0), TimeGrid::uniform(0.2, 30), 1000),
                    BudgetExceeded);
}

TEST_CASE("quasi-probability CSV export", "[quasiprob]") {
    const char* path = "test_qtable.csv";
    const auto table = joint_quasiprob(demo_env(1.0), TimeGrid::uniform(0.4, 2));
    write_quasiprob_csv(table, path);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "xi_seq,zeta_seq,re,im");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 8);  // 2^(2*2-1)
    std::remove(path);
}

TEST_CASE("time grid validation", "[quasiprob]") {
    CHECK_THROWS_AS(TimeGrid({}), InvalidParameter);
    CHECK_THROWS_AS(TimeGrid({-0.1, 0.2}), InvalidParameter);
    CHECK_THROWS_AS(TimeGrid({0.0, 0.0}), InvalidParameter);
    CHECK_THROWS_AS(TimeGrid({0.3, 0.2}), InvalidParameter);
}
