#include <catch2/catch.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "noiseloom/envmodel.hpp"
#include "noiseloom/modelfile.hpp"
#include "noiseloom/sampler.hpp"

using namespace noiseloom;
using namespace noiseloom::envmodel;
using testutil::pauli_x;
using testutil::pauli_z;

namespace {

double bloch_component(const ComplexMatrix& rho, const ComplexMatrix& sigma) {
    return (sigma * rho).trace().real();
}

// GKSL dissipator gamma (A rho A† - {A†A, rho}/2) plus -i[H, rho], as a
// superoperator matrix. Used to build generic valid generators for tests.
ComplexMatrix gksl_superop(const ComplexMatrix& h, const ComplexMatrix& jump, double rate) {
    const std::size_t d = h.dim();
    const ComplexMatrix id = ComplexMatrix::identity(d);
    const ComplexMatrix jd = jump.adjoint();
    const ComplexMatrix jj = jd * jump;

    ComplexMatrix gen = conjugation_superop(h, id) - conjugation_superop(id, h);
    gen *= complex{0.0, -1.0};
    ComplexMatrix diss = conjugation_superop(jump, jd);
    diss -= 0.5 * (conjugation_superop(jj, id) + conjugation_superop(id, jj));
    diss *= complex{rate, 0.0};
    return gen + diss;
}

}  // namespace

TEST_CASE("build_rtn_env basics", "[envmodel]") {
    const auto env = build_rtn_env(1.0, 2.0);
    REQUIRE(!env.is_exact());
    CHECK(env.coupling().values[0] == Approx(-1.0));
    CHECK(env.coupling().values[1] == Approx(+1.0));
    CHECK(testutil::max_entry_diff(env.initial_state().matrix(),
                                   DensityMatrix::maximally_mixed(2).matrix()) < 1e-14);
    CHECK_THROWS_AS(build_rtn_env(0.0, 2.0), InvalidParameter);
    CHECK_THROWS_AS(build_rtn_env(-1.0, 2.0), InvalidParameter);
}

TEST_CASE("decoupled RTN limit has the zero observable", "[envmodel]") {
    const auto env = build_rtn_env(1.0, 0.0);
    REQUIRE(env.coupling().outcomes() == 1);
    CHECK(env.coupling().values[0] == Approx(0.0).margin(1e-15));
    // Every trajectory reads identically zero.
    CounterRng stream(5, 0);
    const auto traj = sampler::sample_trajectory(env, 0.2, 10, stream);
    for (auto idx : traj.outcome_indices) CHECK(idx == 0);
}

TEST_CASE("RTN generator action on sigma_z", "[envmodel]") {
    const double gamma = 1.3;
    const auto env = build_rtn_env(gamma, 2.0);
    const ComplexMatrix out = apply_superop(env.lindblad().generator, pauli_z());
    CHECK(testutil::max_entry_diff(out, complex{-2.0 * gamma, 0.0} * pauli_z()) < 1e-12);
}

TEST_CASE("propagate examples", "[envmodel]") {
    const auto env = build_rtn_env(1.0, 2.0);

    SECTION("stationary state stays put") {
        const auto out = propagate(env, DensityMatrix::maximally_mixed(2), 0.7);
        CHECK(testutil::max_entry_diff(out.matrix(),
                                       DensityMatrix::maximally_mixed(2).matrix()) < 1e-12);
    }
    SECTION("Bloch z decays as exp(-2 gamma t)") {
        const auto up = DensityMatrix::pure({1.0, 0.0});
        const auto out = propagate(env, up, 0.2);
        CHECK(bloch_component(out.matrix(), pauli_z()) == Approx(std::exp(-0.4)).margin(1e-10));
    }
    SECTION("free exact environment is inert") {
        CounterRng rng(3, 3);
        const auto rho = testutil::random_density(rng, 2);
        const auto env0 = make_exact_env(ComplexMatrix(2), rho, pauli_z());
        const auto out = propagate(env0, rho, 1.3);
        CHECK(testutil::max_entry_diff(out.matrix(), rho.matrix()) < 1e-12);
    }
    SECTION("dimension mismatch is rejected") {
        CHECK_THROWS_AS(propagate(env, DensityMatrix::maximally_mixed(3), 0.1),
                        DimensionMismatch);
    }
    SECTION("negative dt is rejected") {
        CHECK_THROWS_AS(propagate(env, DensityMatrix::maximally_mixed(2), -0.1),
                        InvalidParameter);
    }
}

TEST_CASE("RTN Bloch components: x conserved, y and z decay", "[envmodel][property]") {
    const double gamma = 0.8;
    const auto env = build_rtn_env(gamma, 2.0);
    ComplexMatrix rho0 = ComplexMatrix::identity(2);
    rho0 += complex{0.31, 0.0} * pauli_x();
    rho0 += complex{0.22, 0.0} * testutil::pauli_y();
    rho0 += complex{0.40, 0.0} * pauli_z();
    rho0 *= complex{0.5, 0.0};
    const DensityMatrix rho{rho0};

    for (double t : {0.05, 0.31, 1.7}) {
        const auto out = propagate(env, rho, t);
        const double decay = std::exp(-2.0 * gamma * t);
        CHECK(bloch_component(out.matrix(), pauli_x()) == Approx(0.31).margin(1e-9));
        CHECK(bloch_component(out.matrix(), testutil::pauli_y()) ==
              Approx(0.22 * decay).margin(1e-9));
        CHECK(bloch_component(out.matrix(), pauli_z()) == Approx(0.40 * decay).margin(1e-9));
    }
}

TEST_CASE("propagate is a semigroup on both branches", "[envmodel][property]") {
    CounterRng rng(17, 2);

    SECTION("lindblad branch") {
        const auto env = build_rtn_env(1.1, 2.0);
        const auto rho = testutil::random_density(rng, 2);
        const auto split = propagate(env, propagate(env, rho, 0.3), 0.5);
        const auto direct = propagate(env, rho, 0.8);
        CHECK(testutil::max_entry_diff(split.matrix(), direct.matrix()) < 1e-9);
    }
    SECTION("exact branch") {
        const auto h = testutil::random_hermitian(rng, 3);
        const auto rho = testutil::random_density(rng, 3);
        const auto env = make_exact_env(h, rho, testutil::random_hermitian(rng, 3));
        const auto split = propagate(env, propagate(env, rho, 0.4), 0.35);
        const auto direct = propagate(env, rho, 0.75);
        CHECK(testutil::max_entry_diff(split.matrix(), direct.matrix()) < 1e-9);
    }
}

TEST_CASE("propagate preserves positivity and trace on random states", "[envmodel][property]") {
    CounterRng rng(23, 9);
    const ComplexMatrix h = testutil::random_hermitian(rng, 2);
    const ComplexMatrix jump = testutil::random_hermitian(rng, 2);
    const auto gen = gksl_superop(h, jump, 0.9);
    const auto env = make_lindblad_env(gen, testutil::random_density(rng, 2), pauli_z());

    for (int trial = 0; trial < 8; ++trial) {
        const auto rho = testutil::random_density(rng, 2);
        const auto out = propagate(env, rho, 0.1 + rng.next_unit());
        const auto d = qcore::dm_diagnostics(out.matrix());
        CHECK(d.trace_error < 1e-10);
        CHECK(d.min_eigenvalue > -1e-10);
    }
}

TEST_CASE("expm agrees with the Hermitian propagator route", "[envmodel]") {
    CounterRng rng(31, 0);
    const ComplexMatrix h = testutil::random_hermitian(rng, 4);
    const double t = 0.9;
    ComplexMatrix a = h;
    a *= complex{0.0, -t};
    const ComplexMatrix via_pade = expm(a);
    const ComplexMatrix via_eigh = qcore::hermitian_propagator(h, t);
    CHECK(testutil::max_entry_diff(via_pade, via_eigh) < 1e-12);
}

TEST_CASE("expm handles defective matrices", "[envmodel]") {
    SECTION("nilpotent block") {
        ComplexMatrix n(2);
        n(0, 1) = 1.0;
        const ComplexMatrix e = expm(n);  // exactly I + N
        CHECK(testutil::max_entry_diff(e, ComplexMatrix::identity(2) + n) < 1e-15);
    }
    SECTION("Jordan block with eigenvalue") {
        // exp([[a,1],[0,a]]) = e^a [[1,1],[0,1]]
        const double a = -0.7;
        ComplexMatrix j(2);
        j(0, 0) = a;
        j(1, 1) = a;
        j(0, 1) = 1.0;
        const ComplexMatrix e = expm(j);
        CHECK(std::abs(e(0, 0) - std::exp(a)) < 1e-14);
        CHECK(std::abs(e(0, 1) - std::exp(a)) < 1e-14);
        CHECK(std::abs(e(1, 0)) < 1e-14);
    }
    SECTION("large norm forces scaling and squaring") {
        // Stiff relaxation: semigroup property must survive many squarings.
        const auto env = build_rtn_env(40.0, 2.0);
        const auto rho = DensityMatrix::pure({1.0, 0.0});
        const auto split = propagate(env, propagate(env, rho, 0.6), 0.9);
        const auto direct = propagate(env, rho, 1.5);
        CHECK(testutil::max_entry_diff(split.matrix(), direct.matrix()) < 1e-9);
        // z component is essentially fully relaxed.
        CHECK(std::abs((direct.matrix()(0, 0) - direct.matrix()(1, 1)).real()) < 1e-10);
    }
}

TEST_CASE("stationarity residual", "[envmodel]") {
    SECTION("RTN model is stationary") {
        CHECK(stationarity_residual(build_rtn_env(1.0, 2.0)) < 1e-14);
    }
    SECTION("excited initial state of the RTN generator") {
        const double gamma = 1.4;
        const auto rtn = build_rtn_env(gamma, 2.0);
        const auto env = make_lindblad_env(rtn.lindblad().generator,
                                           DensityMatrix::pure({1.0, 0.0}), pauli_z());
        CHECK(stationarity_residual(env) == Approx(std::sqrt(2.0) * gamma).margin(1e-12));
    }
    SECTION("commuting exact environment") {
        const auto env = make_exact_env(pauli_z(), DensityMatrix::maximally_mixed(2), pauli_z());
        CHECK(stationarity_residual(env) < 1e-14);
    }
}

TEST_CASE("lindblad generator validation rejects broken generators", "[envmodel]") {
    // A generator that leaks trace: rho -> rho (identity superoperator).
    const ComplexMatrix leaky = ComplexMatrix::identity(4);
    CHECK_THROWS_AS(make_lindblad_env(leaky, DensityMatrix::maximally_mixed(2), pauli_z()),
                    InvalidParameter);
}

TEST_CASE("fingerprints are deterministic content hashes", "[envmodel]") {
    const auto a = build_rtn_env(1.0, 2.0);
    const auto b = build_rtn_env(1.0, 2.0);
    const auto c = build_rtn_env(1.5, 2.0);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
    CHECK(a.fingerprint().size() == 16);
}

TEST_CASE("model files load", "[envmodel]") {
    SECTION("rtn") {
        const char* path = "test_model_rtn.json";
        std::ofstream(path) << R"({"type":"rtn","gamma":1.0,"omega":2.0})";
        const auto env = envmodel::load_model(path);
        CHECK(env.fingerprint() == build_rtn_env(1.0, 2.0).fingerprint());
        std::remove(path);
    }
    SECTION("exact with complex entries") {
        const char* path = "test_model_exact.json";
        std::ofstream(path) << R"({"type":"exact",
            "H":[[0.0,[0.0,-0.5]],[[0.0,0.5],0.0]],
            "rho":[[0.5,0],[0,0.5]],
            "V":[[1,0],[0,-1]]})";
        const auto env = envmodel::load_model(path);
        REQUIRE(env.is_exact());
        CHECK(testutil::max_entry_diff(env.exact().hamiltonian,
                                       complex{0.5, 0.0} * testutil::pauli_y()) < 1e-15);
        CHECK(env.coupling().outcomes() == 2);
        std::remove(path);
    }
    SECTION("lindblad") {
        const char* path = "test_model_lindblad.json";
        const auto rtn = build_rtn_env(0.7, 2.0);
        std::ofstream out(path);
        out << R"({"type":"lindblad","generator":[)";
        for (std::size_t i = 0; i < 4; ++i) {
            out << (i ? "," : "") << "[";
            for (std::size_t j = 0; j < 4; ++j) {
                const auto v = rtn.lindblad().generator(i, j);
                out << (j ? "," : "") << "[" << v.real() << "," << v.imag() << "]";
            }
            out << "]";
        }
        out << R"(],"rho":[[0.5,0],[0,0.5]],"V":[[1,0],[0,-1]]})";
        out.close();
        const auto env = envmodel::load_model(path);
        REQUIRE(!env.is_exact());
        CHECK(testutil::max_entry_diff(env.lindblad().generator, rtn.lindblad().generator) <
              1e-12);
        std::remove(path);
    }
    SECTION("errors") {
        CHECK_THROWS_AS(envmodel::load_model("definitely_missing.json"), IoError);

        const char* bad = "test_model_bad.json";
        std::ofstream(bad) << R"({"type":"exact","H":[[0,0],[0]],"rho":[[1]],"V":[[1]]})";
        CHECK_THROWS_AS(envmodel::load_model(bad), FormatError);
        std::remove(bad);

        const char* unknown = "test_model_unknown.json";
        std::ofstream(unknown) << R"({"type":"wiggle"})";
        CHECK_THROWS_AS(envmodel::load_model(unknown), FormatError);
        std::remove(unknown);

        const char* bad_rho = "test_model_badrho.json";
        std::ofstream(bad_rho)
            << R"({"type":"exact","H":[[0,0],[0,0]],"rho":[[1,0],[0,1]],"V":[[1,0],[0,-1]]})";
        CHECK_THROWS_AS(envmodel::load_model(bad_rho), FormatError);  // trace is 2
        std::remove(bad_rho);
    }
}
