#include "doctest.h"

#include <cmath>

#include "irflow/errors.hpp"
#include "irflow/flow.hpp"
#include "irflow/fock.hpp"
#include "irflow/grid.hpp"
#include "irflow/operators.hpp"
#include "irflow/params.hpp"
#include "irflow/spectral.hpp"

using namespace irflow;

TEST_CASE("free flow is exact to machine precision") {
    ModelParams p;
    p.alpha = 0.0;
    p.J = 3;
    const FlowResult flow = run_flow(p, {});
    REQUIRE(flow.records.size() == 4);
    const Real e_free = 0.5 * p.P.squaredNorm();
    for (const FlowRecord& r : flow.records) {
        CHECK(std::abs(r.E - e_free) < 1e-12);
        CHECK((r.gradE - p.P).norm() < 1e-12);
        CHECK((r.gradE_fd - p.P).norm() < 1e-9);  // FD carries its own h^2 error
        CHECK(r.Nf < 1e-12);
        CHECK(r.trunc_leak < 1e-12);
        if (r.j >= 1) {
            CHECK(r.dPsi < 1e-12);
            CHECK(r.dPhi < 1e-12);
            CHECK(r.dGradE < 1e-12);
        }
    }
}

TEST_CASE("scale zero is the bare electron regardless of coupling") {
    ModelParams p;
    p.alpha = 0.05;
    p.J = 1;
    const FlowResult flow = run_flow(p, {});
    const FlowRecord& r0 = flow.records[0];
    CHECK(r0.j == 0);
    CHECK(std::abs(r0.E - 0.5 * p.P.squaredNorm()) < 1e-14);
    CHECK(r0.Nf == 0.0);
    CHECK(std::isinf(r0.gap));
    CHECK(flow.states[0].basis.dim() == 1);
}

TEST_CASE("interacting flow lowers nothing for free but moves when coupled") {
    ModelParams p;
    p.J = 2;
    const FlowResult flow = run_flow(p, {});
    const FlowRecord& last = flow.records.back();
    CHECK(last.Nf > 0.0);           // coupled ground state carries photons
    CHECK(last.dPhi > 0.0);
    CHECK(last.gap_over_sigma >= p.rho_minus);
    CHECK(flow.rho_minus_observed >= p.rho_minus);
    CHECK(flow.rho_minus_observed < 10.0);
    for (const FlowRecord& r : flow.records)
        if (r.j >= 1) CHECK(r.gamma_orth < 1e-8);
}

TEST_CASE("Feynman-Hellmann gradient matches finite differences") {
    ModelParams p;
    p.J = 2;
    const FlowResult flow = run_flow(p, {});
    for (const FlowRecord& r : flow.records)
        CHECK((r.gradE - r.gradE_fd).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("ground_energy_at reproduces the flow energies") {
    ModelParams p;
    p.J = 2;
    const FlowResult flow = run_flow(p, {});
    const ModeGrid g2 = shell_prefix(flow.grid, 2);
    const FockBasis b2 = build_fock_basis(g2, p.Nmax, p.dim_cap);
    const Real e = ground_energy_at(p.P, p, g2, b2, 2, 999);
    CHECK(std::abs(e - flow.records[2].E) < 1e-9);
}

TEST_CASE("finite-difference gradient converges at second order") {
    ModelParams p;
    p.J = 1;
    const ModeGrid full = build_mode_grid(p);
    const FockBasis b = build_fock_basis(full, p.Nmax, p.dim_cap);
    const SparseHermitian H = assemble_fiber_hamiltonian(p, full, b, 1);
    const SpectralResult gs = ground_state(H, p.tol_eig);
    const Vec3 fh = gradient_feynman_hellmann(p, full, b, 1, gs.vector);
    const Vec3 fd1 = gradient_finite_difference(p, full, b, 1, 2e-3, 4);
    const Vec3 fd2 = gradient_finite_difference(p, full, b, 1, 1e-3, 4);
    const Real e1 = (fd1 - fh).norm(), e2 = (fd2 - fh).norm();
    CHECK(e2 < e1);  // halving h shrinks the defect
    CHECK(e2 < 1e-5);
}

// Bitwise equality that also identifies NaN with itself: the first scale has
// no predecessor, so its increment columns are NaN by convention.
static bool same_real(Real a, Real b) {
    return a == b || (std::isnan(a) && std::isnan(b));
}

TEST_CASE("flow is deterministic for a fixed seed") {
    ModelParams p;
    p.J = 2;
    FlowOptions o;
    o.seed = 4242;
    const FlowResult a = run_flow(p, o);
    const FlowResult b = run_flow(p, o);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].E == b.records[i].E);
        CHECK((a.records[i].gradE - b.records[i].gradE).norm() == 0.0);
        CHECK(same_real(a.records[i].dPhi, b.records[i].dPhi));
        CHECK(a.records[i].Nf == b.records[i].Nf);
    }
    CHECK((a.final_state().Psi - b.final_state().Psi).norm() == 0.0);
}

TEST_CASE("threaded flow equals the serial one") {
    ModelParams p;
    p.J = 2;
    FlowOptions serial;
    FlowOptions threaded;
    threaded.threads = 4;
    const FlowResult a = run_flow(p, serial);
    const FlowResult b = run_flow(p, threaded);
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].E == b.records[i].E);
        CHECK(same_real(a.records[i].dPhi, b.records[i].dPhi));
    }
}

TEST_CASE("calibration returns a usable floor below the observed ratio") {
    ModelParams p;
    p.J = 2;
    FlowOptions probe;
    probe.with_fd = false;
    probe.certify = false;
    const ModelParams q = calibrate(p, probe);
    CHECK_NOTHROW(q.validate());
    const FlowResult flow = run_flow(q, probe);
    CHECK(flow.rho_minus_observed >= q.rho_minus);
    CHECK(q.mu > 0.0);
    CHECK(q.mu < 1.0);
}

TEST_CASE("canonical residuals stay within the flow guard") {
    ModelParams p;
    p.J = 2;
    const FlowResult flow = run_flow(p, {});
    REQUIRE(!flow.canonical_residuals.empty());
    for (Real r : flow.canonical_residuals)
        if (std::isfinite(r)) CHECK(r <= p.tol_canonical_flow);
}
