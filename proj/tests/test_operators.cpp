#include "doctest.h"

#include <cmath>

#include <Eigen/Dense>

#include "irflow/errors.hpp"
#include "irflow/fock.hpp"
#include "irflow/grid.hpp"
#include "irflow/operators.hpp"
#include "irflow/params.hpp"

using namespace irflow;

namespace {

Mode pmode(const Vec3& k, Real w, int which, int shell) {
    const auto [e1, e2] = polarization_basis(k);
    Mode m;
    m.k = k;
    m.weight = w;
    m.lambda = which == 0 ? +1 : -1;
    m.eps = which == 0 ? e1 : e2;
    m.shell = shell;
    return m;
}

Real max_abs(const SpMat& m) {
    Real r = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
}

}  // namespace

TEST_CASE("single-mode field operators against hand-computed matrices") {
    // k = 0.5 z, eps = x, weight 0.04; Nmax = 2 so the basis is {0,1,2} photons.
    const ModeGrid g = make_custom_grid({pmode(Vec3(0, 0, 0.5), 0.04, 0, 0)});
    const FockBasis b = build_fock_basis(g, 2, 1000);
    REQUIRE(b.dim() == 3);
    const FieldOperators ops = assemble_field_operators(g, b, {0, 1});

    const Real amp = 0.2 / std::sqrt(0.5);  // sqrt(w)/sqrt(|k|) = 0.28284271...
    CMat Ax = CMat(ops.A[0].m);
    CHECK(std::abs(Ax(1, 0) - Complex(amp, 0)) < 1e-15);
    CHECK(std::abs(Ax(0, 1) - Complex(amp, 0)) < 1e-15);
    CHECK(std::abs(Ax(2, 1) - Complex(amp * std::sqrt(2.0), 0)) < 1e-15);
    CHECK(std::abs(Ax(0, 0)) == 0.0);
    CHECK(std::abs(Ax(2, 0)) == 0.0);  // A changes occupation by exactly one
    CHECK(max_abs(ops.A[1].m) < 1e-15);
    CHECK(max_abs(ops.A[2].m) < 1e-15);  // transversality: eps has no z part

    const CMat pfz = CMat(ops.Pf[2].m);
    CHECK(std::abs(pfz(0, 0)) == 0.0);
    CHECK(std::abs(pfz(1, 1) - Complex(0.5, 0)) < 1e-15);
    CHECK(std::abs(pfz(2, 2) - Complex(1.0, 0)) < 1e-15);
    CHECK(max_abs(ops.Pf[0].m) == 0.0);
    const CMat hf = CMat(ops.Hf.m);
    CHECK(std::abs(hf(1, 1) - Complex(0.5, 0)) < 1e-15);
    CHECK(std::abs(hf(2, 2) - Complex(1.0, 0)) < 1e-15);
    const CMat nf = CMat(ops.Nf.m);
    CHECK(std::abs(nf(1, 1) - Complex(1.0, 0)) < 1e-15);
    CHECK(std::abs(nf(2, 2) - Complex(2.0, 0)) < 1e-15);
}

TEST_CASE("annihilation operator ladder matrix") {
    const ModeGrid g = make_custom_grid({pmode(Vec3(0, 0, 0.5), 0.04, 0, 0)});
    const FockBasis b = build_fock_basis(g, 2, 1000);
    const CMat bm = CMat(SpMat(annihilation_op(b, 0)));
    CHECK(std::abs(bm(0, 1) - Complex(1.0, 0)) < 1e-15);
    CHECK(std::abs(bm(1, 2) - Complex(std::sqrt(2.0), 0)) < 1e-15);
    CHECK(std::abs(bm(1, 0)) == 0.0);
    // b b^dag - b^dag b = 1 on states below the cap.
    const CMat comm = bm * bm.adjoint() - bm.adjoint() * bm;
    CHECK(std::abs(comm(0, 0) - Complex(1.0, 0)) < 1e-14);
    CHECK(std::abs(comm(1, 1) - Complex(1.0, 0)) < 1e-14);
}

TEST_CASE("free Hamiltonian is diagonal with the dispersion on the diagonal") {
    const Vec3 P(0.2, 0.1, 0.05);
    const ModeGrid g = make_custom_grid({pmode(Vec3(0, 0, 0.5), 0.04, 0, 0)});
    const FockBasis b = build_fock_basis(g, 3, 1000);
    const SparseHermitian H = assemble_fiber_hamiltonian_at(P, 0.0, 1e-12, g, b, {0, 1});
    const CMat Hd = CMat(H.m);
    for (Eigen::Index i = 0; i < b.dim(); ++i) {
        const Real n = static_cast<Real>(b.states[static_cast<size_t>(i)][0]);
        const Vec3 pf = n * Vec3(0, 0, 0.5);
        const Real expected = 0.5 * (P - pf).squaredNorm() + n * 0.5;
        CHECK(std::abs(Hd(i, i) - Complex(expected, 0)) < 1e-14);
        for (Eigen::Index j2 = 0; j2 < b.dim(); ++j2)
            if (i != j2) CHECK(std::abs(Hd(i, j2)) < 1e-15);
    }
}

TEST_CASE("fiber Hamiltonian is hermitian and window-monotone") {
    ModelParams p;
    p.J = 2;
    p.alpha = 0.02;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, 2, p.dim_cap);
    const SparseHermitian H1 = assemble_fiber_hamiltonian(p, g, b, 1);
    const SparseHermitian H2 = assemble_fiber_hamiltonian(p, g, b, 2);
    CHECK(max_abs(SpMat(H1.m - SpMat(H1.m.adjoint()))) < 1e-14);
    CHECK(max_abs(SpMat(H2.m - SpMat(H2.m.adjoint()))) < 1e-14);
    // The two assemblies share Pf/Hf but differ in the interaction window.
    CHECK(max_abs(SpMat(H2.m - H1.m)) > 1e-6);
}

TEST_CASE("scale increment reproduces the window difference exactly") {
    ModelParams p;
    p.J = 3;
    p.alpha = 0.01;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, 2, p.dim_cap);
    for (int j = 0; j < 3; ++j) {
        const SparseHermitian Ha = assemble_fiber_hamiltonian(p, g, b, j);
        const SparseHermitian Hb = assemble_fiber_hamiltonian(p, g, b, j + 1);
        const SparseHermitian dH = assemble_delta_H(p, g, b, j);
        const Real defect = max_abs(SpMat(Hb.m - Ha.m - dH.m));
        CHECK(defect < 1e-12);
    }
}

TEST_CASE("momentum-minus-field ties A and Pf together") {
    ModelParams p;
    p.J = 1;
    p.alpha = 0.04;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, 2, p.dim_cap);
    const FieldOperators ops = assemble_field_operators(g, b, {0, 1});
    const auto B = momentum_minus_field(p.P, p.alpha, g, b, {0, 1});
    const Real sa = std::sqrt(p.alpha);
    // B = P - beta with beta = Pf - sqrt(alpha) A, so the field term enters +.
    for (int i = 0; i < 3; ++i) {
        SpMat expect = -SpMat(ops.Pf[i].m) + sa * SpMat(ops.A[i].m);
        CMat diff = CMat(SpMat(B[static_cast<size_t>(i)] - expect));
        for (Eigen::Index r = 0; r < b.dim(); ++r) diff(r, r) -= Complex(p.P[i], 0.0);
        CHECK(diff.cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("hermitian finisher rejects a genuinely non-hermitian matrix") {
    SpMat m(2, 2);
    m.insert(0, 1) = Complex(1.0, 0.0);
    m.insert(1, 0) = Complex(0.5, 0.0);
    m.makeCompressed();
    CHECK_THROWS_AS(finish_hermitian(m, 1e-12), InvariantViolation);
}

TEST_CASE("empty interaction window leaves only the free part") {
    ModelParams p;
    p.J = 1;
    p.alpha = 0.05;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, 2, p.dim_cap);
    const SparseHermitian H0 = assemble_fiber_hamiltonian(p, g, b, 0);
    ModelParams pf = p;
    pf.alpha = 0.0;
    const SparseHermitian Hfree = assemble_fiber_hamiltonian(pf, g, b, 1);
    CHECK(max_abs(SpMat(H0.m - Hfree.m)) < 1e-14);
}
