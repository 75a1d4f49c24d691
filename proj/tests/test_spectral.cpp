#include "doctest.h"

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "irflow/errors.hpp"
#include "irflow/grid.hpp"
#include "irflow/operators.hpp"
#include "irflow/params.hpp"
#include "irflow/rng.hpp"
#include "irflow/spectral.hpp"

using namespace irflow;

namespace {

struct Dense {
    SparseHermitian H;
    Eigen::SelfAdjointEigenSolver<CMat> es;
};

Dense coupled_instance() {
    ModelParams p;
    p.J = 1;
    p.alpha = 0.02;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, 1);
    Eigen::SelfAdjointEigenSolver<CMat> es{CMat(H.m)};
    return Dense{std::move(H), std::move(es)};
}

}  // namespace

TEST_CASE("Lanczos ground state matches dense diagonalization") {
    const Dense d = coupled_instance();
    const SpectralResult gs = ground_state(d.H, 1e-11);
    CHECK(std::abs(gs.energy - d.es.eigenvalues()[0]) < 1e-9);
    CHECK(gs.residual < 1e-9);
    const CVec v0 = d.es.eigenvectors().col(0);
    CHECK(std::abs(std::abs(v0.dot(gs.vector)) - 1.0) < 1e-8);
    // vacuum-positive phase convention
    CHECK(gs.vector[0].real() > 0.0);
    CHECK(std::abs(gs.vector[0].imag()) < 1e-12);
}

TEST_CASE("low spectrum matches the dense lower edge") {
    const Dense d = coupled_instance();
    const std::vector<Real> lows = low_spectrum(d.H, 4, 1e-11);
    REQUIRE(lows.size() == 4);
    for (size_t i = 0; i < 4; ++i)
        CHECK(std::abs(lows[i] - d.es.eigenvalues()[static_cast<Eigen::Index>(i)]) < 1e-8);
    CHECK(spectral_gap(lows) ==
          doctest::Approx(d.es.eigenvalues()[1] - d.es.eigenvalues()[0]).epsilon(1e-7));
    CHECK(spectral_gap({1.0}) == std::numeric_limits<Real>::infinity());
}

TEST_CASE("shifted solve honors its residual contract") {
    const Dense d = coupled_instance();
    const CVec b = seeded_unit(d.H.m.rows(), 31);
    const Complex z(d.es.eigenvalues()[0] - 0.2, 0.05);
    const CVec x = shifted_solve(d.H, z, b, 1e-11);
    const CVec r = CVec(d.H.m * x) - z * x - b;
    CHECK(r.norm() <= 2e-11 * b.norm());
}

TEST_CASE("shifted solve refuses a singular shift") {
    const Dense d = coupled_instance();
    const CVec b = seeded_unit(d.H.m.rows(), 32);
    const Complex z(d.es.eigenvalues()[0], 0.0);  // exactly on the spectrum
    CHECK_THROWS_AS(shifted_solve(d.H, z, b, 1e-11), SingularShift);
}

TEST_CASE("contour projector matches the dense rank-one projector") {
    const Dense d = coupled_instance();
    const Real gap = d.es.eigenvalues()[1] - d.es.eigenvalues()[0];
    CVec u = seeded_unit(d.H.m.rows(), 33);
    u[0] += Complex(1.5, 0.0);
    u.normalize();
    ContourSpec spec;
    spec.center = Complex(d.es.eigenvalues()[0], 0.0);
    spec.radius = 0.25 * gap;
    spec.n_quad = 32;
    const CVec v0 = d.es.eigenvectors().col(0);
    const CVec dense = v0 * v0.dot(u);
    const CVec proj = contour_project(d.H, spec, u, 1e-12);
    CHECK((proj - dense).norm() < 1e-8);
    // Threaded quadrature reduces in a fixed order: identical result.
    const CVec proj4 = contour_project(d.H, spec, u, 1e-12, 4);
    CHECK((proj4 - proj).norm() == 0.0);
}

TEST_CASE("contour enclosing a near-degenerate pair projects onto its span") {
    // l1 and l2 sit ~3e-4 apart while l0 and l3 are ~0.3 away: a circle around
    // the pair tests the rank-2 projector exactly where individual eigenvectors
    // are ill-conditioned but their span is not.
    const Dense d = coupled_instance();
    const Real l1 = d.es.eigenvalues()[1], l2 = d.es.eigenvalues()[2],
               l3 = d.es.eigenvalues()[3];
    REQUIRE(l2 - l1 < 0.01);
    ContourSpec spec;
    spec.center = Complex(0.5 * (l1 + l2), 0.0);
    spec.radius = 0.3 * (l3 - l1);
    spec.n_quad = 32;
    CVec u = seeded_unit(d.H.m.rows(), 34);
    const CVec v1 = d.es.eigenvectors().col(1), v2 = d.es.eigenvectors().col(2);
    const CVec dense = v1 * v1.dot(u) + v2 * v2.dot(u);
    const CVec proj = contour_project(d.H, spec, u, 1e-12);
    CHECK((proj - dense).norm() < 1e-8);
}

TEST_CASE("enclosure checker flags circles that clip the spectrum") {
    const std::vector<Real> lows = {0.0, 1.0, 2.0};
    ContourSpec ok;
    ok.center = Complex(0.0, 0.0);
    ok.radius = 0.5;
    CHECK_NOTHROW(check_enclosure(ok, lows));
    ContourSpec clip;
    clip.center = Complex(0.0, 0.0);
    clip.radius = 1.2;  // swallows the second eigenvalue too
    CHECK_THROWS_AS(check_enclosure(clip, lows), EnclosureViolation);
    ContourSpec empty;
    empty.center = Complex(0.45, 0.0);
    empty.radius = 0.1;  // encloses nothing
    CHECK_THROWS_AS(check_enclosure(empty, lows), EnclosureViolation);
}

TEST_CASE("resolvent series agrees with the direct projector") {
    // Split H_{j+1} = H_j + dH on a fixed basis and expand around H_j.
    ModelParams p;
    p.J = 2;
    p.alpha = 0.005;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, 2, p.dim_cap);
    const SparseHermitian H0 = assemble_fiber_hamiltonian(p, g, b, 1);
    const SparseHermitian dH = assemble_delta_H(p, g, b, 1);
    const SparseHermitian H1 = assemble_fiber_hamiltonian(p, g, b, 2);

    const SpectralResult gs0 = ground_state(H0, 1e-11);
    const std::vector<Real> lows = low_spectrum(H0, 2, 1e-11);
    ContourSpec spec;
    spec.center = Complex(gs0.energy, 0.0);
    spec.radius = 0.5 * (lows[1] - lows[0]);
    spec.n_quad = 32;

    const SeriesResult series =
        resolvent_series_apply(H0, dH, spec, gs0.vector, 40, 1e-12, 1e-12);
    const CVec direct = contour_project(H1, spec, gs0.vector, 1e-12);
    CHECK(series.contraction < 1.0);
    CHECK(series.terms > 1);
    CHECK((series.vector - direct).norm() < 1e-8);
}

TEST_CASE("sandwich norm scales like sqrt(alpha) as the coupling vanishes") {
    ModelParams p;
    p.J = 1;
    p.alpha = 0.0;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, 2, p.dim_cap);
    const SparseHermitian H0 = assemble_fiber_hamiltonian(p, g, b, 0);
    const SpectralResult gs = ground_state(H0, 1e-11);

    auto norm_at = [&](Real alpha) {
        ModelParams q = p;
        q.alpha = alpha;
        const SparseHermitian dH = assemble_delta_H(q, g, b, 0);
        return sandwich_norm_dense(H0, dH, Complex(gs.energy, 0.3));
    };
    // dH = sqrt(alpha) X + alpha Y, so the quadrupling ratio tends to 2 with a
    // relative deviation of order sqrt(alpha) from the quadratic field term.
    auto ratio_at = [&](Real alpha) { return norm_at(4.0 * alpha) / norm_at(alpha); };
    const Real r_coarse = ratio_at(1e-4);
    const Real r_fine = ratio_at(1e-8);
    CHECK(norm_at(1e-8) > 0.0);
    CHECK(std::abs(r_fine - 2.0) < 0.01);
    CHECK(std::abs(r_fine - 2.0) < 0.1 * std::abs(r_coarse - 2.0));
}

TEST_CASE("phase fixing is idempotent and anchor-aware") {
    CVec v(3);
    v << Complex(0.0, -0.6), Complex(0.8, 0.0), Complex(0.0, 0.0);
    fix_phase(v, 0);
    CHECK(v[0].real() > 0.0);
    CHECK(std::abs(v[0].imag()) < 1e-15);
    const CVec w = v;
    fix_phase(v, 0);
    CHECK((v - w).norm() < 1e-15);
    // Negligible anchor component: falls back to the dominant one.
    CVec u(2);
    u << Complex(0.0, 0.0), Complex(0.0, 1.0);
    fix_phase(u, 0);
    CHECK(u[1].real() > 0.0);
}

TEST_CASE("seeded unit vectors are deterministic") {
    const CVec a = seeded_unit(20, 5), b = seeded_unit(20, 5), c = seeded_unit(20, 6);
    CHECK((a - b).norm() == 0.0);
    CHECK((a - c).norm() > 1e-3);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-14));
}
