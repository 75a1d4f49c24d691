#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "irflow/operators.hpp"
#include "irflow/types.hpp"

namespace irflow {

struct SpectralResult {
    Real energy = 0.0;
    CVec vector;        // unit norm, vacuum-positive phase
    Real residual = 0.0;
    int iterations = 0;
};

// Circle |z - center| = radius used as a spectral contour.
struct ContourSpec {
    Complex center;
    Real radius = 0.0;
    int n_quad = 32;
};

// Multiply v by the unit scalar making component `anchor` real-positive; if
// that component is negligible, anchor on the largest-magnitude component.
void fix_phase(CVec& v, Eigen::Index anchor = 0);

// Smallest eigenpair by Lanczos with full reorthogonalization.  Starts from
// the vacuum unit vector and cross-checks against a seeded start (symmetry
// sectors can hide the ground state from a single Krylov space).  Throws
// DegenerateGround when the two lowest Ritz values are closer than
// 1e-10 * spectral scale.
SpectralResult ground_state(const SparseHermitian& H, Real tol, std::uint64_t seed = 12345,
                            int max_iter = 2000);

// m smallest eigenvalues, ascending, from a seeded vacuum-mixed start.
std::vector<Real> low_spectrum(const SparseHermitian& H, int m, Real tol,
                               std::uint64_t seed = 12345, int max_iter = 2000);

inline Real spectral_gap(const std::vector<Real>& lows) {
    return lows.size() >= 2 ? lows[1] - lows[0]
                            : std::numeric_limits<Real>::infinity();
}

// x with ||(H - z) x - b|| <= tol * ||b||, by sparse LU; the residual contract
// is asserted on return (SingularShift otherwise).
CVec shifted_solve(const SparseHermitian& H, Complex z, const CVec& b, Real tol);

// Trapezoidal quadrature of (1/2 pi i) * contour integral of (H-z)^{-1} v.
// For a circle enclosing exactly one simple eigenvalue this is <u,v> u.
// threads > 1 solves quadrature points concurrently (ordered reduction).
CVec contour_project(const SparseHermitian& H, const ContourSpec& spec, const CVec& v,
                     Real tol, int threads = 1);

// Throws EnclosureViolation unless the circle isolates exactly one of the
// given eigenvalues and all unseen eigenvalues (>= lows.back()) are outside.
void check_enclosure(const ContourSpec& spec, const std::vector<Real>& lows);

struct SeriesResult {
    CVec vector;
    Real contraction = 0.0;  // max observed term ratio over the contour
    int terms = 0;
};

// Neumann expansion of the projector of H0 + dH around H0:
//   sum_n (1/2 pi i) contour integral (H0-z)^{-1} (-dH (H0-z)^{-1})^n v dz.
// Stops at term_budget or when the increment falls under tol_series; throws
// ContractionFailure if the observed ratio reaches 1.
SeriesResult resolvent_series_apply(const SparseHermitian& H0, const SparseHermitian& dH,
                                    const ContourSpec& spec, const CVec& v, int term_budget,
                                    Real tol_solve, Real tol_series, int threads = 1);

// || (H0-z)^{-1/2} dH (H0-z)^{-1/2} ||_2 by dense eigendecomposition
// (principal square root); small dimensions only.
Real sandwich_norm_dense(const SparseHermitian& H0, const SparseHermitian& dH, Complex z);

}  // namespace irflow
