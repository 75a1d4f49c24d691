#pragma once

#include <array>

#include "irflow/operators.hpp"
#include "irflow/params.hpp"
#include "irflow/types.hpp"

namespace irflow {

// Positivity factor 1 - khat . gradE of the dressing denominators.
Real delta_factor(const Vec3& k, const Vec3& gradE);

// Per-mode coherent displacement amplitudes
//   f_m = sqrt(alpha) * (gradE . eps_m) / (|k_m|^{3/2} delta(k_m)) * sqrt(weight_m)
// restricted to the window (zero elsewhere).
struct CoherentDisplacement {
    CVec f;
    Window window;
    Vec3 gradE;
};

CoherentDisplacement displacement_coefficients(Real alpha, const ModeGrid& grid,
                                               const Vec3& gradE, Window window);

// Anti-Hermitian generator G = sum_m (f_m b_m^dagger - conj(f_m) b_m).
SpMat weyl_generator(const CoherentDisplacement& coeffs, const FockBasis& basis);

// exp(G) v by Hermitian Lanczos exponential action on iG, with step splitting
// when a single Krylov section cannot reach the tolerance.
CVec apply_weyl(const SpMat& G, const CVec& v, Real tol);

// Dense unitary exp(G) through the eigendecomposition of iG (small dims).
CMat weyl_operator(const SpMat& G);

// W H W^dagger: dense conjugation up to dense_cutoff, nested-commutator series
// exp-adjoint above it.  Result is symmetrized and defect-checked.
SparseHermitian transform_hamiltonian(const SparseHermitian& H, const SpMat& G,
                                      Real tol_herm, int dense_cutoff);

struct CertifyOptions {
    const SparseHermitian* H = nullptr;  // operator whose conjugation certifies the assembly
    Real tol = 1e-8;
    int dense_cutoff = 500;
};

// Canonical decomposition of the dressed Hamiltonian at one scale:
//   K' = Gamma^2/2 + sum_m |k_m| delta_m b_m^dagger b_m + Escript,
// with beta = Pf - sqrt(alpha) A|_window, Pi the Bogoliubov translate of beta
// minus its vacuum expectation, and Gamma = Pi - <Pi>_Phi.
struct CanonicalPieces {
    std::array<SparseHermitian, 3> beta;
    std::array<SparseHermitian, 3> Pi;
    std::array<SparseHermitian, 3> Gamma;
    Vec3 Pi_expect;                  // <Pi>_Phi (real part; imaginary checked)
    Real Escript = 0.0;
    SparseHermitian Kprime;
    Real certification_residual = 0.0;  // max|K' - W H W^dagger|; NaN if skipped
};

CanonicalPieces canonical_form(const ModelParams& params, const ModeGrid& grid,
                               const FockBasis& basis, Window window, const Vec3& gradE,
                               const CVec& Phi, const CertifyOptions& certify = {});

// Scale-update operators on the extended basis (shells [0, j+1)), displaced
// with the stale gradient gradE_j:
//   Khat = (Gamma + L + Ivec)^2/2 + dispersion + Ehat,
// L supported on shell j, Ivec a constant vector, and
//   DeltaK = Khat - Ehat + Escript - K = {Gamma.(L+Ivec)}/2 + (L+Ivec)^2/2.
struct IntermediatePieces {
    std::array<SparseHermitian, 3> L;
    std::array<SpMat, 3> L_plus;  // creation half of L (L = L_plus + L_plus^dagger)
    Vec3 Ivec;
    Real Ehat = 0.0;
    SparseHermitian Khat;
    std::array<SparseHermitian, 3> Gamma_ext;
    Real Escript_ext = 0.0;
    SparseHermitian K_ext;
    SparseHermitian DeltaK;
    Real certification_residual = 0.0;
};

IntermediatePieces intermediate_operators(const ModelParams& params,
                                          const ModeGrid& grid_next,
                                          const FockBasis& basis_next, int j,
                                          const Vec3& gradE_j, const CVec& Phi_j_ext,
                                          const CertifyOptions& certify = {});

}  // namespace irflow
