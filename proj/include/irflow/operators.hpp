#pragma once

#include <array>

#include "irflow/fock.hpp"
#include "irflow/grid.hpp"
#include "irflow/params.hpp"
#include "irflow/types.hpp"

namespace irflow {

// Assembled Hermitian operator with a matvec contract.  Construction goes
// through finish_hermitian, which checks the defect and symmetrizes exactly.
struct SparseHermitian {
    SpMat m;
    Eigen::Index dim() const { return m.rows(); }
};

CVec apply(const SparseHermitian& op, const CVec& x);
Real hermiticity_defect(const SpMat& m);  // max |M - M^dagger| entrywise
SparseHermitian finish_hermitian(SpMat m, Real tol);

// Field operators restricted to a shell window (modes outside contribute 0).
//   A:  vector potential components, mode amplitude sqrt(weight)/sqrt(|k|)
//   Pf: field momentum components (diagonal)
//   Hf: field energy (diagonal)     Nf: photon number (diagonal)
struct FieldOperators {
    std::array<SparseHermitian, 3> A;
    std::array<SparseHermitian, 3> Pf;
    SparseHermitian Hf;
    SparseHermitian Nf;
};

FieldOperators assemble_field_operators(const ModeGrid& grid, const FockBasis& basis,
                                        Window window);

// Annihilation operator of one mode (exact on the truncated basis).
SpMat annihilation_op(const FockBasis& basis, int mode);

// Sparse identity scaled by c.
SpMat scaled_identity(Eigen::Index dim, Complex c);

// gradP H = P - Pf + sqrt(alpha) A, with A restricted to the window.
std::array<SpMat, 3> momentum_minus_field(const Vec3& P, Real alpha, const ModeGrid& grid,
                                          const FockBasis& basis, Window window);

// Fiber Hamiltonian (P - Pf + sqrt(alpha) A_window)^2 / 2 + Hf on the given
// basis, with the A^2 term kept in full (no normal ordering).
SparseHermitian assemble_fiber_hamiltonian_at(const Vec3& P, Real alpha, Real tol_herm,
                                              const ModeGrid& grid, const FockBasis& basis,
                                              Window interaction);

// Interaction window (sigma_j, Lambda] = shells [0, j) on the basis's grid.
SparseHermitian assemble_fiber_hamiltonian(const ModelParams& params, const ModeGrid& grid,
                                           const FockBasis& basis, int j);

// Scale increment dH = sqrt(alpha)/2 * {gradP H^{sigma_j}, A|_window} +
// alpha/2 * (A|_window)^2, window = shell j; satisfies H^{sigma_{j+1}} =
// H^{sigma_j} + dH at assembly precision.
SparseHermitian assemble_delta_H(const ModelParams& params, const ModeGrid& grid,
                                 const FockBasis& basis, int j);

}  // namespace irflow
