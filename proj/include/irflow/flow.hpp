#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "irflow/dressing.hpp"
#include "irflow/fock.hpp"
#include "irflow/grid.hpp"
#include "irflow/operators.hpp"
#include "irflow/params.hpp"
#include "irflow/spectral.hpp"
#include "irflow/types.hpp"

namespace irflow {

// One row of the flow table.  Quantities referencing the previous scale
// (dPsi, dPhi, dGradE, contraction) are NaN in row j = 0; gap is +inf on the
// one-dimensional scale-0 space.
struct FlowRecord {
    int j = 0;
    Real sigma = 0.0;
    Real E = 0.0;
    Vec3 gradE = Vec3::Zero();     // Feynman-Hellmann gradient
    Vec3 gradE_fd = Vec3::Zero();  // central finite differences, step fd_h
    Real gap = 0.0;
    Real gap_over_sigma = 0.0;
    Real Nf = 0.0;                 // <N^f> in the bare ground state Psi_j
    Real dPsi = 0.0;               // || embed(Psi_{j-1}) - Psi_j ||
    Real dPhi = 0.0;               // || embed(Phi_{j-1}) - Phi_j ||
    Real dGradE = 0.0;             // | gradE_j - gradE_{j-1} |
    Real gamma_orth = 0.0;         // max_i |<Phi_j, Gamma_i Phi_j>|
    Real contraction = 0.0;        // measured series ratio / dense sandwich norm
    Real trunc_leak = 0.0;         // occupation-cap boundary weight of Psi_j
};

// Simulation state retained per scale for downstream verification.
struct ScaleState {
    FockBasis basis;
    CVec Psi;        // bare fiber ground state, vacuum-positive phase
    CVec Phi;        // dressed state W_{sigma_j}(gradE_j) Psi_j
    Real E = 0.0;
    Vec3 gradE = Vec3::Zero();
    Real gap = std::numeric_limits<Real>::infinity();
};

struct ScaleEvent {
    int j = 0;
    std::string what;
};

struct FlowResult {
    std::vector<FlowRecord> records;        // j = 0..J
    std::vector<ScaleState> states;         // j = 0..J
    std::vector<Real> canonical_residuals;  // per scale; NaN where skipped
    std::vector<ScaleEvent> events;
    ModeGrid grid;                          // full J-shell grid
    Real rho_minus_observed = std::numeric_limits<Real>::infinity();

    const ScaleState& final_state() const { return states.back(); }
};

struct FlowOptions {
    int threads = 1;
    std::uint64_t seed = 12345;
    Real fd_h = 1e-3;
    bool with_fd = true;   // finite-difference gradient columns (6 solves/scale)
    bool certify = true;   // per-scale canonical certification
};

FlowResult run_flow(const ModelParams& params, const FlowOptions& opts = {});

// Ground energy of the fiber Hamiltonian at momentum Pshift on the given
// scale-j basis (used by finite differences and momentum scans).
Real ground_energy_at(const Vec3& Pshift, const ModelParams& params, const ModeGrid& grid,
                      const FockBasis& basis, int j, std::uint64_t seed);

// gradE_i = P_i - <Psi, (Pf_i - sqrt(alpha) A_i) Psi>: exact derivative of the
// ground energy in the truncated model (Feynman-Hellmann).
Vec3 gradient_feynman_hellmann(const ModelParams& params, const ModeGrid& grid,
                               const FockBasis& basis, int j, const CVec& psi);

// Central differences (E(P + h e_i) - E(P - h e_i)) / 2h with fresh solves;
// requires P +- h e_i to stay inside |P| < 1/3.
Vec3 gradient_finite_difference(const ModelParams& params, const ModeGrid& grid,
                                const FockBasis& basis, int j, Real h, std::uint64_t seed);

// Probe flow recalibrating (rho_minus, mu) from the observed gap ratios:
// rho_minus' = min(observed/2, 0.8 rho_plus), mu' = (rho_minus' + rho_plus)/2.
// The returned parameters are validate()-clean.
ModelParams calibrate(const ModelParams& params, const FlowOptions& opts = {});

}  // namespace irflow
