#pragma once

#include <cmath>
#include <string>

#include "irflow/errors.hpp"
#include "irflow/types.hpp"

namespace irflow {

enum class Strategy { Direct, Recursive, Both };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

// Physical and algorithmic parameters of one experiment.
//
// The infrared ladder is sigma_j = Lambda * epsilon^j for j = 0..J; shell j of
// the momentum grid covers the annulus (sigma_{j+1}, sigma_j].  The admissible
// window for the contour constants is
//     0 < rho_minus < mu < rho_plus < 1 - C_alpha < 2/3,   0 < epsilon < rho_minus/rho_plus,
// with C_alpha estimated as 1/3 + c_alpha_margin * alpha.  Total momentum must
// stay in the ball |P| < 1/3.
struct ModelParams {
    Real alpha   = 0.005;              // coupling strength (fine-structure analogue)
    Real Lambda  = 1.0;                // ultraviolet cutoff
    // Generic direction: an axis-aligned P is orthogonal to every polarization
    // vector of the coarse (n_theta = 1, n_phi = 2) grid, silencing the dressing.
    Vec3 P{0.2, 0.1, 0.05};            // total momentum (fiber label)
    Real epsilon = 0.4;                // scale ratio of the infrared ladder
    // Depth stays inside the occupation-cap trust envelope: cap-saturated
    // states forfeit the field self-energy constant, and once Nmax soft
    // photons cost less than that constant (around scale 5 at Nmax = 2) a
    // boundary artifact dips below the physical branch and the flow aborts.
    // Deeper ladders need a larger Nmax.
    int  J       = 4;                  // number of infrared scales

    int n_radial = 1;                  // radial quadrature points per shell
    int n_theta  = 1;                  // polar (cos-theta) quadrature points
    int n_phi    = 2;                  // azimuthal points (even => inversion-symmetric grid)
    int Nmax     = 2;                  // global photon-occupation cap

    Real mu        = 0.45;             // contour radius factor: radius mu*sigma_{j+1}
    Real rho_minus = 0.30;             // gap floor factor: gap_j >= rho_minus*sigma_j
    Real rho_plus  = 0.60;             // gap factor on the extended space
    Real nu_min    = 0.05;             // lower edge of the |gradE| window
    Real nu_max    = 0.90;             // upper edge of the |gradE| window

    Real tol_eig       = 1e-11;        // eigensolver residual target
    Real tol_solve     = 1e-11;        // shifted linear-solve relative residual
    Real tol_herm      = 1e-12;        // Hermiticity defect allowance
    Real tol_canonical = 1e-8;         // canonical-form certification (small instances)
    Real tol_canonical_flow = 1e-4;    // certification guard inside flows (absorbs Nmax leakage)
    Real tol_series    = 1e-10;        // Neumann-series relative truncation target

    int  n_quad        = 32;           // contour quadrature points
    int  neumann_terms = 12;           // Neumann series term budget
    int  max_lanczos   = 2000;         // Lanczos iteration budget

    Strategy strategy = Strategy::Direct;

    long dim_cap        = 200000;      // hard cap on Fock dimension
    int  dense_cutoff   = 500;         // dense-path threshold (conjugation, certification)
    Real c_alpha_margin = 1.0;         // C_alpha estimate used in parameter validation
    Real delta_rate     = 0.1;         // delta in the convergence-rate target (1-delta)/2
    Real trunc_warn     = 1e-4;        // boundary-occupancy warning threshold

    Real sigma(int j) const { return Lambda * std::pow(epsilon, j); }

    int modes_per_shell() const { return n_radial * n_theta * n_phi * 2; }

    // Throws InvalidParams (structural) or InvariantViolation (regime) on bad input.
    void validate() const;
};

}  // namespace irflow
