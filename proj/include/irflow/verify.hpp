#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "irflow/flow.hpp"
#include "irflow/fock.hpp"
#include "irflow/grid.hpp"
#include "irflow/params.hpp"
#include "irflow/types.hpp"

namespace irflow {

// Ordinary least squares y = slope * x + intercept.  With fewer than three
// points slope_stderr is 0; with zero variance in y the fit degenerates to
// slope 0 / r2 1 (callers treat all-zero data as trivially regular).
struct LineFit {
    Real slope = 0.0;
    Real intercept = 0.0;
    Real r2 = 1.0;
    Real slope_stderr = 0.0;
    int n = 0;
};

LineFit fit_line(const std::vector<Real>& x, const std::vector<Real>& y);

// Common shape of every scan: a pass flag that is the conjunction of the
// per-sample predicates, named fitted constants in a fixed emission order,
// the worst pass margin (>= 0 iff passed, up to sign conventions noted per
// check), and the raw sample table for reproduction.
struct VerificationReport {
    std::string check;
    std::string grid_desc;
    bool passed = false;
    std::vector<std::pair<std::string, Real>> fitted;
    Real worst_margin = 0.0;
    std::vector<std::string> columns;
    std::vector<std::vector<Real>> samples;
    std::vector<std::string> notes;
};

// Deterministic momentum samples inside the ball |P| < radius (rejection-free:
// direction from angles, radius by cube-root law).
std::vector<Vec3> sample_ball_momenta(int count, Real radius, std::uint64_t seed);

// Photon-momentum samples spread over the active shells: for each draw a shell
// is chosen round-robin and a point is placed at a random direction with
// |k| log-uniform inside the shell.
std::vector<Vec3> sample_photon_momenta(const ModelParams& params, int count,
                                        std::uint64_t seed);

// Energy-difference inequality E_{P-k} >= E_P - C_alpha |k| at every scale
// j = 0..J for each (P, k) pair; fits the smallest c >= 0 with
// C_alpha = 1/3 + c * alpha covering all samples and requires C_alpha < 1.
// Samples violating |P| < 1/3 or k = 0 are skipped and logged.
VerificationReport verify_I4(const ModelParams& params, const std::vector<Vec3>& k_samples,
                             const std::vector<Vec3>& P_samples, int threads = 1);

// One pull-through evaluation: compares b_m Psi against
//   -sqrt(alpha) sqrt(w_m)/sqrt(|k_m|) (H_{P-k_m} + |k_m| - E)^{-1} (eps_m . B) Psi
// and quantifies the occupation-cap defect exactly through the commutator
// remainder Delta_m, so that lhs - rhs = -(H_{P-k}+|k|-E)^{-1} Delta_m Psi
// holds to solver precision.
struct PullThroughSample {
    int mode = -1;
    Real k_norm = 0.0;
    Real weight = 0.0;
    Real lhs_norm = 0.0;         // || b_m Psi ||
    Real rel_residual = 0.0;     // || lhs - rhs || / max(||lhs||, floor)
    Real allowance = 0.0;        // || R Delta_m Psi || / same normalization
    Real identity_defect = 0.0;  // || (lhs - rhs) + R Delta_m Psi || / same
    Real ratio = 0.0;            // ||b_m Psi|| |k|^{3/2} / (sqrt(alpha w_m))
};

PullThroughSample verify_pull_through(const ModelParams& params, const ModeGrid& grid,
                                      const FockBasis& basis, int j, const CVec& Psi,
                                      Real E, int mode_index);

// All window modes at scale j, plus an occupation-cap rerun (Nmax + 1) that
// quantifies the truncation term and an angular/radial refinement rerun that
// checks stability of the fitted ratio bound C within a factor 3.
VerificationReport pull_through_scan(const ModelParams& params, int j);

// <N^f> against |ln sigma|: linear growth for P != 0 (slope tracking
// alpha |P|^2: the slope ratio between P and P/2 must lie in [2, 6]), slope
// statistically zero for the P = 0 run.  Needs records from a completed flow;
// the P/2 and P = 0 comparison flows are run internally.
VerificationReport photon_number_scan(const std::vector<FlowRecord>& records,
                                      const ModelParams& params);

// Hoelder ladders: ground-state and gradient differences over a log-spaced
// |dP| ladder at each requested scale; fitted exponents must stay above
// 1/4 - delta_rate and the fitted constants may not vary by more than the
// stability factor across scales.
VerificationReport holder_scan(const ModelParams& params, const std::vector<Real>& deltaP_list,
                               const std::vector<int>& scales);

// |P - gradE| <= C alpha uniformly over sampled P and scales, stability of the
// per-scale C under scale deepening, and the gradient window
// nu_min <= |gradE| <= nu_max outside the fitted ball r_alpha.
VerificationReport gradient_bounds_scan(const std::vector<FlowRecord>& records,
                                        const ModelParams& params, int threads = 1);

// Marginal coupling between consecutive scales, evaluated on the extended
// basis at z = E_j + i mu sigma_{j+1}:
//   marginal = || |K-z|^{-1/2} [Gamma . (L^+ + Ivec)] |K-z|^{-1/2} Phi_j ||
// (dense spectral square root; skipped above dense_cutoff), the resolvent
// quadratic form max_i |<Gamma_i Phi, (K-z)^{-1} Gamma_i Phi>|, and the
// vacuum normalization Z = sum_i ||L^+_i vac||^2 against its direct
// single-sum evaluation.
struct MarginalSample {
    int j = -1;
    Real sigma_next = 0.0;
    Real marginal = 0.0;
    Real quad_max = 0.0;
    Real Z_matrix = 0.0;
    Real Z_direct = 0.0;
    bool evaluated = false;
};

MarginalSample marginal_decay_at(const ModelParams& params, const FlowResult& flow, int j);

// Runs marginal_decay_at for j = 0..J-1, fits the log-slope of the marginal
// norm against the predicted (1 - delta_rate)/2 * ln(epsilon), and checks the
// Z oracle at 1e-10.
VerificationReport marginal_decay_check(const ModelParams& params, const FlowResult& flow);

// Flow-level acceptance roll-up: gap_j/sigma_j >= rho_minus on every scale
// j >= 1, and the dressed-state increments dPhi decay with log-slope at most
// -0.3 ln(1/epsilon).
VerificationReport ladder_check(const FlowResult& flow, const ModelParams& params);

}  // namespace irflow
