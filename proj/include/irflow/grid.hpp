#pragma once

#include <utility>
#include <vector>

#include "irflow/params.hpp"
#include "irflow/types.hpp"

namespace irflow {

// One discretized photon mode.  Polarizations are separate modes: a (k, lambda)
// pair carries a transverse unit vector eps with k.eps = 0.  The quadrature
// weight is the d^3k cell measure (|k|^2 Jacobian folded in); the ladder
// operator of the mode is normalized so that [b_m, b_m'^dagger] = delta_mm'.
struct Mode {
    Vec3 k;
    Real weight = 0.0;
    int lambda = +1;  // +1 / -1 polarization label
    CVec3 eps;
    int shell = 0;  // scale index j with sigma_{j+1} < |k| <= sigma_j
};

// Contiguous half-open range of shells [lo, hi).  Shell j covers the annulus
// (sigma_{j+1}, sigma_j]; shells are stored outermost (highest |k|) first, so
// the interaction window (sigma_j, Lambda] is always the prefix [0, j).
struct Window {
    int lo = 0;
    int hi = 0;
    bool empty() const { return hi <= lo; }
};

struct ModeGrid {
    std::vector<Mode> modes;
    std::vector<std::pair<int, int>> shell_offsets;  // mode-index range per shell

    int n_shells() const { return static_cast<int>(shell_offsets.size()); }
    int n_modes() const { return static_cast<int>(modes.size()); }
};

// Transverse orthonormal pair for direction k: the polar/azimuthal unit vectors
// of spherical coordinates, with atan2(0,0) = 0 fixing the pair at the poles.
// For k = (0,0,1) this yields ((1,0,0), (0,1,0)).
std::pair<CVec3, CVec3> polarization_basis(const Vec3& k);

// Shells j = 0..J-1, each carrying n_radial x n_theta x n_phi x 2 modes.
// Radial nodes: Gauss-Legendre on [sigma_{j+1}, sigma_j] with the |k|^2
// Jacobian in the weights; angular nodes: Gauss-Legendre in cos(theta) times a
// uniform periodic rule in phi.
ModeGrid build_mode_grid(const ModelParams& params);

// Sub-grid of the outermost n_shells_keep shells (a prefix of the mode list).
ModeGrid shell_prefix(const ModeGrid& grid, int n_shells_keep);

// Mode-index range [begin, end) covered by a shell window; validates bounds.
std::pair<int, int> window_mode_range(const ModeGrid& grid, Window w);

// Test/bench helper: wrap explicit modes (already shell-tagged, shell-sorted).
ModeGrid make_custom_grid(std::vector<Mode> modes);

}  // namespace irflow
