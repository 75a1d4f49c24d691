#include "irflow/grid.hpp"

#include <cmath>

#include "irflow/errors.hpp"
#include "irflow/quadrature.hpp"

namespace irflow {

std::pair<CVec3, CVec3> polarization_basis(const Vec3& k) {
    const Real r = k.norm();
    if (k.squaredNorm() == 0.0) throw ZeroMomentum();
    const Real cos_t = k.z() / r;
    const Real sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
    const Real phi = std::atan2(k.y(), k.x());
    const Real cos_p = std::cos(phi), sin_p = std::sin(phi);
    Vec3 e_theta(cos_t * cos_p, cos_t * sin_p, -sin_t);
    Vec3 e_phi(-sin_p, cos_p, 0.0);
    return {e_theta.cast<Complex>(), e_phi.cast<Complex>()};
}

ModeGrid build_mode_grid(const ModelParams& params) {
    params.validate();  // J = 0 yields an empty grid (vacuum-only flows)

    const Quadrature radial_ref = gauss_legendre(params.n_radial);
    const Quadrature polar = gauss_legendre(params.n_theta);  // nodes = cos(theta)
    const Real phi_weight = 2.0 * kPi / params.n_phi;

    ModeGrid grid;
    grid.modes.reserve(static_cast<size_t>(params.J) * params.modes_per_shell());
    for (int s = 0; s < params.J; ++s) {
        const int begin = grid.n_modes();
        const Quadrature radial =
            scaled_to(radial_ref, params.sigma(s + 1), params.sigma(s));
        for (int ir = 0; ir < params.n_radial; ++ir) {
            const Real r = radial.nodes[ir];
            const Real wr = radial.weights[ir] * r * r;  // |k|^2 Jacobian
            for (int it = 0; it < params.n_theta; ++it) {
                const Real cos_t = polar.nodes[it];
                const Real sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
                for (int ip = 0; ip < params.n_phi; ++ip) {
                    const Real phi = 2.0 * kPi * ip / params.n_phi;
                    const Vec3 k(r * sin_t * std::cos(phi), r * sin_t * std::sin(phi),
                                 r * cos_t);
                    const Real w = wr * polar.weights[it] * phi_weight;
                    const auto [eps_plus, eps_minus] = polarization_basis(k);
                    grid.modes.push_back({k, w, +1, eps_plus, s});
                    grid.modes.push_back({k, w, -1, eps_minus, s});
                }
            }
        }
        grid.shell_offsets.emplace_back(begin, grid.n_modes());
    }
    return grid;
}

ModeGrid shell_prefix(const ModeGrid& grid, int n_shells_keep) {
    if (n_shells_keep < 0 || n_shells_keep > grid.n_shells())
        throw WindowOutOfRange("shell prefix of " + std::to_string(n_shells_keep) +
                               " from " + std::to_string(grid.n_shells()) + " shells");
    ModeGrid out;
    const int end = n_shells_keep == 0 ? 0 : grid.shell_offsets[n_shells_keep - 1].second;
    out.modes.assign(grid.modes.begin(), grid.modes.begin() + end);
    out.shell_offsets.assign(grid.shell_offsets.begin(),
                             grid.shell_offsets.begin() + n_shells_keep);
    return out;
}

std::pair<int, int> window_mode_range(const ModeGrid& grid, Window w) {
    if (w.empty()) return {0, 0};
    if (w.lo < 0 || w.hi > grid.n_shells())
        throw WindowOutOfRange("window [" + std::to_string(w.lo) + ", " +
                               std::to_string(w.hi) + ") of " +
                               std::to_string(grid.n_shells()) + " shells");
    return {grid.shell_offsets[w.lo].first, grid.shell_offsets[w.hi - 1].second};
}

ModeGrid make_custom_grid(std::vector<Mode> modes) {
    ModeGrid grid;
    grid.modes = std::move(modes);
    int begin = 0;
    for (int i = 0; i < grid.n_modes(); ++i) {
        const int shell = grid.modes[i].shell;
        if (shell != static_cast<int>(grid.shell_offsets.size()))
            throw InvalidParams("custom grid modes must be sorted by shell, 0-based");
        while (i + 1 < grid.n_modes() && grid.modes[i + 1].shell == shell) ++i;
        grid.shell_offsets.emplace_back(begin, i + 1);
        begin = i + 1;
    }
    return grid;
}

}  // namespace irflow
