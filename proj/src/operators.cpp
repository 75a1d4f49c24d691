#include "irflow/operators.hpp"

#include <cmath>
#include <string>

#include "irflow/errors.hpp"

namespace irflow {

CVec apply(const SparseHermitian& op, const CVec& x) { return op.m * x; }

Real hermiticity_defect(const SpMat& m) {
    SpMat diff = SpMat(m - SpMat(m.adjoint()));
    Real defect = 0.0;
    for (int r = 0; r < diff.outerSize(); ++r)
        for (SpMat::InnerIterator it(diff, r); it; ++it)
            defect = std::max(defect, std::abs(it.value()));
    return defect;
}

SparseHermitian finish_hermitian(SpMat m, Real tol) {
    const Real defect = hermiticity_defect(m);
    if (defect > tol)
        throw InvariantViolation("Hermiticity defect " + std::to_string(defect) +
                                 " exceeds tolerance " + std::to_string(tol));
    SpMat sym = SpMat(Complex(0.5, 0.0) * (m + SpMat(m.adjoint())));
    sym.prune(Complex(0.0));
    sym.makeCompressed();
    return SparseHermitian{std::move(sym)};
}

SpMat annihilation_op(const FockBasis& basis, int mode) {
    if (mode < 0 || mode >= basis.n_modes)
        throw WindowOutOfRange("mode index " + std::to_string(mode));
    std::vector<Triplet> trip;
    Occupation target;
    for (std::int32_t s = 0; s < basis.dim(); ++s) {
        const int n = basis.states[s][mode];
        if (n == 0) continue;
        target = basis.states[s];
        --target[mode];
        const std::int32_t t = basis.index_of(target);
        trip.emplace_back(t, s, Complex(std::sqrt(static_cast<Real>(n)), 0.0));
    }
    SpMat b(basis.dim(), basis.dim());
    b.setFromTriplets(trip.begin(), trip.end());
    return b;
}

SpMat scaled_identity(Eigen::Index dim, Complex c) {
    SpMat id(dim, dim);
    id.setIdentity();
    return SpMat(c * id);
}

namespace {

// Creation part sum_m coeff(m) b_m^dagger over a mode range; the Hermitian
// operator is C + C^dagger.
template <typename CoeffFn>
SpMat creation_sum(const FockBasis& basis, int m_begin, int m_end, CoeffFn coeff) {
    std::vector<Triplet> trip;
    Occupation target;
    for (std::int32_t s = 0; s < basis.dim(); ++s) {
        if (basis.total(s) >= basis.Nmax) continue;
        for (int m = m_begin; m < m_end; ++m) {
            const Complex c = coeff(m);
            if (c == Complex(0.0)) continue;
            target = basis.states[s];
            ++target[m];
            const std::int32_t t = basis.index_of(target);
            trip.emplace_back(t, s,
                              c * std::sqrt(static_cast<Real>(basis.states[s][m]) + 1.0));
        }
    }
    SpMat out(basis.dim(), basis.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

template <typename DiagFn>
SpMat diagonal_op(const ModeGrid& grid, const FockBasis& basis, int m_begin, int m_end,
                  DiagFn per_photon) {
    std::vector<Triplet> trip;
    for (std::int32_t s = 0; s < basis.dim(); ++s) {
        Real d = 0.0;
        for (int m = m_begin; m < m_end; ++m)
            d += basis.states[s][m] * per_photon(grid.modes[m]);
        if (d != 0.0) trip.emplace_back(s, s, Complex(d, 0.0));
    }
    SpMat out(basis.dim(), basis.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

void check_grid_basis(const ModeGrid& grid, const FockBasis& basis) {
    if (grid.n_modes() != basis.n_modes)
        throw InvalidParams("grid/basis mode-count mismatch");
}

}  // namespace

FieldOperators assemble_field_operators(const ModeGrid& grid, const FockBasis& basis,
                                        Window window) {
    check_grid_basis(grid, basis);
    const auto [m_begin, m_end] = window_mode_range(grid, window);
    const Real tol = 0.0;  // sums of exact conjugate pairs: defect is identically zero

    FieldOperators ops;
    for (int i = 0; i < 3; ++i) {
        SpMat c = creation_sum(basis, m_begin, m_end, [&](int m) {
            const Mode& mode = grid.modes[m];
            return mode.eps[i] * std::sqrt(mode.weight) / std::sqrt(mode.k.norm());
        });
        ops.A[i] = finish_hermitian(SpMat(c + SpMat(c.adjoint())), tol);
        ops.Pf[i] = finish_hermitian(
            diagonal_op(grid, basis, m_begin, m_end, [&](const Mode& mo) { return mo.k[i]; }),
            tol);
    }
    ops.Hf = finish_hermitian(
        diagonal_op(grid, basis, m_begin, m_end, [](const Mode& mo) { return mo.k.norm(); }),
        tol);
    ops.Nf = finish_hermitian(
        diagonal_op(grid, basis, m_begin, m_end, [](const Mode&) { return 1.0; }), tol);
    return ops;
}

std::array<SpMat, 3> momentum_minus_field(const Vec3& P, Real alpha, const ModeGrid& grid,
                                          const FockBasis& basis, Window window) {
    check_grid_basis(grid, basis);
    FieldOperators ops = assemble_field_operators(grid, basis, window);
    // Pf must cover the whole basis, not only the interaction window.
    FieldOperators all = assemble_field_operators(grid, basis, {0, grid.n_shells()});
    const Real sqrt_alpha = std::sqrt(alpha);
    std::array<SpMat, 3> B;
    for (int i = 0; i < 3; ++i)
        B[i] = SpMat(scaled_identity(basis.dim(), Complex(P[i], 0.0)) - all.Pf[i].m +
                     sqrt_alpha * ops.A[i].m);
    return B;
}

SparseHermitian assemble_fiber_hamiltonian_at(const Vec3& P, Real alpha, Real tol_herm,
                                              const ModeGrid& grid, const FockBasis& basis,
                                              Window interaction) {
    check_grid_basis(grid, basis);
    const std::array<SpMat, 3> B =
        momentum_minus_field(P, alpha, grid, basis, interaction);
    const SpMat Hf =
        assemble_field_operators(grid, basis, {0, grid.n_shells()}).Hf.m;
    SpMat H = Hf;
    for (int i = 0; i < 3; ++i) H += SpMat(Complex(0.5, 0.0) * SpMat(B[i] * B[i]));
    const Real scale = std::max(1.0, P.squaredNorm());
    return finish_hermitian(std::move(H), tol_herm * scale);
}

SparseHermitian assemble_fiber_hamiltonian(const ModelParams& params, const ModeGrid& grid,
                                           const FockBasis& basis, int j) {
    if (j < 0 || j > params.J) throw WindowOutOfRange("scale index " + std::to_string(j));
    const Window interaction{0, std::min(j, grid.n_shells())};
    return assemble_fiber_hamiltonian_at(params.P, params.alpha, params.tol_herm, grid,
                                         basis, interaction);
}

SparseHermitian assemble_delta_H(const ModelParams& params, const ModeGrid& grid,
                                 const FockBasis& basis, int j) {
    if (j + 1 > params.J) throw WindowOutOfRange("delta H needs j+1 <= J");
    if (j + 1 > grid.n_shells())
        throw WindowOutOfRange("delta H window: shell " + std::to_string(j) +
                               " not in grid");
    check_grid_basis(grid, basis);
    const std::array<SpMat, 3> B =
        momentum_minus_field(params.P, params.alpha, grid, basis, {0, j});
    const FieldOperators win = assemble_field_operators(grid, basis, {j, j + 1});
    const Real sqrt_alpha = std::sqrt(params.alpha);
    SpMat dH(basis.dim(), basis.dim());
    for (int i = 0; i < 3; ++i) {
        const SpMat& a = win.A[i].m;
        // {B, a}/2: B and a commute exactly by transversality (k.eps = 0), but the
        // symmetrized form keeps the assembly Hermitian at finite precision.
        dH += SpMat(Complex(0.5 * sqrt_alpha, 0.0) * SpMat(SpMat(B[i] * a) + SpMat(a * B[i])));
        dH += SpMat(Complex(0.5 * params.alpha, 0.0) * SpMat(a * a));
    }
    return finish_hermitian(std::move(dH), params.tol_herm);
}

}  // namespace irflow
