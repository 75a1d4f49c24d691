#include "irflow/dressing.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "irflow/errors.hpp"

namespace irflow {

namespace {

// sum_i r_i c_i without conjugation (gradE . eps convention of the b^dagger
// coefficients).
Complex dotc(const Vec3& r, const CVec3& c) {
    return r.x() * c.x() + r.y() * c.y() + r.z() * c.z();
}

Real max_abs(const SpMat& m) {
    Real v = 0.0;
    for (int r = 0; r < m.outerSize(); ++r)
        for (SpMat::InnerIterator it(m, r); it; ++it) v = std::max(v, std::abs(it.value()));
    return v;
}

// Max |entry| over the sub-basis with total occupation <= Nmax - 2.  The
// canonical identities are derived with the full commutation relations, which
// the capped space represents only away from the boundary: the top level
// breaks [b, b^dag] = 1 outright and the level below feels it through every
// quadratic product.  Entries with either index in those two levels carry an
// irreducible cap defect (it grows with Nmax), so certifying them would test
// the truncation, not the assembly.  Interior entries are exact to machine
// precision once the cap clears them, which is what this measures.
Real interior_max_abs(const SpMat& m, const FockBasis& basis) {
    const int top = basis.Nmax - 2;
    Real v = 0.0;
    for (int r = 0; r < m.outerSize(); ++r) {
        if (basis.total(r) > top) continue;
        for (SpMat::InnerIterator it(m, r); it; ++it)
            if (basis.total(static_cast<std::int32_t>(it.col())) <= top)
                v = std::max(v, std::abs(it.value()));
    }
    return v;
}

// sum_m coeff(m) b_m^dagger over a mode range.
template <typename CoeffFn>
SpMat creation_window(const FockBasis& basis, int m_begin, int m_end, CoeffFn coeff) {
    std::vector<Triplet> trip;
    Occupation target;
    for (std::int32_t s = 0; s < basis.dim(); ++s) {
        if (basis.total(s) >= basis.Nmax) continue;
        for (int m = m_begin; m < m_end; ++m) {
            const Complex c = coeff(m);
            if (c == Complex(0.0)) continue;
            target = basis.states[s];
            ++target[m];
            trip.emplace_back(basis.index_of(target), s,
                              c * std::sqrt(static_cast<Real>(basis.states[s][m]) + 1.0));
        }
    }
    SpMat out(basis.dim(), basis.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

// Modified dispersion sum_m n_m |k_m| delta_m over every mode of the basis.
SpMat dispersion_diag(const ModeGrid& grid, const FockBasis& basis, const Vec3& gradE) {
    std::vector<Triplet> trip;
    for (std::int32_t s = 0; s < basis.dim(); ++s) {
        Real d = 0.0;
        for (int m = 0; m < basis.n_modes; ++m) {
            const int n = basis.states[s][m];
            if (n == 0) continue;
            const Mode& mode = grid.modes[m];
            d += n * mode.k.norm() * delta_factor(mode.k, gradE);
        }
        if (d != 0.0) trip.emplace_back(s, s, Complex(d, 0.0));
    }
    SpMat out(basis.dim(), basis.dim());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

Real expectation_real(const SpMat& op, const CVec& v, Real tol, const char* label) {
    const Complex e = v.dot(op * v);
    if (std::abs(e.imag()) > tol)
        throw InvariantViolation(std::string(label) + " expectation has imaginary part " +
                                 std::to_string(e.imag()));
    return e.real();
}

// One Krylov section of exp(-i t A) v with A = iG Hermitian.  ok reports
// whether the a-posteriori estimate met the tolerance (always true on an
// invariant subspace).
CVec expv_section(const SpMat& G, const CVec& v, Real t, int m_max, Real tol, bool& ok) {
    const Eigen::Index n = G.rows();
    const Real beta0 = v.norm();
    const int mcap = static_cast<int>(std::min<Eigen::Index>(m_max, n));
    CMat V(n, mcap);
    RVec alpha(mcap), beta(mcap);
    V.col(0) = v / beta0;
    int m = 0;
    bool invariant = false;
    for (int k = 0; k < mcap; ++k) {
        CVec w = Complex(0.0, 1.0) * (G * V.col(k));
        const Real a = V.col(k).dot(w).real();
        alpha[k] = a;
        w -= a * V.col(k);
        if (k > 0) w -= beta[k - 1] * V.col(k - 1);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i <= k; ++i) w -= V.col(i).dot(w) * V.col(i);
        const Real b = w.norm();
        beta[k] = b;
        m = k + 1;
        if (b <= 1e-14 * std::max(1.0, std::abs(a))) {
            invariant = true;  // Krylov space is invariant: the section is exact
            break;
        }
        if (k + 1 < mcap) V.col(k + 1) = w / b;
    }
    RMat T = RMat::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<RMat> es(T);
    if (es.info() != Eigen::Success) throw NoConvergence("tridiagonal eigensolve in expv");
    CVec u = CVec::Zero(m);
    for (int i = 0; i < m; ++i) {
        const Complex phase = std::exp(Complex(0.0, -t * es.eigenvalues()[i]));
        u += (beta0 * es.eigenvectors()(0, i)) * phase *
             es.eigenvectors().col(i).cast<Complex>();
    }
    const Real err = invariant ? 0.0 : beta[m - 1] * std::abs(u[m - 1]);
    ok = err <= tol * beta0;
    return V.leftCols(m) * u;
}

}  // namespace

Real delta_factor(const Vec3& k, const Vec3& gradE) {
    const Real kn = k.norm();
    if (kn == 0.0) throw ZeroMomentum();
    const Real d = 1.0 - k.dot(gradE) / kn;
    if (d <= 0.0)
        throw GradientTooLarge("delta factor " + std::to_string(d) + " for |k| = " +
                               std::to_string(kn));
    return d;
}

CoherentDisplacement displacement_coefficients(Real alpha, const ModeGrid& grid,
                                               const Vec3& gradE, Window window) {
    if (gradE.norm() >= 1.0)
        throw GradientTooLarge("|gradE| = " + std::to_string(gradE.norm()));
    const auto [m_begin, m_end] = window_mode_range(grid, window);
    CoherentDisplacement out;
    out.window = window;
    out.gradE = gradE;
    out.f = CVec::Zero(grid.n_modes());
    const Real sqrt_alpha = std::sqrt(alpha);
    for (int m = m_begin; m < m_end; ++m) {
        const Mode& mode = grid.modes[m];
        const Real kn = mode.k.norm();
        const Real delta = delta_factor(mode.k, gradE);
        out.f[m] = sqrt_alpha * std::sqrt(mode.weight) * dotc(gradE, mode.eps) /
                   (std::pow(kn, 1.5) * delta);
    }
    return out;
}

SpMat weyl_generator(const CoherentDisplacement& coeffs, const FockBasis& basis) {
    if (coeffs.f.size() != static_cast<Eigen::Index>(basis.n_modes))
        throw InvalidParams("displacement/basis mode-count mismatch");
    const SpMat C =
        creation_window(basis, 0, basis.n_modes, [&](int m) { return coeffs.f[m]; });
    return SpMat(C - SpMat(C.adjoint()));
}

CVec apply_weyl(const SpMat& G, const CVec& v, Real tol) {
    if (G.rows() != v.size()) throw InvalidParams("generator/vector dimension mismatch");
    if (v.norm() == 0.0) return v;
    constexpr int kMaxSteps = 1024;
    for (int steps = 1; steps <= kMaxSteps; steps *= 2) {
        bool ok = true;
        CVec x = v;
        for (int s = 0; s < steps && ok; ++s)
            x = expv_section(G, x, 1.0 / steps, 40, tol / steps, ok);
        if (ok) return x;
    }
    throw NoConvergence("Weyl exponential action", kMaxSteps);
}

CMat weyl_operator(const SpMat& G) {
    CMat A = Complex(0.0, 1.0) * CMat(G);  // Hermitian generator of exp(G) = exp(-iA)
    Eigen::SelfAdjointEigenSolver<CMat> es(A);
    if (es.info() != Eigen::Success) throw NoConvergence("Weyl generator eigensolve");
    CVec phase(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < phase.size(); ++i)
        phase[i] = std::exp(Complex(0.0, -es.eigenvalues()[i]));
    return es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
}

SparseHermitian transform_hamiltonian(const SparseHermitian& H, const SpMat& G,
                                      Real tol_herm, int dense_cutoff) {
    if (G.rows() != H.dim()) throw InvalidParams("generator/operator dimension mismatch");
    const Real href = std::max(1.0, max_abs(H.m));
    if (H.dim() <= dense_cutoff) {
        const CMat W = weyl_operator(G);
        const CMat K = W * CMat(H.m) * W.adjoint();
        return finish_hermitian(K.sparseView(Complex(0.0), 0.0), tol_herm * href);
    }
    // exp-adjoint series K = sum_n ad_G^n(H) / n!; requires two consecutive
    // negligible terms before accepting convergence.
    SpMat term = H.m;
    SpMat K = H.m;
    int quiet = 0;
    for (int n = 1; n <= 120; ++n) {
        term = SpMat(Complex(1.0 / n, 0.0) * (SpMat(G * term) - SpMat(term * G)));
        term.prune(Complex(href, 0.0), 1e-18);
        K += term;
        quiet = (max_abs(term) <= 1e-16 * href) ? quiet + 1 : 0;
        if (quiet >= 2) return finish_hermitian(std::move(K), tol_herm * href);
    }
    throw NoConvergence("exp-adjoint commutator series", 120);
}

CanonicalPieces canonical_form(const ModelParams& params, const ModeGrid& grid,
                               const FockBasis& basis, Window window, const Vec3& gradE,
                               const CVec& Phi, const CertifyOptions& certify) {
    if (grid.n_modes() != basis.n_modes)
        throw InvalidParams("grid/basis mode-count mismatch");
    if (Phi.size() != basis.dim()) throw InvalidParams("state/basis dimension mismatch");
    if (std::abs(Phi.norm() - 1.0) > 1e-8)
        throw InvalidParams("canonical form expects a unit-normalized state");

    const auto [m_begin, m_end] = window_mode_range(grid, window);
    const Real sqrt_alpha = std::sqrt(params.alpha);
    const Real scale = std::max(1.0, params.P.squaredNorm());
    const Eigen::Index dim = basis.dim();

    const FieldOperators all = assemble_field_operators(grid, basis, {0, grid.n_shells()});
    const FieldOperators win = assemble_field_operators(grid, basis, window);
    const CoherentDisplacement disp =
        displacement_coefficients(params.alpha, grid, gradE, window);

    CanonicalPieces out;
    for (int i = 0; i < 3; ++i) {
        SpMat beta = SpMat(all.Pf[i].m - sqrt_alpha * win.A[i].m);
        // Bogoliubov translate of beta: the Pf translate contributes
        // -sum_m k_{m,i} (f_m b^dag + cc); its constant cancels the A-shift
        // constant exactly, leaving Pi = beta + lin.
        const SpMat c = creation_window(basis, m_begin, m_end, [&](int m) {
            return Complex(-grid.modes[m].k[i], 0.0) * disp.f[m];
        });
        const SpMat lin = SpMat(c + SpMat(c.adjoint()));
        out.Pi[i] = finish_hermitian(SpMat(beta + lin), 0.0);
        out.beta[i] = finish_hermitian(std::move(beta), 0.0);
        out.Pi_expect[i] =
            expectation_real(out.Pi[i].m, Phi, 1e-10 * scale, "field momentum");
        out.Gamma[i] = finish_hermitian(
            SpMat(out.Pi[i].m - scaled_identity(dim, Complex(out.Pi_expect[i], 0.0))), 0.0);
    }

    Real integral = 0.0;
    for (int m = m_begin; m < m_end; ++m) {
        const Mode& mode = grid.modes[m];
        const Real kn = mode.k.norm();
        integral += mode.weight * std::norm(dotc(gradE, mode.eps)) /
                    (kn * kn * delta_factor(mode.k, gradE));
    }
    out.Escript = 0.5 * params.P.squaredNorm() -
                  0.5 * (params.P - gradE).squaredNorm() - params.alpha * integral;

    SpMat K = SpMat(dispersion_diag(grid, basis, gradE) +
                    scaled_identity(dim, Complex(out.Escript, 0.0)));
    for (int i = 0; i < 3; ++i)
        K += SpMat(Complex(0.5, 0.0) * SpMat(out.Gamma[i].m * out.Gamma[i].m));
    out.Kprime = finish_hermitian(std::move(K), params.tol_herm * scale);

    out.certification_residual = std::numeric_limits<Real>::quiet_NaN();
    if (certify.H != nullptr) {
        if (certify.H->dim() != dim)
            throw InvalidParams("certification operator dimension mismatch");
        const SpMat G = weyl_generator(disp, basis);
        const SparseHermitian conj =
            transform_hamiltonian(*certify.H, G, 1e-9, certify.dense_cutoff);
        out.certification_residual = interior_max_abs(SpMat(out.Kprime.m - conj.m), basis);
        if (out.certification_residual > certify.tol)
            throw ConsistencyFailure("canonical form vs conjugated Hamiltonian",
                                     out.certification_residual);
    }
    return out;
}

IntermediatePieces intermediate_operators(const ModelParams& params,
                                          const ModeGrid& grid_next,
                                          const FockBasis& basis_next, int j,
                                          const Vec3& gradE_j, const CVec& Phi_j_ext,
                                          const CertifyOptions& certify) {
    if (j < 0 || j + 1 > grid_next.n_shells())
        throw WindowOutOfRange("intermediate operators need shells [0, " +
                               std::to_string(j + 1) + ")");
    const Eigen::Index dim = basis_next.dim();
    const Real sqrt_alpha = std::sqrt(params.alpha);
    const Real scale = std::max(1.0, params.P.squaredNorm());

    // Scale-j canonical pieces carried on the extended basis: displacement and
    // Escript integral over shells [0, j) only, dispersion over everything.
    CanonicalPieces base =
        canonical_form(params, grid_next, basis_next, {0, j}, gradE_j, Phi_j_ext, {});

    IntermediatePieces out;
    out.Gamma_ext = base.Gamma;
    out.Escript_ext = base.Escript;
    out.K_ext = base.Kprime;

    const auto [s_begin, s_end] = window_mode_range(grid_next, {j, j + 1});
    for (int i = 0; i < 3; ++i) {
        const SpMat c = creation_window(basis_next, s_begin, s_end, [&](int m) {
            const Mode& mode = grid_next.modes[m];
            const Real kn = mode.k.norm();
            const Real delta = delta_factor(mode.k, gradE_j);
            const Complex proj = dotc(gradE_j, mode.eps);
            return -sqrt_alpha * std::sqrt(mode.weight) *
                   (Complex(mode.k[i], 0.0) * proj / (std::pow(kn, 1.5) * delta) +
                    mode.eps[i] / std::sqrt(kn));
        });
        out.L_plus[i] = c;
        out.L[i] = finish_hermitian(SpMat(c + SpMat(c.adjoint())), 0.0);
    }

    out.Ivec = Vec3::Zero();
    Real integral_new = 0.0;
    for (int m = s_begin; m < s_end; ++m) {
        const Mode& mode = grid_next.modes[m];
        const Real kn = mode.k.norm();
        const Real delta = delta_factor(mode.k, gradE_j);
        const Complex proj = dotc(gradE_j, mode.eps);
        const Real p2 = std::norm(proj);
        for (int i = 0; i < 3; ++i)
            out.Ivec[i] += mode.weight *
                           (mode.k[i] * p2 / (kn * kn * kn * delta * delta) +
                            2.0 * std::real(mode.eps[i] * std::conj(proj)) / (kn * kn * delta));
        integral_new += mode.weight * p2 / (kn * kn * delta);
    }
    out.Ivec *= params.alpha;

    // Escript with the integral extended through shell j, still at the stale
    // gradient: Ehat = Escript_ext - alpha * (shell-j integral).
    out.Ehat = out.Escript_ext - params.alpha * integral_new;

    const SpMat D = dispersion_diag(grid_next, basis_next, gradE_j);
    SpMat Khat = SpMat(D + scaled_identity(dim, Complex(out.Ehat, 0.0)));
    SpMat dK(dim, dim);
    for (int i = 0; i < 3; ++i) {
        const SpMat X = SpMat(out.L[i].m + scaled_identity(dim, Complex(out.Ivec[i], 0.0)));
        const SpMat GX = SpMat(out.Gamma_ext[i].m * X);
        const SpMat XG = SpMat(X * out.Gamma_ext[i].m);
        const SpMat XX = SpMat(X * X);
        SpMat full = SpMat(out.Gamma_ext[i].m + X);
        Khat += SpMat(Complex(0.5, 0.0) * SpMat(full * full));
        dK += SpMat(Complex(0.5, 0.0) * SpMat(SpMat(GX + XG) + XX));
    }
    out.Khat = finish_hermitian(std::move(Khat), params.tol_herm * scale);
    out.DeltaK = finish_hermitian(std::move(dK), params.tol_herm * scale);

    // Exact splitting identity of the assembly:
    //   Khat = K_ext + DeltaK + (Ehat - Escript_ext) Id.
    const Real split_resid = max_abs(SpMat(
        out.Khat.m - out.K_ext.m - out.DeltaK.m -
        scaled_identity(dim, Complex(out.Ehat - out.Escript_ext, 0.0))));
    if (split_resid > 1e-10 * scale)
        throw InvariantViolation("intermediate splitting identity residual " +
                                 std::to_string(split_resid));

    out.certification_residual = std::numeric_limits<Real>::quiet_NaN();
    if (certify.H != nullptr) {
        if (certify.H->dim() != dim)
            throw InvalidParams("certification operator dimension mismatch");
        const CoherentDisplacement disp =
            displacement_coefficients(params.alpha, grid_next, gradE_j, {0, j + 1});
        const SpMat G = weyl_generator(disp, basis_next);
        const SparseHermitian conj =
            transform_hamiltonian(*certify.H, G, 1e-9, certify.dense_cutoff);
        out.certification_residual = interior_max_abs(SpMat(out.Khat.m - conj.m), basis_next);
        if (out.certification_residual > certify.tol)
            throw ConsistencyFailure("intermediate form vs conjugated Hamiltonian",
                                     out.certification_residual);
    }
    return out;
}

}  // namespace irflow
