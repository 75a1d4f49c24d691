#include "irflow/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseLU>

#include "irflow/errors.hpp"
#include "irflow/parallel.hpp"
#include "irflow/rng.hpp"

namespace irflow {

namespace {

struct LanczosOut {
    std::vector<Real> ritz;      // m lowest, ascending
    CMat vectors;                // matching Ritz vectors (dim x m)
    int iterations = 0;
    bool exhausted = false;      // Krylov space filled the whole space
};

// Lanczos with full (two-pass) reorthogonalization against all stored basis
// vectors.  On breakdown a fresh seeded direction is injected with zero
// coupling, which keeps T symmetric tridiagonal and lets the sweep reach
// eigenvectors orthogonal to the start.
LanczosOut lanczos_lowest(const SpMat& H, int m, Real tol, CVec start, int max_iter,
                          std::uint64_t seed) {
    const Eigen::Index n = H.rows();
    const int kmax = static_cast<int>(std::min<Eigen::Index>(n, max_iter));
    CMat V(n, kmax);
    std::vector<Real> alpha, beta;  // beta[k] couples v_k to v_{k+1}
    std::uint64_t inject_seed = seed;

    if (start.norm() == 0.0) start = seeded_unit(n, inject_seed++);
    V.col(0) = start.normalized();

    auto reorthogonalize = [&](CVec& w, int upto) {
        for (int pass = 0; pass < 2; ++pass) {
            const CVec proj = V.leftCols(upto).adjoint() * w;
            w.noalias() -= V.leftCols(upto) * proj;
        }
    };

    Eigen::SelfAdjointEigenSolver<RMat> es;
    RMat T;
    int k = 0;
    for (; k < kmax; ++k) {
        CVec w = H * V.col(k);
        const Real a = std::real(V.col(k).dot(w));
        alpha.push_back(a);
        w -= a * V.col(k);
        if (k > 0 && beta[static_cast<size_t>(k) - 1] != 0.0)
            w -= beta[static_cast<size_t>(k) - 1] * V.col(k - 1);
        reorthogonalize(w, k + 1);

        const int nk = k + 1;
        const bool last = nk == kmax;
        Real b = w.norm();
        const Real breakdown = 1e-14 * std::max<Real>(1.0, std::abs(a));
        bool injected = false;
        if (b <= breakdown && !last) {
            // Krylov space is invariant: restart in the orthogonal complement.
            CVec fresh = seeded_unit(n, inject_seed++);
            reorthogonalize(fresh, nk);
            const Real fn = fresh.norm();
            if (fn <= 1e-10) {
                beta.push_back(0.0);
                ++k;
                break;  // complement numerically empty: space exhausted
            }
            w = fresh / fn;
            b = 0.0;
            injected = true;
        }

        // Ritz check on the current tridiagonal section (throttled: the dense
        // tridiagonal solve is O(nk^3) and need not run every iteration).
        const bool check =
            last || b <= breakdown || (nk >= m + 1 && nk % 4 == 0) || nk == kmax;
        if (check) {
            T = RMat::Zero(nk, nk);
            for (int i = 0; i < nk; ++i) T(i, i) = alpha[static_cast<size_t>(i)];
            for (int i = 0; i + 1 < nk; ++i)
                T(i, i + 1) = T(i + 1, i) = beta[static_cast<size_t>(i)];
            es.compute(T);
            const Real scale = std::max<Real>(
                1.0, std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(nk - 1))));
            bool done = nk >= std::min<Eigen::Index>(m, n);
            for (int i = 0; i < std::min<int>(m, nk) && done; ++i) {
                const Real rest = std::abs(b * es.eigenvectors()(nk - 1, i));
                if (rest > tol * scale) done = false;
            }
            if ((done && nk >= std::min<Eigen::Index>(m, n)) || last || nk == n) {
                beta.push_back(b);
                ++k;
                break;
            }
        }
        beta.push_back(injected ? 0.0 : b);
        if (!injected) {
            if (b == 0.0) { ++k; break; }
            V.col(k + 1) = w / b;
        } else {
            V.col(k + 1) = w;
        }
    }

    const int nk = std::min<int>(k, kmax);
    LanczosOut out;
    out.iterations = nk;
    out.exhausted = nk == n;
    T = RMat::Zero(nk, nk);
    for (int i = 0; i < nk; ++i) T(i, i) = alpha[static_cast<size_t>(i)];
    for (int i = 0; i + 1 < nk; ++i)
        T(i, i + 1) = T(i + 1, i) = beta[static_cast<size_t>(i)];
    es.compute(T);
    const int m_eff = std::min<int>(m, nk);
    out.ritz.assign(es.eigenvalues().data(), es.eigenvalues().data() + m_eff);
    out.vectors = V.leftCols(nk) * es.eigenvectors().leftCols(m_eff).cast<Complex>();
    return out;
}

}  // namespace

void fix_phase(CVec& v, Eigen::Index anchor) {
    const Real nrm = v.norm();
    if (nrm == 0.0) return;
    Eigen::Index idx = anchor;
    if (std::abs(v[idx]) <= 1e-12 * nrm) {
        v.cwiseAbs().maxCoeff(&idx);
    }
    const Complex a = v[idx];
    if (a != Complex(0.0)) v *= std::conj(a) / std::abs(a);
}

SpectralResult ground_state(const SparseHermitian& H, Real tol, std::uint64_t seed,
                            int max_iter) {
    const Eigen::Index n = H.dim();
    if (n < 1) throw InvalidParams("ground_state on empty operator");
    if (n == 1) {
        SpectralResult r;
        r.energy = std::real(H.m.coeff(0, 0));
        r.vector = CVec::Ones(1);
        return r;
    }
    CVec vacuum = CVec::Zero(n);
    vacuum[0] = Complex(1.0, 0.0);
    const LanczosOut a = lanczos_lowest(H.m, 2, tol, vacuum, max_iter, seed);
    const LanczosOut b = lanczos_lowest(H.m, 2, tol, seeded_unit(n, seed), max_iter, seed + 1);

    const bool use_b = b.ritz[0] < a.ritz[0] - tol * std::max<Real>(1.0, std::abs(a.ritz[0]));
    const LanczosOut& best = use_b ? b : a;

    const Real scale =
        std::max<Real>(1.0, std::max(std::abs(a.ritz[0]), std::abs(b.ritz[0])));
    // Degeneracy: two nearby Ritz values in one sweep, or two starts landing on
    // the same energy with essentially different vectors.
    if (best.ritz.size() >= 2 && best.ritz[1] - best.ritz[0] < 1e-10 * scale)
        throw DegenerateGround("lowest Ritz separation " +
                               std::to_string(best.ritz[1] - best.ritz[0]));
    if (std::abs(a.ritz[0] - b.ritz[0]) < 1e-10 * scale) {
        const Real overlap = std::abs(a.vectors.col(0).dot(b.vectors.col(0)));
        if (overlap < 1.0 - 1e-6)
            throw DegenerateGround("independent starts give overlap " +
                                   std::to_string(overlap) + " at equal energy");
    }

    SpectralResult r;
    r.energy = best.ritz[0];
    r.vector = best.vectors.col(0);
    r.vector.normalize();
    fix_phase(r.vector);
    r.iterations = a.iterations + b.iterations;
    r.residual = (H.m * r.vector - r.energy * r.vector).norm();
    if (r.residual > 50 * tol * scale && !best.exhausted)
        throw NoConvergence("ground-state residual " + std::to_string(r.residual),
                            r.iterations);
    return r;
}

std::vector<Real> low_spectrum(const SparseHermitian& H, int m, Real tol,
                               std::uint64_t seed, int max_iter) {
    const Eigen::Index n = H.dim();
    if (m < 1 || m > n) throw InvalidParams("low_spectrum: need 1 <= m <= dim");
    if (n == 1) return {std::real(H.m.coeff(0, 0))};
    // Vacuum-tilted seeded start: generic across symmetry sectors, reproducible.
    CVec start = seeded_unit(n, seed);
    start[0] += Complex(1.0, 0.0);
    start.normalize();
    const LanczosOut out = lanczos_lowest(H.m, m, tol, start, max_iter, seed + 2);
    if (static_cast<int>(out.ritz.size()) < m)
        throw NoConvergence("low_spectrum found " + std::to_string(out.ritz.size()) +
                                " of " + std::to_string(m) + " values",
                            out.iterations);
    return out.ritz;
}

CVec shifted_solve(const SparseHermitian& H, Complex z, const CVec& b, Real tol) {
    const Eigen::Index n = H.dim();
    if (b.size() != n) throw InvalidParams("shifted_solve: size mismatch");
    const Real bnorm = b.norm();
    if (bnorm == 0.0) return CVec::Zero(n);

    SpMatCol A = SpMatCol(H.m) - SpMatCol(scaled_identity(n, z));
    A.makeCompressed();
    Eigen::SparseLU<SpMatCol> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw SingularShift("LU factorization failed at z = (" + std::to_string(z.real()) +
                            ", " + std::to_string(z.imag()) + ")");
    const CVec x = lu.solve(b);
    const Real resid = (H.m * x - z * x - b).norm();
    if (!(resid <= tol * bnorm))
        throw SingularShift("residual " + std::to_string(resid / bnorm) +
                            " above tolerance; shift within distance ~" +
                            std::to_string(bnorm / std::max(x.norm(), 1e-300)) +
                            " of the spectrum");
    return x;
}

CVec contour_project(const SparseHermitian& H, const ContourSpec& spec, const CVec& v,
                     Real tol, int threads) {
    if (!(spec.radius > 0)) throw InvalidParams("contour radius must be > 0");
    if (spec.n_quad < 4) throw InvalidParams("contour needs n_quad >= 4");
    std::vector<CVec> slot(static_cast<size_t>(spec.n_quad));
    parallel_for(spec.n_quad, threads, [&](int q) {
        const Real theta = 2.0 * kPi * (q + 0.5) / spec.n_quad;
        const Complex z = spec.center + spec.radius * std::polar(1.0, theta);
        slot[static_cast<size_t>(q)] = shifted_solve(H, z, v, tol);
    });
    // shifted_solve applies (H - z)^{-1} = -(z - H)^{-1}; fold the sign into
    // the quadrature prefactor so the result is the Riesz projector itself.
    CVec acc = CVec::Zero(v.size());
    for (int q = 0; q < spec.n_quad; ++q) {
        const Real theta = 2.0 * kPi * (q + 0.5) / spec.n_quad;
        acc -= std::polar(spec.radius / spec.n_quad, theta) * slot[static_cast<size_t>(q)];
    }
    return acc;
}

void check_enclosure(const ContourSpec& spec, const std::vector<Real>& lows) {
    if (lows.empty()) throw InvalidParams("check_enclosure: empty spectrum sample");
    int inside = 0;
    for (const Real lam : lows)
        if (std::abs(Complex(lam, 0.0) - spec.center) < spec.radius) ++inside;
    if (inside != 1)
        throw EnclosureViolation(std::to_string(inside) + " sampled eigenvalues inside");
    // All unseen eigenvalues are >= lows.back(); they are certified outside only
    // if the largest sampled one already clears the right edge of the circle.
    if (!(lows.back() > std::real(spec.center) + spec.radius))
        throw EnclosureViolation("sampled spectrum does not clear the contour");
}

SeriesResult resolvent_series_apply(const SparseHermitian& H0, const SparseHermitian& dH,
                                    const ContourSpec& spec, const CVec& v, int term_budget,
                                    Real tol_solve, Real tol_series, int threads) {
    if (!(spec.radius > 0)) throw InvalidParams("contour radius must be > 0");
    struct PointResult {
        CVec sum;
        Real max_ratio = 0.0;
        int terms = 0;
    };
    std::vector<PointResult> slot(static_cast<size_t>(spec.n_quad));
    parallel_for(spec.n_quad, threads, [&](int q) {
        const Real theta = 2.0 * kPi * (q + 0.5) / spec.n_quad;
        const Complex z = spec.center + spec.radius * std::polar(1.0, theta);
        PointResult pr;
        CVec s = shifted_solve(H0, z, v, tol_solve);
        pr.sum = s;
        pr.terms = 1;
        Real prev = s.norm();
        for (int t = 1; t <= term_budget; ++t) {
            s = -shifted_solve(H0, z, CVec(dH.m * s), tol_solve);
            const Real cur = s.norm();
            if (prev > 0.0) pr.max_ratio = std::max(pr.max_ratio, cur / prev);
            pr.sum += s;
            ++pr.terms;
            if (cur <= tol_series * pr.sum.norm()) break;
            prev = cur;
        }
        slot[static_cast<size_t>(q)] = std::move(pr);
    });
    SeriesResult out;
    out.vector = CVec::Zero(v.size());
    for (int q = 0; q < spec.n_quad; ++q) {
        const Real theta = 2.0 * kPi * (q + 0.5) / spec.n_quad;
        // Same resolvent orientation as contour_project: negate the prefactor.
        out.vector -=
            std::polar(spec.radius / spec.n_quad, theta) * slot[static_cast<size_t>(q)].sum;
        out.contraction = std::max(out.contraction, slot[static_cast<size_t>(q)].max_ratio);
        out.terms = std::max(out.terms, slot[static_cast<size_t>(q)].terms);
    }
    if (out.contraction >= 1.0)
        throw ContractionFailure("observed term ratio " + std::to_string(out.contraction),
                                 out.contraction);
    return out;
}

Real sandwich_norm_dense(const SparseHermitian& H0, const SparseHermitian& dH, Complex z) {
    const CMat H0d = CMat(H0.m);
    Eigen::SelfAdjointEigenSolver<CMat> es(H0d);
    if (es.info() != Eigen::Success) throw NoConvergence("dense eigendecomposition failed");
    CVec inv_sqrt(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i) {
        const Complex d = Complex(es.eigenvalues()[i], 0.0) - z;
        if (d == Complex(0.0)) throw SingularShift("z hits an eigenvalue");
        inv_sqrt[i] = 1.0 / std::sqrt(d);  // principal branch
    }
    const CMat S =
        es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().adjoint();
    const CMat M = S * CMat(dH.m) * S;
    Eigen::BDCSVD<CMat> svd(M);
    return svd.singularValues()(0);
}

}  // namespace irflow
