#include "irflow/flow.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>

#include "irflow/errors.hpp"

namespace irflow {

namespace {

constexpr Real kNaN = std::numeric_limits<Real>::quiet_NaN();
constexpr Real kInf = std::numeric_limits<Real>::infinity();

Real real_expectation(const SpMat& op, const CVec& v) { return v.dot(op * v).real(); }

std::string format_event(const char* fmt, Real a, Real b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, fmt, a, b);
    return buf;
}

}  // namespace

Real ground_energy_at(const Vec3& Pshift, const ModelParams& params, const ModeGrid& grid,
                      const FockBasis& basis, int j, std::uint64_t seed) {
    const Window interaction{0, std::min(j, grid.n_shells())};
    const SparseHermitian H = assemble_fiber_hamiltonian_at(Pshift, params.alpha,
                                                            params.tol_herm, grid, basis,
                                                            interaction);
    return ground_state(H, params.tol_eig, seed, params.max_lanczos).energy;
}

Vec3 gradient_feynman_hellmann(const ModelParams& params, const ModeGrid& grid,
                               const FockBasis& basis, int j, const CVec& psi) {
    const Window interaction{0, std::min(j, grid.n_shells())};
    const auto B = momentum_minus_field(params.P, params.alpha, grid, basis, interaction);
    Vec3 g;
    for (int i = 0; i < 3; ++i) g[i] = psi.dot(B[i] * psi).real();
    return g;
}

Vec3 gradient_finite_difference(const ModelParams& params, const ModeGrid& grid,
                                const FockBasis& basis, int j, Real h, std::uint64_t seed) {
    if (!(h > 0.0)) throw InvalidParams("finite-difference step must be positive");
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        Vec3 Pp = params.P;
        Vec3 Pm = params.P;
        Pp[i] += h;
        Pm[i] -= h;
        if (Pp.norm() >= 1.0 / 3.0 || Pm.norm() >= 1.0 / 3.0)
            throw InvalidParams("finite-difference stencil leaves |P| < 1/3");
        g[i] = (ground_energy_at(Pp, params, grid, basis, j, seed) -
                ground_energy_at(Pm, params, grid, basis, j, seed)) /
               (2.0 * h);
    }
    return g;
}

FlowResult run_flow(const ModelParams& params, const FlowOptions& opts) {
    params.validate();
    if (opts.threads < 1) throw InvalidParams("threads must be >= 1");

    FlowResult out;
    out.grid = build_mode_grid(params);
    out.records.reserve(params.J + 1);
    out.states.reserve(params.J + 1);
    out.canonical_residuals.assign(params.J + 1, kNaN);

    const Real scale_ref = std::max(1.0, params.P.squaredNorm());

    for (int j = 0; j <= params.J; ++j) {
        const ModeGrid grid_j = shell_prefix(out.grid, j);
        ScaleState st;
        st.basis = build_fock_basis(grid_j, params.Nmax, params.dim_cap);
        const SparseHermitian H_j =
            assemble_fiber_hamiltonian(params, grid_j, st.basis, j);

        FlowRecord rec;
        rec.j = j;
        rec.sigma = params.sigma(j);

        const SpectralResult direct =
            ground_state(H_j, params.tol_eig, opts.seed, params.max_lanczos);
        st.gap = kInf;
        if (st.basis.dim() >= 2) {
            const auto lows =
                low_spectrum(H_j, 2, params.tol_eig, opts.seed, params.max_lanczos);
            st.gap = spectral_gap(lows);
            if (!(st.gap > 0.0))
                throw GapCollapse("scale " + std::to_string(j) + " gap " +
                                  std::to_string(st.gap));
            if (std::abs(lows[0] - direct.energy) > 100.0 * params.tol_eig * scale_ref)
                out.events.push_back(
                    {j, format_event("ground-energy mismatch between solver starts: "
                                     "|dE| = %.3e (scale %.0f)",
                                     std::abs(lows[0] - direct.energy), Real(j))});
        }

        // Recursive resolvent update from the previous scale, plus the
        // contraction diagnostic for the direct path.
        rec.contraction = kNaN;
        bool used_recursive = false;
        CVec psi_rec;
        Real E_rec = 0.0;
        if (j >= 1) {
            const ScaleState& prev = out.states.back();
            const SparseHermitian H_prev_ext = assemble_fiber_hamiltonian_at(
                params.P, params.alpha, params.tol_herm, grid_j, st.basis, {0, j - 1});
            const SparseHermitian dH = assemble_delta_H(params, grid_j, st.basis, j - 1);
            const ContourSpec spec{Complex(prev.E, 0.0), params.mu * params.sigma(j),
                                   params.n_quad};
            if (params.strategy != Strategy::Direct) {
                try {
                    check_enclosure(spec, low_spectrum(H_prev_ext, 2, params.tol_eig,
                                                       opts.seed, params.max_lanczos));
                    const CVec emb = embed(prev.basis, st.basis, prev.Psi);
                    const SeriesResult series = resolvent_series_apply(
                        H_prev_ext, dH, spec, emb, params.neumann_terms, params.tol_solve,
                        params.tol_series, opts.threads);
                    const Real nrm = series.vector.norm();
                    if (nrm < 0.5)
                        throw ContractionFailure(
                            "projected norm " + std::to_string(nrm) + " too small",
                            series.contraction);
                    psi_rec = series.vector / nrm;
                    fix_phase(psi_rec);
                    E_rec = real_expectation(H_j.m, psi_rec);
                    if (std::abs(E_rec - spec.center.real()) >= spec.radius)
                        throw EnclosureViolation("recursive energy left the contour disc");
                    rec.contraction = series.contraction;
                    used_recursive = true;
                } catch (const Error& e) {
                    out.events.push_back(
                        {j, std::string("recursive update fell back to direct: ") +
                                e.what()});
                }
            }
            if (!used_recursive && st.basis.dim() <= params.dense_cutoff)
                rec.contraction = sandwich_norm_dense(
                    H_prev_ext, dH, Complex(prev.E, params.mu * params.sigma(j)));
        }

        if (used_recursive && params.strategy == Strategy::Recursive) {
            st.Psi = psi_rec;
            st.E = E_rec;
        } else {
            st.Psi = direct.vector;
            st.E = direct.energy;
        }
        if (used_recursive && params.strategy == Strategy::Both)
            out.events.push_back(
                {j, format_event("both-strategy check: |dE| = %.3e, ||dPsi|| = %.3e",
                                 std::abs(E_rec - direct.energy),
                                 (psi_rec - direct.vector).norm())});

        st.gradE = gradient_feynman_hellmann(params, grid_j, st.basis, j, st.Psi);
        if (st.gradE.norm() >= 1.0)
            throw GradientTooLarge("flow gradient |gradE| = " +
                                   std::to_string(st.gradE.norm()));
        rec.gradE = st.gradE;
        rec.gradE_fd = opts.with_fd
                           ? gradient_finite_difference(params, grid_j, st.basis, j,
                                                        opts.fd_h, opts.seed)
                           : Vec3(kNaN, kNaN, kNaN);

        const FieldOperators ops =
            assemble_field_operators(grid_j, st.basis, {0, grid_j.n_shells()});
        rec.Nf = real_expectation(ops.Nf.m, st.Psi);
        rec.trunc_leak = boundary_weight(st.basis, st.Psi);
        // Cap-boundary states miss the A^2 self-energy constant (their b b^dag
        // paths leave the truncated space), so deep in the ladder a tower of
        // soft multi-photon cap states descends below the dressed-electron
        // branch.  A lowest state living mostly on the boundary means the
        // truncated space has lost that branch: fail loudly instead of
        // silently flowing along an artifact.
        if (rec.trunc_leak > 0.5)
            throw GapCollapse(format_event(
                "lowest state at scale %.0f has occupation-cap boundary weight %.3f: "
                "the dressed-electron branch left the truncated space; raise Nmax "
                "or stop the ladder earlier",
                Real(j), rec.trunc_leak));
        if (rec.trunc_leak > params.trunc_warn)
            out.events.push_back(
                {j, format_event("occupation-cap leak %.3e above threshold %.3e",
                                 rec.trunc_leak, params.trunc_warn)});

        const CoherentDisplacement disp = displacement_coefficients(
            params.alpha, grid_j, st.gradE, {0, grid_j.n_shells()});
        const SpMat G = weyl_generator(disp, st.basis);
        st.Phi = apply_weyl(G, st.Psi, 1e-12);
        const Real phi_norm = st.Phi.norm();
        if (std::abs(phi_norm - 1.0) > 1e-9)
            throw InvariantViolation("Weyl action changed the norm by " +
                                     std::to_string(std::abs(phi_norm - 1.0)));
        st.Phi /= phi_norm;

        CertifyOptions copt;
        copt.tol = params.tol_canonical_flow;
        copt.dense_cutoff = params.dense_cutoff;
        constexpr Eigen::Index kCertifyDimCap = 5000;
        if (opts.certify && st.basis.dim() <= kCertifyDimCap)
            copt.H = &H_j;
        else if (opts.certify)
            out.events.push_back({j, "canonical certification skipped (dimension)"});
        const CanonicalPieces pieces =
            canonical_form(params, grid_j, st.basis, {0, grid_j.n_shells()}, st.gradE,
                           st.Phi, copt);
        out.canonical_residuals[j] = pieces.certification_residual;
        rec.gamma_orth = 0.0;
        for (int i = 0; i < 3; ++i)
            rec.gamma_orth = std::max(rec.gamma_orth,
                                      std::abs(st.Phi.dot(pieces.Gamma[i].m * st.Phi)));

        rec.E = st.E;
        rec.gap = st.gap;
        rec.gap_over_sigma = st.gap / rec.sigma;
        if (j >= 1) {
            const ScaleState& prev = out.states.back();
            rec.dPsi = (embed(prev.basis, st.basis, prev.Psi) - st.Psi).norm();
            rec.dPhi = (embed(prev.basis, st.basis, prev.Phi) - st.Phi).norm();
            rec.dGradE = (st.gradE - prev.gradE).norm();
            if (std::isfinite(rec.gap_over_sigma))
                out.rho_minus_observed =
                    std::min(out.rho_minus_observed, rec.gap_over_sigma);
        } else {
            rec.dPsi = rec.dPhi = rec.dGradE = kNaN;
        }

        out.records.push_back(rec);
        out.states.push_back(std::move(st));
    }
    return out;
}

ModelParams calibrate(const ModelParams& params, const FlowOptions& opts) {
    ModelParams probe = params;
    probe.strategy = Strategy::Direct;
    FlowOptions popts = opts;
    popts.with_fd = false;
    popts.certify = false;
    const FlowResult r = run_flow(probe, popts);
    if (!std::isfinite(r.rho_minus_observed))
        throw GapCollapse("no finite gap ratio observed during the calibration probe");
    ModelParams out = params;
    out.rho_minus = std::min(r.rho_minus_observed / 2.0, 0.8 * params.rho_plus);
    out.mu = 0.5 * (out.rho_minus + params.rho_plus);
    out.validate();
    return out;
}

}  // namespace irflow
