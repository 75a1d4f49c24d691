#include "irflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>

#include <Eigen/Dense>

#include "irflow/dressing.hpp"
#include "irflow/errors.hpp"
#include "irflow/operators.hpp"
#include "irflow/parallel.hpp"
#include "irflow/rng.hpp"
#include "irflow/spectral.hpp"

namespace irflow {

namespace {

constexpr Real kBall = 1.0 / 3.0;

std::string strf(const char* fmt, ...) {
    char buf[256];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

std::string describe(const ModelParams& p) {
    return strf("alpha=%g P=(%g,%g,%g) J=%d eps=%g shells=%dx%dx%dx2 Nmax=%d", p.alpha,
                p.P[0], p.P[1], p.P[2], p.J, p.epsilon, p.n_radial, p.n_theta, p.n_phi,
                p.Nmax);
}

struct ScaleSpace {
    ModeGrid grid;
    FockBasis basis;
};

ScaleSpace make_space(const ModelParams& params, const ModeGrid& full, int j) {
    ScaleSpace s;
    s.grid = shell_prefix(full, j);
    s.basis = build_fock_basis(s.grid, params.Nmax, params.dim_cap);
    return s;
}

// Track the smallest margin; every pass predicate funnels through here so
// worst_margin >= 0 exactly when passed.
struct MarginTracker {
    Real worst = std::numeric_limits<Real>::infinity();
    bool ok = true;

    void require(Real margin) {
        worst = std::min(worst, margin);
        if (!(margin >= 0.0)) ok = false;
    }
    Real value() const {
        return std::isfinite(worst) ? worst : 0.0;
    }
};

}  // namespace

LineFit fit_line(const std::vector<Real>& x, const std::vector<Real>& y) {
    LineFit f;
    f.n = static_cast<int>(x.size());
    if (f.n == 0) return f;
    if (f.n == 1) {
        f.intercept = y[0];
        return f;
    }
    Real mx = 0.0, my = 0.0;
    for (int i = 0; i < f.n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= f.n;
    my /= f.n;
    Real sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < f.n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) {
        f.intercept = my;
        return f;
    }
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    Real ss_res = 0.0;
    for (int i = 0; i < f.n; ++i) {
        const Real r = y[i] - (f.slope * x[i] + f.intercept);
        ss_res += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    if (f.n > 2) f.slope_stderr = std::sqrt(std::max(0.0, ss_res / (f.n - 2) / sxx));
    return f;
}

std::vector<Vec3> sample_ball_momenta(int count, Real radius, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<Vec3> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const Real r = radius * std::cbrt(rng.uniform());
        const Real c = rng.uniform(-1.0, 1.0);
        const Real s = std::sqrt(std::max(0.0, 1.0 - c * c));
        const Real phi = rng.uniform(0.0, 2.0 * kPi);
        out.emplace_back(r * s * std::cos(phi), r * s * std::sin(phi), r * c);
    }
    return out;
}

std::vector<Vec3> sample_photon_momenta(const ModelParams& params, int count,
                                        std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<Vec3> out;
    out.reserve(static_cast<size_t>(count));
    const int shells = std::max(1, params.J);
    for (int i = 0; i < count; ++i) {
        const int shell = i % shells;
        const Real hi = params.sigma(shell);
        const Real lo = params.sigma(shell + 1);
        const Real kn = lo * std::pow(hi / lo, rng.uniform());
        const Real c = rng.uniform(-1.0, 1.0);
        const Real s = std::sqrt(std::max(0.0, 1.0 - c * c));
        const Real phi = rng.uniform(0.0, 2.0 * kPi);
        out.emplace_back(kn * s * std::cos(phi), kn * s * std::sin(phi), kn * c);
    }
    return out;
}

VerificationReport verify_I4(const ModelParams& params, const std::vector<Vec3>& k_samples,
                             const std::vector<Vec3>& P_samples, int threads) {
    params.validate();
    VerificationReport rep;
    rep.check = "I4_energy_inequality";
    rep.grid_desc = describe(params);
    rep.columns = {"P_index", "k_index", "j", "sigma", "E_P", "E_P_minus_k", "gain",
                   "margin"};

    std::vector<int> keepP, keepK;
    for (int a = 0; a < static_cast<int>(P_samples.size()); ++a) {
        if (P_samples[a].norm() < kBall) {
            keepP.push_back(a);
        } else {
            rep.notes.push_back(strf("P sample %d skipped: |P| = %.6g outside the ball", a,
                                     P_samples[a].norm()));
        }
    }
    for (int b = 0; b < static_cast<int>(k_samples.size()); ++b) {
        if (k_samples[b].norm() > 1e-14) {
            keepK.push_back(b);
        } else {
            rep.notes.push_back(strf("k sample %d rejected: k = 0", b));
        }
    }

    const ModeGrid full = build_mode_grid(params);
    std::vector<ScaleSpace> spaces;
    spaces.reserve(static_cast<size_t>(params.J + 1));
    for (int j = 0; j <= params.J; ++j) spaces.push_back(make_space(params, full, j));

    // Flattened energy tasks: per momentum (P or P-k) and scale.
    struct Task {
        Vec3 Pm;
        int j;
    };
    std::vector<Task> tasks;
    for (int a : keepP)
        for (int j = 0; j <= params.J; ++j) {
            tasks.push_back({P_samples[a], j});
            for (int b : keepK) tasks.push_back({P_samples[a] - k_samples[b], j});
        }
    std::vector<Real> energy(tasks.size(), 0.0);
    parallel_for(static_cast<int>(tasks.size()), threads, [&](int t) {
        const Task& tk = tasks[static_cast<size_t>(t)];
        energy[static_cast<size_t>(t)] =
            ground_energy_at(tk.Pm, params, spaces[static_cast<size_t>(tk.j)].grid,
                             spaces[static_cast<size_t>(tk.j)].basis, tk.j,
                             900100 + static_cast<std::uint64_t>(t));
    });

    Real max_gain = -std::numeric_limits<Real>::infinity();
    size_t t = 0;
    struct Row {
        int a, b, j;
        Real EP, EPk, gain;
    };
    std::vector<Row> rows;
    for (int a : keepP)
        for (int j = 0; j <= params.J; ++j) {
            const Real EP = energy[t++];
            for (int b : keepK) {
                const Real EPk = energy[t++];
                const Real gain = (EP - EPk) / k_samples[static_cast<size_t>(b)].norm();
                max_gain = std::max(max_gain, gain);
                rows.push_back({a, b, j, EP, EPk, gain});
            }
        }

    const Real c_fit =
        params.alpha > 0.0 ? std::max(0.0, (max_gain - kBall) / params.alpha) : 0.0;
    const Real C_alpha = kBall + c_fit * params.alpha;

    MarginTracker mt;
    for (const Row& r : rows) {
        const Real margin = C_alpha - r.gain;
        mt.require(margin + 1e-12);
        rep.samples.push_back({static_cast<Real>(r.a), static_cast<Real>(r.b),
                               static_cast<Real>(r.j), params.sigma(r.j), r.EP, r.EPk,
                               r.gain, margin});
    }
    mt.require(1.0 - C_alpha);  // C_alpha < 1
    if (rows.empty()) {
        rep.notes.push_back("no admissible samples");
        mt.ok = false;
    }

    rep.fitted = {{"c_fit", c_fit},
                  {"C_alpha", C_alpha},
                  {"max_gain", rows.empty() ? 0.0 : max_gain},
                  {"n_samples", static_cast<Real>(rep.samples.size())}};
    rep.worst_margin = mt.value();
    rep.passed = mt.ok;
    return rep;
}

PullThroughSample verify_pull_through(const ModelParams& params, const ModeGrid& grid,
                                      const FockBasis& basis, int j, const CVec& Psi,
                                      Real E, int mode_index) {
    if (mode_index < 0 || mode_index >= grid.n_modes())
        throw WindowOutOfRange("pull-through mode index out of range");
    const auto [w_begin, w_end] = window_mode_range(grid, {0, j});
    if (mode_index < w_begin || mode_index >= w_end)
        throw WindowOutOfRange("pull-through mode outside the active window");

    const Mode& mode = grid.modes[static_cast<size_t>(mode_index)];
    const Real kn = mode.k.norm();
    const Real cm = std::sqrt(mode.weight) / std::sqrt(kn);
    const Real sqrt_alpha = std::sqrt(params.alpha);
    const Real scale = std::max(1.0, params.P.squaredNorm());

    const SparseHermitian H = assemble_fiber_hamiltonian(params, grid, basis, j);
    const SparseHermitian Hk = assemble_fiber_hamiltonian_at(
        params.P - mode.k, params.alpha, params.tol_herm * scale, grid, basis, {0, j});
    const auto B = momentum_minus_field(params.P, params.alpha, grid, basis, {0, j});
    // eps . gradP H; by transversality (k.eps = 0) the same operator at P - k.
    SpMat eB = SpMat(mode.eps[0] * B[0] + mode.eps[1] * B[1] + mode.eps[2] * B[2]);

    const SpMat b = annihilation_op(basis, mode_index);
    const CVec lhs = b * Psi;
    const Complex z(E - kn, 0.0);

    const CVec x = shifted_solve(Hk, z, CVec(eB * Psi), params.tol_solve);
    const CVec rhs = (-sqrt_alpha * cm) * x;

    // Commutator remainder of the truncated algebra:
    //   Delta = b H - (H_{P-k} + |k|) b - sqrt(alpha) c_m (eps.B);
    // exactly zero without the occupation cap, supported on cap-boundary
    // states otherwise.  lhs - rhs = -(H_{P-k}+|k|-E)^{-1} Delta Psi.
    const SpMat Delta =
        SpMat(SpMat(b * H.m) - SpMat(Hk.m * b) - SpMat(Complex(kn, 0.0) * b) -
              SpMat(Complex(sqrt_alpha * cm, 0.0) * eB));
    const CVec dPsi = Delta * Psi;
    CVec Rd = CVec::Zero(basis.dim());
    if (dPsi.norm() > 0.0) Rd = shifted_solve(Hk, z, dPsi, params.tol_solve);

    PullThroughSample s;
    s.mode = mode_index;
    s.k_norm = kn;
    s.weight = mode.weight;
    s.lhs_norm = lhs.norm();
    const Real denom = std::max(s.lhs_norm, 1e-14);
    s.rel_residual = (lhs - rhs).norm() / denom;
    s.allowance = Rd.norm() / denom;
    s.identity_defect = (lhs - rhs + Rd).norm() / denom;
    s.ratio = params.alpha > 0.0
                  ? s.lhs_norm * std::pow(kn, 1.5) / (sqrt_alpha * std::sqrt(mode.weight))
                  : 0.0;
    return s;
}

namespace {

struct PullRun {
    std::vector<PullThroughSample> rows;
    Real C = 0.0;
    Real rel_max = 0.0;
    Real allow_max = 0.0;
    Real id_max = 0.0;
};

PullRun pull_run(const ModelParams& params, int j, std::vector<std::string>& notes,
                 bool& singular) {
    PullRun run;
    const ModeGrid full = build_mode_grid(params);
    const ModeGrid g = shell_prefix(full, j);
    const FockBasis basis = build_fock_basis(g, params.Nmax, params.dim_cap);
    const SparseHermitian H = assemble_fiber_hamiltonian(params, g, basis, j);
    const SpectralResult gs = ground_state(H, params.tol_eig, 424242, params.max_lanczos);
    for (int m = 0; m < g.n_modes(); ++m) {
        try {
            PullThroughSample s =
                verify_pull_through(params, g, basis, j, gs.vector, gs.energy, m);
            run.C = std::max(run.C, s.ratio);
            run.rel_max = std::max(run.rel_max, s.rel_residual);
            run.allow_max = std::max(run.allow_max, s.allowance);
            run.id_max = std::max(run.id_max, s.identity_defect);
            run.rows.push_back(s);
        } catch (const SingularShift& e) {
            notes.push_back(strf("mode %d: singular shift (I4 counterexample): %s", m,
                                 e.what()));
            singular = true;
        }
    }
    return run;
}

}  // namespace

VerificationReport pull_through_scan(const ModelParams& params, int j) {
    params.validate();
    if (j < 0 || j > params.J) throw WindowOutOfRange("pull-through scan scale");
    VerificationReport rep;
    rep.check = "pull_through";
    rep.grid_desc = describe(params) + strf(" scale=%d", j);
    rep.columns = {"run",       "mode",      "k_norm",          "weight", "lhs_norm",
                   "rel_residual", "allowance", "identity_defect", "ratio"};

    bool singular = false;
    const PullRun base = pull_run(params, j, rep.notes, singular);

    ModelParams capped = params;
    capped.Nmax += 1;
    const PullRun cap = pull_run(capped, j, rep.notes, singular);

    ModelParams refined = params;
    refined.n_radial += 1;
    refined.n_phi *= 2;
    const PullRun fine = pull_run(refined, j, rep.notes, singular);

    const PullRun* runs[] = {&base, &cap, &fine};
    MarginTracker mt;
    for (int r = 0; r < 3; ++r) {
        for (const PullThroughSample& s : runs[r]->rows) {
            rep.samples.push_back({static_cast<Real>(r), static_cast<Real>(s.mode),
                                   s.k_norm, s.weight, s.lhs_norm, s.rel_residual,
                                   s.allowance, s.identity_defect, s.ratio});
            if (r < 2) mt.require(1e-5 + s.allowance - s.rel_residual);
            mt.require(1e-5 - s.identity_defect);
        }
    }
    if (singular) mt.ok = false;

    // Occupation-cap refinement must not grow the quantified truncation term.
    mt.require(std::max(0.9 * base.allow_max, 1e-10) - cap.allow_max);

    // Ratio-bound stability under angular/radial refinement (factor 3).
    if (std::max(base.C, fine.C) > 1e-12) {
        mt.require(3.0 * base.C - fine.C);
        mt.require(3.0 * fine.C - base.C);
    }

    // Mode spread of the fitted ratio on this grid.
    Real rmin = std::numeric_limits<Real>::infinity(), rmax = 0.0;
    int nonzero = 0;
    for (const PullThroughSample& s : base.rows)
        if (s.ratio > 1e-12) {
            rmin = std::min(rmin, s.ratio);
            rmax = std::max(rmax, s.ratio);
            ++nonzero;
        }
    const Real spread = nonzero >= 2 ? rmax / rmin : 0.0;
    if (nonzero >= 2 && params.alpha > 0.0) mt.require(3.0 - spread);

    rep.fitted = {{"C", base.C},
                  {"C_cap", cap.C},
                  {"C_refined", fine.C},
                  {"rel_max", base.rel_max},
                  {"allowance_max", base.allow_max},
                  {"allowance_max_cap", cap.allow_max},
                  {"identity_defect_max", std::max(base.id_max, cap.id_max)},
                  {"mode_spread", spread}};
    rep.worst_margin = mt.value();
    rep.passed = mt.ok;
    return rep;
}

VerificationReport photon_number_scan(const std::vector<FlowRecord>& records,
                                      const ModelParams& params) {
    params.validate();
    if (records.size() < 3)
        throw InvalidParams("photon-number scan needs records from >= 3 scales");
    VerificationReport rep;
    rep.check = "photon_number";
    rep.grid_desc = describe(params);
    rep.columns = {"run", "j", "ln_inv_sigma", "Nf"};

    FlowOptions fo;
    fo.with_fd = false;
    fo.certify = false;

    auto collect = [&rep](const std::vector<FlowRecord>& recs, int run,
                          std::vector<Real>& xs, std::vector<Real>& ys) {
        for (const FlowRecord& r : recs) {
            const Real x = -std::log(r.sigma);
            xs.push_back(x);
            ys.push_back(r.Nf);
            rep.samples.push_back({static_cast<Real>(run), static_cast<Real>(r.j), x, r.Nf});
        }
    };

    std::vector<Real> x0, y0;
    collect(records, 0, x0, y0);
    const LineFit main_fit = fit_line(x0, y0);

    ModelParams half = params;
    half.P = 0.5 * params.P;
    const FlowResult half_flow = run_flow(half, fo);
    std::vector<Real> x1, y1;
    collect(half_flow.records, 1, x1, y1);
    const LineFit half_fit = fit_line(x1, y1);

    ModelParams zero = params;
    zero.P = Vec3::Zero();
    const FlowResult zero_flow = run_flow(zero, fo);
    std::vector<Real> x2, y2;
    collect(zero_flow.records, 2, x2, y2);
    const LineFit zero_fit = fit_line(x2, y2);

    const Real Pn = params.P.norm();
    Real max_nf = 0.0;
    for (const auto& row : rep.samples) max_nf = std::max(max_nf, row[3]);

    // Boundedness witness for a run: with equally spaced ln(1/sigma), log
    // growth keeps the per-scale increments constant, while a bounded Nf has
    // geometrically decaying ones.  On exact (noise-free) data this is the
    // consistent test; a least-squares slope t-test degenerates, because its
    // stderr measures only model misfit and stays a fixed multiple of the
    // slope at every depth for a saturating sequence.
    auto increments_decay = [](const std::vector<Real>& ys, Real& dmax, Real& dlast) {
        dmax = 0.0;
        dlast = 0.0;
        for (size_t i = 1; i < ys.size(); ++i) {
            const Real d = std::abs(ys[i] - ys[i - 1]);
            dmax = std::max(dmax, d);
            dlast = d;
        }
        return std::max(0.5 * dmax, 1e-10) - dlast;
    };

    // The field-quadratic term adds a P-independent bounded background to
    // every run; subtract the P = 0 run before testing the |P|^2 law so the
    // ratio compares the divergent parts and not the shared transient.
    const Real slope_net = main_fit.slope - zero_fit.slope;
    const Real slope_half_net = half_fit.slope - zero_fit.slope;

    MarginTracker mt;
    Real ratio = 0.0;
    Real dmax = 0.0, dlast = 0.0;
    if (max_nf <= 1e-12) {
        rep.notes.push_back("photon numbers at numerical zero on all runs");
        mt.require(1e-12 - max_nf);
    } else if (Pn <= 1e-12) {
        rep.notes.push_back("P = 0 configuration: growth predicates vacuous");
        mt.require(increments_decay(y0, dmax, dlast));
    } else {
        mt.require(main_fit.r2 - 0.9);
        if (slope_half_net > 1e-15) {
            ratio = slope_net / slope_half_net;
            mt.require(ratio - 2.0);
            mt.require(6.0 - ratio);
        } else {
            rep.notes.push_back("background-subtracted half-momentum slope at zero");
            mt.ok = false;
        }
        mt.require(increments_decay(y2, dmax, dlast));
    }

    const Real C_fit =
        (params.alpha > 0.0 && Pn > 1e-12) ? slope_net / (params.alpha * Pn * Pn) : 0.0;
    rep.fitted = {{"slope", main_fit.slope},
                  {"r2", main_fit.r2},
                  {"slope_half", half_fit.slope},
                  {"slope_net", slope_net},
                  {"slope_half_net", slope_half_net},
                  {"slope_ratio", ratio},
                  {"slope_zero", zero_fit.slope},
                  {"stderr_zero", zero_fit.slope_stderr},
                  {"zero_increment_max", dmax},
                  {"zero_increment_last", dlast},
                  {"C_fit", C_fit}};
    rep.worst_margin = mt.value();
    rep.passed = mt.ok;
    return rep;
}

VerificationReport holder_scan(const ModelParams& params, const std::vector<Real>& deltaP_list,
                               const std::vector<int>& scales) {
    params.validate();
    VerificationReport rep;
    rep.check = "holder_ladder";
    rep.grid_desc = describe(params);
    rep.columns = {"j", "dP", "dPhi", "dGradE"};
    const Real q = 0.25 - params.delta_rate;
    const Vec3 dir(1.0, 0.0, 0.0);

    const ModeGrid full = build_mode_grid(params);
    std::vector<Real> expo_phi, expo_grad, C_phi, C_grad;

    for (int j : scales) {
        if (j < 0 || j > params.J) {
            rep.notes.push_back(strf("scale %d out of range, skipped", j));
            continue;
        }
        const ScaleSpace sp = make_space(params, full, j);
        const SparseHermitian H = assemble_fiber_hamiltonian(params, sp.grid, sp.basis, j);
        const SpectralResult gs = ground_state(H, params.tol_eig, 616100, params.max_lanczos);
        const Vec3 g0 = gradient_feynman_hellmann(params, sp.grid, sp.basis, j, gs.vector);
        CVec Phi0;
        {
            const CoherentDisplacement cd =
                displacement_coefficients(params.alpha, sp.grid, g0, {0, j});
            const SpMat G = weyl_generator(cd, sp.basis);
            Phi0 = apply_weyl(G, gs.vector, 1e-12);
            fix_phase(Phi0, 0);
        }

        std::vector<Real> lx_phi, ly_phi, lx_grad, ly_grad;
        Real cj_phi = 0.0, cj_grad = 0.0;
        for (Real d : deltaP_list) {
            if (d <= 0.0) {
                rep.notes.push_back(strf("dP = %g skipped (not positive)", d));
                continue;
            }
            ModelParams shifted = params;
            shifted.P = params.P + d * dir;
            if (shifted.P.norm() >= kBall) {
                rep.notes.push_back(strf("dP = %g leaves the momentum ball, skipped", d));
                continue;
            }
            const SparseHermitian Hs = assemble_fiber_hamiltonian_at(
                shifted.P, params.alpha, params.tol_herm, sp.grid, sp.basis, {0, j});
            const SpectralResult gss =
                ground_state(Hs, params.tol_eig, 616200, params.max_lanczos);
            const Vec3 gs1 =
                gradient_feynman_hellmann(shifted, sp.grid, sp.basis, j, gss.vector);
            const CoherentDisplacement cd =
                displacement_coefficients(params.alpha, sp.grid, gs1, {0, j});
            const SpMat G = weyl_generator(cd, sp.basis);
            CVec Phi1 = apply_weyl(G, gss.vector, 1e-12);
            fix_phase(Phi1, 0);

            const Real dphi = (Phi1 - Phi0).norm();
            const Real dgrad = (gs1 - g0).norm();
            rep.samples.push_back({static_cast<Real>(j), d, dphi, dgrad});
            if (dphi > 1e-13) {
                lx_phi.push_back(std::log(d));
                ly_phi.push_back(std::log(dphi));
                cj_phi = std::max(cj_phi, dphi / std::pow(d, q));
            }
            if (dgrad > 1e-13) {
                lx_grad.push_back(std::log(d));
                ly_grad.push_back(std::log(dgrad));
                cj_grad = std::max(cj_grad, dgrad / std::pow(d, q));
            }
        }
        if (lx_phi.size() >= 2) {
            expo_phi.push_back(fit_line(lx_phi, ly_phi).slope);
            C_phi.push_back(cj_phi);
        } else {
            rep.notes.push_back(strf("scale %d: state differences at numerical zero", j));
        }
        if (lx_grad.size() >= 2) {
            expo_grad.push_back(fit_line(lx_grad, ly_grad).slope);
            C_grad.push_back(cj_grad);
        } else {
            rep.notes.push_back(strf("scale %d: gradient differences at numerical zero", j));
        }
    }

    MarginTracker mt;
    auto family = [&](const std::vector<Real>& expo, const std::vector<Real>& C,
                      Real& expo_min, Real& c_ratio) {
        expo_min = 0.0;
        c_ratio = 1.0;
        if (!expo.empty()) {
            expo_min = *std::min_element(expo.begin(), expo.end());
            mt.require(expo_min - q + 1e-9);
        }
        if (C.size() >= 2) {
            const Real cmax = *std::max_element(C.begin(), C.end());
            const Real cmin = *std::min_element(C.begin(), C.end());
            if (cmin > 0.0) {
                c_ratio = cmax / cmin;
                mt.require(2.0 - c_ratio);
            }
        }
    };
    Real expo_phi_min, ratio_phi, expo_grad_min, ratio_grad;
    family(expo_phi, C_phi, expo_phi_min, ratio_phi);
    family(expo_grad, C_grad, expo_grad_min, ratio_grad);
    if (rep.samples.empty()) {
        rep.notes.push_back("no admissible ladder points");
        mt.ok = false;
    }

    rep.fitted = {{"q_target", q},
                  {"exponent_phi_min", expo_phi_min},
                  {"exponent_grad_min", expo_grad_min},
                  {"C_phi_ratio", ratio_phi},
                  {"C_grad_ratio", ratio_grad}};
    rep.worst_margin = mt.value();
    rep.passed = mt.ok;
    return rep;
}

VerificationReport gradient_bounds_scan(const std::vector<FlowRecord>& records,
                                        const ModelParams& params, int threads) {
    params.validate();
    VerificationReport rep;
    rep.check = "gradient_bounds";
    rep.grid_desc = describe(params);
    rep.columns = {"sample", "j", "P_norm", "grad_norm", "deviation", "C"};

    const ModeGrid full = build_mode_grid(params);
    std::vector<ScaleSpace> spaces;
    for (int j = 1; j <= params.J; ++j) spaces.push_back(make_space(params, full, j));

    std::vector<Vec3> Ps = sample_ball_momenta(5, 0.32, 778899);
    Ps.push_back(Vec3::Zero());

    struct Task {
        int sample;
        int j;  // scale index (1-based over spaces[j-1])
    };
    std::vector<Task> tasks;
    for (int s = 0; s < static_cast<int>(Ps.size()); ++s)
        for (int j = 1; j <= params.J; ++j) tasks.push_back({s, j});
    std::vector<Vec3> grads(tasks.size(), Vec3::Zero());
    parallel_for(static_cast<int>(tasks.size()), threads, [&](int t) {
        const Task& tk = tasks[static_cast<size_t>(t)];
        const ScaleSpace& sp = spaces[static_cast<size_t>(tk.j - 1)];
        ModelParams pp = params;
        pp.P = Ps[static_cast<size_t>(tk.sample)];
        const SparseHermitian H =
            assemble_fiber_hamiltonian(pp, sp.grid, sp.basis, tk.j);
        const SpectralResult gs =
            ground_state(H, params.tol_eig, 515000 + static_cast<std::uint64_t>(t),
                         params.max_lanczos);
        grads[static_cast<size_t>(t)] =
            gradient_feynman_hellmann(pp, sp.grid, sp.basis, tk.j, gs.vector);
    });

    const bool coupled = params.alpha > 0.0;
    std::vector<Real> Cj(static_cast<size_t>(params.J + 1), 0.0);
    MarginTracker mt;
    Real grad_at_zero = 0.0, grad_max = 0.0;
    Real C_fit = 0.0;

    auto add_row = [&](int sample, int j, const Vec3& P, const Vec3& g) {
        const Real dev = (P - g).norm();
        const Real C = coupled ? dev / params.alpha : 0.0;
        Cj[static_cast<size_t>(j)] = std::max(Cj[static_cast<size_t>(j)], C);
        C_fit = std::max(C_fit, C);
        grad_max = std::max(grad_max, g.norm());
        if (P.norm() <= 1e-12) grad_at_zero = std::max(grad_at_zero, g.norm());
        if (!coupled) mt.require(1e-9 - dev);
        rep.samples.push_back({static_cast<Real>(sample), static_cast<Real>(j), P.norm(),
                               g.norm(), dev, C});
    };

    // Main-run rows first (sample = -1), then the sampled momenta in order.
    for (const FlowRecord& r : records)
        if (r.j >= 1) add_row(-1, r.j, params.P, r.gradE);
    for (size_t t = 0; t < tasks.size(); ++t)
        add_row(tasks[t].sample, tasks[t].j, Ps[static_cast<size_t>(tasks[t].sample)],
                grads[t]);

    // Per-scale uniformity: once the window is at least two shells deep,
    // deepening by one scale (sigma -> eps * sigma) moves C by < 25%.
    if (coupled)
        for (int j = 2; j < params.J; ++j) {
            const Real a = Cj[static_cast<size_t>(j)], b = Cj[static_cast<size_t>(j + 1)];
            mt.require(0.25 * std::max(a, 1e-12) - std::abs(b - a));
        }

    // Gradient window outside the fitted ball.
    const Real r_alpha = params.nu_min + C_fit * params.alpha;
    Real grad_min_outside = std::numeric_limits<Real>::infinity();
    for (const auto& row : rep.samples) {
        const Real Pn = row[2], gn = row[3];
        mt.require(params.nu_max - gn);
        if (Pn >= r_alpha) {
            grad_min_outside = std::min(grad_min_outside, gn);
            mt.require(gn - params.nu_min);
        }
    }
    mt.require(1e-8 - grad_at_zero);
    if (!std::isfinite(grad_min_outside)) grad_min_outside = 0.0;

    rep.fitted = {{"C_fit", C_fit},
                  {"r_alpha", r_alpha},
                  {"C_final", Cj[static_cast<size_t>(params.J)]},
                  {"grad_min_outside", grad_min_outside},
                  {"grad_max", grad_max},
                  {"grad_at_zero", grad_at_zero}};
    rep.worst_margin = mt.value();
    rep.passed = mt.ok;
    return rep;
}

MarginalSample marginal_decay_at(const ModelParams& params, const FlowResult& flow, int j) {
    if (j < 0 || j + 1 >= static_cast<int>(flow.states.size()))
        throw WindowOutOfRange("marginal check needs scales j and j+1 in the flow");
    const ScaleState& cur = flow.states[static_cast<size_t>(j)];
    const ScaleState& nxt = flow.states[static_cast<size_t>(j + 1)];

    MarginalSample out;
    out.j = j;
    out.sigma_next = params.sigma(j + 1);

    const ModeGrid grid_next = shell_prefix(flow.grid, j + 1);
    const CVec Phi_ext = embed(cur.basis, nxt.basis, cur.Phi);
    const IntermediatePieces ip =
        intermediate_operators(params, grid_next, nxt.basis, j, cur.gradE, Phi_ext, {});

    // Vacuum normalization of the creation half, matrix vs direct quadrature.
    {
        CVec vac = CVec::Zero(nxt.basis.dim());
        vac[0] = Complex(1.0, 0.0);
        Real zm = 0.0;
        for (int i = 0; i < 3; ++i) zm += CVec(ip.L_plus[i] * vac).squaredNorm();
        out.Z_matrix = zm;

        Real zd = 0.0;
        const auto [s_begin, s_end] = window_mode_range(grid_next, {j, j + 1});
        for (int m = s_begin; m < s_end; ++m) {
            const Mode& mode = grid_next.modes[static_cast<size_t>(m)];
            const Real kn = mode.k.norm();
            const Real delta = delta_factor(mode.k, cur.gradE);
            Complex proj(0.0, 0.0);
            for (int i = 0; i < 3; ++i) proj += cur.gradE[i] * mode.eps[i];
            for (int i = 0; i < 3; ++i) {
                const Complex ci = Complex(mode.k[i], 0.0) * proj /
                                       (std::pow(kn, 1.5) * delta) +
                                   mode.eps[i] / std::sqrt(kn);
                zd += mode.weight * std::norm(ci);
            }
        }
        out.Z_direct = params.alpha * zd;
    }

    // Resolvent quadratic form of the scale-j canonical pieces on basis_j.
    const Complex z(cur.E, params.mu * out.sigma_next);
    {
        const ModeGrid grid_j = shell_prefix(flow.grid, j);
        const CanonicalPieces cp =
            canonical_form(params, grid_j, cur.basis, {0, j}, cur.gradE, cur.Phi, {});
        Real qmax = 0.0;
        for (int i = 0; i < 3; ++i) {
            const CVec gphi = cp.Gamma[i].m * cur.Phi;
            if (gphi.norm() <= 1e-14) continue;
            const CVec sol = shifted_solve(cp.Kprime, z, gphi, params.tol_solve);
            qmax = std::max(qmax, std::abs(gphi.dot(sol)));
        }
        out.quad_max = qmax;
    }

    if (nxt.basis.dim() > params.dense_cutoff) return out;  // evaluated stays false

    // marginal = || |K-z|^{-1/2} X |K-z|^{-1/2} Phi ||, X = sum_i Gamma_i (L+_i + I_i).
    Eigen::SelfAdjointEigenSolver<CMat> es{CMat(ip.K_ext.m)};
    if (es.info() != Eigen::Success)
        throw NoConvergence("dense eigendecomposition for the marginal check");
    const CMat& U = es.eigenvectors();
    const RVec lam = es.eigenvalues();
    auto half_inv = [&](const CVec& v) {
        CVec w = U.adjoint() * v;
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w[i] /= std::sqrt(std::abs(Complex(lam[i], 0.0) - z));
        return CVec(U * w);
    };
    const CVec sv = half_inv(Phi_ext);
    CVec xv = CVec::Zero(nxt.basis.dim());
    for (int i = 0; i < 3; ++i)
        xv += ip.Gamma_ext[i].m *
              CVec(ip.L_plus[i] * sv + Complex(ip.Ivec[i], 0.0) * sv);
    out.marginal = half_inv(xv).norm();
    out.evaluated = true;
    return out;
}

VerificationReport marginal_decay_check(const ModelParams& params, const FlowResult& flow) {
    params.validate();
    VerificationReport rep;
    rep.check = "marginal_decay";
    rep.grid_desc = describe(params);
    rep.columns = {"j", "sigma_next", "marginal", "quad_max", "Z_matrix", "Z_direct",
                   "evaluated"};

    MarginTracker mt;
    std::vector<Real> xs, ys;
    Real R0 = 0.0;
    const int top = static_cast<int>(flow.states.size()) - 1;
    for (int j = 0; j < top; ++j) {
        const MarginalSample s = marginal_decay_at(params, flow, j);
        rep.samples.push_back({static_cast<Real>(s.j), s.sigma_next, s.marginal, s.quad_max,
                               s.Z_matrix, s.Z_direct, s.evaluated ? 1.0 : 0.0});
        mt.require(1e-10 * std::max(1.0, std::abs(s.Z_direct)) -
                   std::abs(s.Z_matrix - s.Z_direct));
        if (!s.evaluated)
            rep.notes.push_back(
                strf("scale %d skipped: dimension above dense cutoff", s.j));
        // The slope fit starts at j = 1: the scale-0 assembly has an empty
        // displacement window, so its Gamma is the bare field momentum and the
        // near-orthogonality against the displaced state that drives the decay
        // only engages after the first dressing step.  The measured sequence
        // peaks at j = 1 and then settles onto the predicted rate.
        if (s.evaluated && s.j >= 1 && s.marginal > 1e-14) {
            xs.push_back(static_cast<Real>(s.j));
            ys.push_back(std::log(s.marginal));
        }
        R0 = std::max(R0, s.quad_max * params.alpha *
                              std::pow(params.epsilon, j * params.delta_rate));
    }

    const Real target = 0.5 * (1.0 - params.delta_rate) * std::log(params.epsilon);
    LineFit fit;
    if (xs.size() >= 3) {
        fit = fit_line(xs, ys);
        // The predicted scaling is an upper bound, so the fitted log-slope
        // must reach at least 70% of the target decay rate; decaying faster
        // is consistent (the vector form also rides the smallness of Gamma
        // applied to the nearly coherent state).
        mt.require(0.7 * target - fit.slope);
    } else {
        rep.notes.push_back(
            "fewer than 3 marginal norms past the first dressing step "
            "(needs J >= 4 with the scales inside the dense cutoff): slope fit skipped");
    }

    rep.fitted = {{"slope", fit.slope},
                  {"target", target},
                  {"slope_r2", fit.r2},
                  {"R0_fit", R0}};
    rep.worst_margin = mt.value();
    rep.passed = mt.ok;
    return rep;
}

VerificationReport ladder_check(const FlowResult& flow, const ModelParams& params) {
    VerificationReport rep;
    rep.check = "convergence_ladder";
    rep.grid_desc = describe(params);
    rep.columns = {"j", "gap_over_sigma", "dPhi", "dPsi", "trunc_leak"};

    MarginTracker mt;
    std::vector<Real> xs, ys, xs_psi, ys_psi;
    Real leak_max = 0.0, gap_min = std::numeric_limits<Real>::infinity();
    for (const FlowRecord& r : flow.records) {
        leak_max = std::max(leak_max, r.trunc_leak);
        if (r.j < 1) continue;
        rep.samples.push_back({static_cast<Real>(r.j), r.gap_over_sigma, r.dPhi, r.dPsi,
                               r.trunc_leak});
        gap_min = std::min(gap_min, r.gap_over_sigma);
        mt.require(r.gap_over_sigma - params.rho_minus);
        if (r.dPhi > 1e-14) {
            xs.push_back(static_cast<Real>(r.j));
            ys.push_back(std::log(r.dPhi));
        }
        if (r.dPsi > 1e-14) {
            xs_psi.push_back(static_cast<Real>(r.j));
            ys_psi.push_back(std::log(r.dPsi));
        }
    }

    const Real bound = -0.3 * std::log(1.0 / params.epsilon);
    LineFit fit, fit_psi;
    if (xs.size() >= 2) {
        fit = fit_line(xs, ys);
        mt.require(bound - fit.slope);
    } else {
        rep.notes.push_back("fewer than 2 nonzero dPhi increments: slope check skipped");
    }
    if (xs_psi.size() >= 2) fit_psi = fit_line(xs_psi, ys_psi);

    rep.fitted = {{"gap_ratio_min", std::isfinite(gap_min) ? gap_min : 0.0},
                  {"dphi_slope", fit.slope},
                  {"slope_bound", bound},
                  {"dpsi_slope", fit_psi.slope},
                  {"trunc_leak_max", leak_max}};
    rep.worst_margin = mt.value();
    rep.passed = mt.ok;
    return rep;
}

}  // namespace irflow
