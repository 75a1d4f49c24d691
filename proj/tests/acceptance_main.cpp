// Acceptance gate: one line per criterion, tolerances pinned in code.
// Exit code 0 iff every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irflow/cli.hpp"
#include "irflow/config.hpp"
#include "irflow/dressing.hpp"
#include "irflow/errors.hpp"
#include "irflow/flow.hpp"
#include "irflow/fock.hpp"
#include "irflow/grid.hpp"
#include "irflow/operators.hpp"
#include "irflow/params.hpp"
#include "irflow/rng.hpp"
#include "irflow/spectral.hpp"
#include "irflow/verify.hpp"

using namespace irflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string g17(Real x) {
    char b[40];
    std::snprintf(b, sizeof(b), "%.6g", x);
    return std::string(b);
}

Mode pmode(const Vec3& k, Real w, int which, int shell) {
    const auto [e1, e2] = polarization_basis(k);
    Mode m;
    m.k = k;
    m.weight = w;
    m.lambda = which == 0 ? +1 : -1;
    m.eps = which == 0 ? e1 : e2;
    m.shell = shell;
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// 1. Free theory: every flow observable exact to 1e-12.
Outcome free_theory_exactness() {
    const Real tol = 1e-12;
    ModelParams p;
    p.alpha = 0.0;
    p.J = 4;
    const FlowResult flow = run_flow(p, {});
    const Real e_free = 0.5 * p.P.squaredNorm();
    Real worst = 0.0;
    for (const FlowRecord& r : flow.records) {
        worst = std::max(worst, std::abs(r.E - e_free));
        worst = std::max(worst, (r.gradE - p.P).norm());
        worst = std::max(worst, r.Nf);
        if (r.j >= 1) {
            worst = std::max(worst, r.dPsi);
            worst = std::max(worst, r.dPhi);
        }
    }
    return {worst <= tol, "max defect " + g17(worst) + " (tol " + g17(tol) + ")"};
}

// 2. Iterative spectral kernels against a dense oracle, dim <= 500, < 30 s.
Outcome dense_oracle_agreement() {
    const Real tol = 1e-8;
    const auto t0 = std::chrono::steady_clock::now();
    ModelParams p;
    p.J = 2;
    p.alpha = 0.02;
    p.Nmax = 3;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    if (b.dim() > 500) return {false, "oracle instance exceeds dense cutoff"};
    const SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, 2);
    Eigen::SelfAdjointEigenSolver<CMat> es{CMat(H.m)};

    Real worst = 0.0;
    const SpectralResult gs = ground_state(H, p.tol_eig);
    worst = std::max(worst, std::abs(gs.energy - es.eigenvalues()[0]));
    const CVec v0 = es.eigenvectors().col(0);
    worst = std::max(worst, std::abs(std::abs(v0.dot(gs.vector)) - 1.0));

    const std::vector<Real> lows = low_spectrum(H, 4, p.tol_eig);
    for (size_t i = 0; i < lows.size(); ++i)
        worst = std::max(worst,
                         std::abs(lows[i] - es.eigenvalues()[static_cast<Eigen::Index>(i)]));

    ContourSpec spec;
    spec.center = Complex(es.eigenvalues()[0], 0.0);
    spec.radius = 0.25 * (es.eigenvalues()[1] - es.eigenvalues()[0]);
    spec.n_quad = 32;
    CVec u = seeded_unit(b.dim(), 21);
    u[0] += Complex(1.0, 0.0);
    u.normalize();
    const CVec dense_proj = v0 * v0.dot(u);
    const CVec proj = contour_project(H, spec, u, p.tol_solve);
    worst = std::max(worst, (proj - dense_proj).norm());

    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    const bool in_time = dt.count() < 30.0;
    return {worst <= tol && in_time, "max deviation " + g17(worst) + " (tol " + g17(tol) +
                                         "), dim " + std::to_string(b.dim()) + ", " +
                                         g17(dt.count()) + " s"};
}

// 3. Dressing is unitary and spectrum-preserving to 1e-8.
Outcome unitary_dressing() {
    const Real tol = 1e-8;
    ModelParams p;
    p.J = 1;
    p.alpha = 0.02;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    const SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, 1);
    const SpectralResult gs = ground_state(H, p.tol_eig);
    const Vec3 gradE = gradient_feynman_hellmann(p, g, b, 1, gs.vector);
    const SpMat G = weyl_generator(displacement_coefficients(p.alpha, g, gradE, {0, 1}), b);

    Real worst = 0.0;
    for (std::uint64_t seed : {101u, 102u, 103u}) {
        const CVec v = seeded_unit(b.dim(), seed);
        const CVec round = apply_weyl(SpMat(-G), apply_weyl(G, v, 1e-12), 1e-12);
        worst = std::max(worst, (round - v).norm());
    }

    // Spectrum preservation: conjugate H by exp(G) through the series pipeline
    // and compare sorted spectra.  (Agreement of the assembled canonical form
    // with this conjugate is criterion 4, on its dedicated gentle instances;
    // here the exact conjugation itself must be spectrum-preserving.)
    const SparseHermitian conj = transform_hamiltonian(H, G, 1e-9, 500);
    Eigen::SelfAdjointEigenSolver<CMat> eh{CMat(H.m)}, ek{CMat(conj.m)};
    worst = std::max(worst, (eh.eigenvalues() - ek.eigenvalues()).cwiseAbs().maxCoeff());
    return {worst <= tol, "max defect " + g17(worst) + " (tol " + g17(tol) + ")"};
}

// 4. Canonical certification and the scale-splitting identity on 2- and
//    3-mode instances, both to 1e-8.
Outcome canonical_and_splitting() {
    const Real tol = 1e-8;
    Real worst = 0.0;

    {  // 2-mode canonical certification
        ModelParams p;
        p.alpha = 0.02;
        const ModeGrid g = make_custom_grid({pmode(Vec3(0, 0, 0.6), 0.03, 0, 0),
                                             pmode(Vec3(0.5, 0.2, 0.1), 0.05, 1, 0)});
        const FockBasis b = build_fock_basis(g, 3, 1000);
        const SparseHermitian H =
            assemble_fiber_hamiltonian_at(p.P, p.alpha, p.tol_herm, g, b, {0, 1});
        const SpectralResult gs = ground_state(H, p.tol_eig);
        const Vec3 gradE = gradient_feynman_hellmann(p, g, b, 1, gs.vector);
        CVec phi = apply_weyl(
            weyl_generator(displacement_coefficients(p.alpha, g, gradE, {0, 1}), b),
            gs.vector, 1e-12);
        fix_phase(phi, 0);
        CertifyOptions copt;
        copt.H = &H;
        copt.tol = tol;
        const CanonicalPieces cp = canonical_form(p, g, b, {0, 1}, gradE, phi, copt);
        worst = std::max(worst, cp.certification_residual);
    }

    {  // 3-mode splitting identity: one dressed shell, two incoming modes
        ModelParams p;
        p.alpha = 0.02;
        const ModeGrid g1 = make_custom_grid({pmode(Vec3(0, 0, 0.6), 0.03, 0, 0)});
        const ModeGrid g2 = make_custom_grid({pmode(Vec3(0, 0, 0.6), 0.03, 0, 0),
                                              pmode(Vec3(0.25, 0.1, 0.05), 0.02, 0, 1),
                                              pmode(Vec3(-0.1, 0.2, 0.1), 0.02, 1, 1)});
        const FockBasis b1 = build_fock_basis(g1, 3, 1000);
        const FockBasis b2 = build_fock_basis(g2, 3, 1000);
        const SparseHermitian H1 =
            assemble_fiber_hamiltonian_at(p.P, p.alpha, p.tol_herm, g1, b1, {0, 1});
        const SpectralResult gs = ground_state(H1, p.tol_eig);
        const Vec3 gradE = gradient_feynman_hellmann(p, g1, b1, 1, gs.vector);
        CVec phi = apply_weyl(
            weyl_generator(displacement_coefficients(p.alpha, g1, gradE, {0, 1}), b1),
            gs.vector, 1e-12);
        fix_phase(phi, 0);
        const CVec phi_ext = embed(b1, b2, phi);
        const IntermediatePieces ip = intermediate_operators(p, g2, b2, 1, gradE, phi_ext, {});
        CMat defect = CMat(ip.Khat.m) - CMat(ip.K_ext.m) - CMat(ip.DeltaK.m);
        const Real shift = ip.Ehat - ip.Escript_ext;
        for (Eigen::Index i = 0; i < b2.dim(); ++i) defect(i, i) -= Complex(shift, 0.0);
        worst = std::max(worst, defect.cwiseAbs().maxCoeff());
    }
    return {worst <= tol, "max residual " + g17(worst) + " (tol " + g17(tol) + ")"};
}

// 5. Feynman-Hellmann vs central differences at h = 1e-3 for alpha <= 0.01.
Outcome gradient_cross_check() {
    const Real tol = 1e-4;
    const Real h = 1e-3;
    Real worst = 0.0;
    for (Real alpha : {0.002, 0.005, 0.01}) {
        ModelParams p;
        p.alpha = alpha;
        p.J = 2;
        const ModeGrid full = build_mode_grid(p);
        for (int j = 1; j <= p.J; ++j) {
            const ModeGrid g = shell_prefix(full, j);
            const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
            const SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, j);
            const SpectralResult gs = ground_state(H, p.tol_eig);
            const Vec3 fh = gradient_feynman_hellmann(p, g, b, j, gs.vector);
            const Vec3 fd = gradient_finite_difference(p, g, b, j, h, 7);
            worst = std::max(worst, (fh - fd).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= tol, "max |FH - FD| " + g17(worst) + " (tol " + g17(tol) + ")"};
}

// 6. Energy inequality E(P) - E(P-k) <= C_alpha |k| over >= 200 samples, with
//    C_alpha < 1 decreasing toward 1/3 as alpha -> 0.
Outcome energy_inequality() {
    std::vector<Real> Cs;
    size_t n_rows = 0;
    bool all_pass = true;
    std::string note;
    for (Real alpha : {0.01, 0.005, 0.001}) {
        ModelParams p;
        p.alpha = alpha;
        p.J = 4;
        const auto Ps = sample_ball_momenta(5, 0.32, 2024);
        const auto ks = sample_photon_momenta(p, 8, 2025);
        const VerificationReport rep = verify_I4(p, ks, Ps, 4);
        all_pass = all_pass && rep.passed;
        n_rows = std::max(n_rows, rep.samples.size());
        for (const auto& [name, value] : rep.fitted)
            if (name == "C_alpha") Cs.push_back(value);
    }
    bool shape = Cs.size() == 3;
    if (shape)
        shape = Cs[0] < 1.0 && Cs[0] >= Cs[1] && Cs[1] >= Cs[2] &&
                Cs[2] >= 1.0 / 3.0 - 1e-12;
    const bool enough = n_rows >= 200;
    std::string detail = "samples " + std::to_string(n_rows) + ", C_alpha = {";
    for (size_t i = 0; i < Cs.size(); ++i)
        detail += (i ? ", " : "") + g17(Cs[i]);
    detail += "} -> 1/3";
    return {all_pass && shape && enough, detail};
}

// 7. Pull-through identity: relative residual <= 1e-5 + quantified truncation
//    allowance at Nmax >= 3, with the per-mode ratio stable within x3 under
//    grid refinement.
Outcome pull_through() {
    ModelParams p;
    p.J = 2;
    p.Nmax = 3;
    const VerificationReport rep = pull_through_scan(p, 1);
    Real rel = -1, spread = -1;
    for (const auto& [name, value] : rep.fitted) {
        if (name == "rel_max") rel = value;
        if (name == "mode_spread") spread = value;
    }
    return {rep.passed,
            "max residual " + g17(rel) + ", refinement spread x" + g17(spread) +
                (rep.passed ? "" : "; see report notes")};
}

// 8. Photon number grows like alpha |P|^2 ln(1/sigma): R^2 >= 0.9 at P != 0
//    over >= 4 scales, slope consistent with zero at P = 0.
Outcome photon_number_law() {
    ModelParams p;
    p.J = 4;
    const FlowResult flow = run_flow(p, {});
    const VerificationReport rep = photon_number_scan(flow.records, p);
    Real r2 = -1;
    for (const auto& [name, value] : rep.fitted)
        if (name == "r2") r2 = value;
    return {rep.passed, "R^2 " + g17(r2) + " (threshold 0.9)"};
}

// 9. Convergence ladder: dPhi log-slope <= -0.3 ln(1/epsilon) and every gap
//    ratio above the calibrated floor.
Outcome convergence_ladder() {
    ModelParams p;
    p.J = 5;
    // Nmax = 2 loses the dressed branch at scale 5: two softest-shell photons
    // cost less than the A^2 self-energy their cap states forfeit.  One more
    // occupation level keeps the boundary artifacts above the physical gap
    // through the whole ladder.
    p.Nmax = 3;
    FlowOptions probe;
    probe.with_fd = false;
    probe.certify = false;
    const ModelParams q = calibrate(p, probe);
    const FlowResult flow = run_flow(q, {});
    const VerificationReport rep = ladder_check(flow, q);
    Real slope = 1, bound = 0, ratio = -1;
    for (const auto& [name, value] : rep.fitted) {
        if (name == "dphi_slope") slope = value;
        if (name == "slope_bound") bound = value;
        if (name == "gap_ratio_min") ratio = value;
    }
    return {rep.passed, "dPhi slope " + g17(slope) + " (bound " + g17(bound) +
                            "), min gap ratio " + g17(ratio) + " (floor " +
                            g17(q.rho_minus) + ")"};
}

// 10. Same configuration and seed give byte-identical outputs.
Outcome determinism() {
    const std::string text =
        "alpha = 0.005\nJ = 3\n[run]\nlabel = acc\nseed = 512\n";
    const fs::path base = fs::temp_directory_path() / "irflow_acceptance";
    fs::remove_all(base);
    RunConfig a = parse_config_text(text);
    a.out_dir = (base / "a").string();
    RunConfig b = parse_config_text(text);
    b.out_dir = (base / "b").string();
    const int ra = execute("flow", a);
    const int rb = execute("flow", b);
    const bool same_csv = slurp(base / "a" / "flow.csv") == slurp(base / "b" / "flow.csv");
    const bool same_sum =
        slurp(base / "a" / "summary.json") == slurp(base / "b" / "summary.json");
    fs::remove_all(base);
    return {ra == 0 && rb == 0 && same_csv && same_sum,
            same_csv && same_sum ? "flow.csv and summary.json byte-identical"
                                 : "outputs differ between identical runs"};
}

// 11. The built-in selfcheck battery passes in under five minutes.
Outcome selfcheck_battery() {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.out_dir = (fs::temp_directory_path() / "irflow_acceptance_selfcheck").string();
    fs::remove_all(cfg.out_dir);
    const int rc = execute("selfcheck", cfg);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    fs::remove_all(cfg.out_dir);
    return {rc == 0 && dt.count() < 300.0,
            "exit " + std::to_string(rc) + ", " + g17(dt.count()) + " s (limit 300)"};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> fn;
    };
    const std::vector<Criterion> criteria = {
        {"free_theory_exactness", free_theory_exactness},
        {"dense_oracle_agreement", dense_oracle_agreement},
        {"unitary_dressing", unitary_dressing},
        {"canonical_and_splitting", canonical_and_splitting},
        {"gradient_cross_check", gradient_cross_check},
        {"energy_inequality", energy_inequality},
        {"pull_through", pull_through},
        {"photon_number_law", photon_number_law},
        {"convergence_ladder", convergence_ladder},
        {"determinism", determinism},
        {"selfcheck_battery", selfcheck_battery},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        Outcome out;
        try {
            out = c.fn();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        if (!out.pass) ++failures;
        std::cout << (out.pass ? "[PASS] " : "[FAIL] ") << c.name << ": " << out.detail
                  << std::endl;
    }
    std::cout << "acceptance: " << (criteria.size() - static_cast<size_t>(failures)) << "/"
              << criteria.size() << " criteria passed" << std::endl;
    return failures == 0 ? 0 : 1;
}
