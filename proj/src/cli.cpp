#include "irflow/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "irflow/dressing.hpp"
#include "irflow/errors.hpp"
#include "irflow/fock.hpp"
#include "irflow/grid.hpp"
#include "irflow/operators.hpp"
#include "irflow/rng.hpp"
#include "irflow/spectral.hpp"

namespace irflow {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// Local I/O failure marker: mapped to the configuration-error exit code (an
// unwritable out_dir is an environment problem, not a numerical one).
struct IoError final : Error {
    explicit IoError(const std::string& what) : Error("i/o error: " + what) {}
};

std::string fmt17(Real x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
}

ojson jreal(Real x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

ojson jvec3(const Vec3& v) { return ojson::array({jreal(v[0]), jreal(v[1]), jreal(v[2])}); }

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoError("short write to " + path.string());
}

std::string read_file_or_empty(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return {};
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::string provenance_line(std::uint64_t hash) {
    return std::string("# ") + kArtifactVersion + " config_hash=" + hash_hex(hash) + "\n";
}

}  // namespace

std::string flow_csv_text(const FlowResult& flow, std::uint64_t config_hash) {
    std::string out = provenance_line(config_hash);
    out +=
        "j,sigma,E,gradE_x,gradE_y,gradE_z,gradE_fd_x,gradE_fd_y,gradE_fd_z,gap,"
        "gap_over_sigma,Nf,dPsi,dPhi,dGradE,gamma_orth,contraction,trunc_leak\n";
    for (const FlowRecord& r : flow.records) {
        out += std::to_string(r.j);
        const Real cols[] = {r.sigma,       r.E,           r.gradE[0],    r.gradE[1],
                             r.gradE[2],    r.gradE_fd[0], r.gradE_fd[1], r.gradE_fd[2],
                             r.gap,         r.gap_over_sigma, r.Nf,       r.dPsi,
                             r.dPhi,        r.dGradE,      r.gamma_orth,  r.contraction,
                             r.trunc_leak};
        for (Real c : cols) {
            out += ',';
            out += fmt17(c);
        }
        out += '\n';
    }
    return out;
}

std::string report_json_text(const VerificationReport& rep, std::uint64_t config_hash) {
    ojson j;
    j["artifact"] = kArtifactVersion;
    j["config_hash"] = hash_hex(config_hash);
    j["check"] = rep.check;
    j["grid"] = rep.grid_desc;
    j["passed"] = rep.passed;
    j["worst_margin"] = jreal(rep.worst_margin);
    ojson fitted = ojson::object();
    for (const auto& [name, value] : rep.fitted) fitted[name] = jreal(value);
    j["fitted"] = fitted;
    j["columns"] = rep.columns;
    ojson rows = ojson::array();
    for (const auto& row : rep.samples) {
        ojson r = ojson::array();
        for (Real v : row) r.push_back(jreal(v));
        rows.push_back(r);
    }
    j["samples"] = rows;
    j["notes"] = rep.notes;
    return j.dump(2) + "\n";
}

namespace {

ojson model_echo(const ModelParams& m) {
    ojson j;
    j["alpha"] = jreal(m.alpha);
    j["Lambda"] = jreal(m.Lambda);
    j["P"] = jvec3(m.P);
    j["epsilon"] = jreal(m.epsilon);
    j["J"] = m.J;
    j["grid"] = ojson::array({m.n_radial, m.n_theta, m.n_phi});
    j["Nmax"] = m.Nmax;
    j["mu"] = jreal(m.mu);
    j["rho_minus"] = jreal(m.rho_minus);
    j["rho_plus"] = jreal(m.rho_plus);
    j["strategy"] = to_string(m.strategy);
    return j;
}

ojson flow_summary(const FlowResult& flow) {
    ojson j;
    j["scales"] = flow.records.size();
    const FlowRecord& last = flow.records.back();
    j["E_final"] = jreal(last.E);
    j["gradE_final"] = jvec3(last.gradE);
    j["Nf_final"] = jreal(last.Nf);
    j["rho_minus_observed"] = jreal(flow.rho_minus_observed);
    Real cres = 0.0;
    for (Real r : flow.canonical_residuals)
        if (std::isfinite(r)) cres = std::max(cres, r);
    j["canonical_residual_max"] = jreal(cres);
    Real leak = 0.0;
    for (const FlowRecord& r : flow.records) leak = std::max(leak, r.trunc_leak);
    j["trunc_leak_max"] = jreal(leak);
    ojson events = ojson::array();
    for (const ScaleEvent& e : flow.events)
        events.push_back(ojson{{"j", e.j}, {"what", e.what}});
    j["events"] = events;
    return j;
}

FlowOptions options_from(const RunConfig& cfg) {
    FlowOptions fo;
    fo.threads = cfg.threads;
    fo.seed = cfg.seed;
    fo.fd_h = cfg.fd_h;
    fo.with_fd = cfg.with_fd;
    fo.certify = cfg.certify;
    return fo;
}

struct Prepared {
    ModelParams params;
    bool calibrated = false;
};

Prepared prepare_params(const RunConfig& cfg) {
    Prepared p;
    p.params = cfg.model;
    if (cfg.calibrate) {
        FlowOptions probe = options_from(cfg);
        probe.with_fd = false;
        probe.certify = false;
        p.params = calibrate(p.params, probe);
        p.calibrated = true;
    }
    return p;
}

int run_flow_command(const RunConfig& cfg, std::uint64_t hash) {
    const auto t0 = std::chrono::steady_clock::now();
    const Prepared prep = prepare_params(cfg);
    const FlowResult flow = run_flow(prep.params, options_from(cfg));
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;

    const fs::path out(cfg.out_dir);
    write_file(out / "flow.csv", flow_csv_text(flow, hash));

    ojson s;
    s["artifact"] = kArtifactVersion;
    s["command"] = "flow";
    s["label"] = cfg.label;
    s["config_hash"] = hash_hex(hash);
    s["seed"] = cfg.seed;
    s["model"] = model_echo(prep.params);
    if (prep.calibrated)
        s["calibration"] = ojson{{"rho_minus", jreal(prep.params.rho_minus)},
                                 {"mu", jreal(prep.params.mu)}};
    s["flow"] = flow_summary(flow);
    write_file(out / "summary.json", s.dump(2) + "\n");
    write_file(out / "timing.txt",
               "flow_seconds=" + fmt17(dt.count()) + "\n");  // not covered by determinism

    std::cout << "flow: " << flow.records.size() << " scales, E_final="
              << fmt17(flow.records.back().E) << ", events=" << flow.events.size() << "\n";
    return 0;
}

int run_verify_command(const RunConfig& cfg, std::uint64_t hash) {
    const fs::path out(cfg.out_dir);
    // Refuse mixed provenance: never mingle reports with artifacts written by
    // a different configuration.
    const std::string existing = read_file_or_empty(out / "config.ini");
    if (!existing.empty() && existing != cfg.raw_text) {
        std::cerr << "verify: " << (out / "config.ini").string()
                  << " was written by a different configuration; refusing to mix "
                     "provenance\n";
        return 2;
    }
    write_file(out / "config.ini", cfg.raw_text);

    const auto t0 = std::chrono::steady_clock::now();
    const Prepared prep = prepare_params(cfg);
    const ModelParams& params = prep.params;
    const FlowResult flow = run_flow(params, options_from(cfg));
    write_file(out / "flow.csv", flow_csv_text(flow, hash));

    const VerifyToggles& t = cfg.verify;
    std::vector<VerificationReport> reports;
    if (t.i4) {
        std::vector<Vec3> Ps = {params.P};
        const auto extra =
            sample_ball_momenta(std::max(0, t.i4_P_samples - 1), 0.32, cfg.seed ^ 0xA5A5u);
        Ps.insert(Ps.end(), extra.begin(), extra.end());
        const auto ks = sample_photon_momenta(params, t.i4_k_samples, cfg.seed ^ 0x5A5Au);
        reports.push_back(verify_I4(params, ks, Ps, cfg.threads));
    }
    if (t.pull_through) reports.push_back(pull_through_scan(params, t.pull_scale));
    if (t.photon) reports.push_back(photon_number_scan(flow.records, params));
    if (t.holder) reports.push_back(holder_scan(params, t.holder_deltas, t.holder_scales));
    if (t.gradient) reports.push_back(gradient_bounds_scan(flow.records, params, cfg.threads));
    if (t.marginal) reports.push_back(marginal_decay_check(params, flow));
    if (t.ladder) reports.push_back(ladder_check(flow, params));
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;

    bool all_pass = true;
    ojson checks = ojson::object();
    for (const VerificationReport& rep : reports) {
        write_file(out / ("report_" + rep.check + ".json"), report_json_text(rep, hash));
        checks[rep.check] =
            ojson{{"passed", rep.passed}, {"worst_margin", jreal(rep.worst_margin)}};
        all_pass = all_pass && rep.passed;
        std::cout << "check " << rep.check << ": " << (rep.passed ? "PASS" : "FAIL")
                  << " (worst_margin=" << fmt17(rep.worst_margin) << ")\n";
    }

    ojson s;
    s["artifact"] = kArtifactVersion;
    s["command"] = "verify";
    s["label"] = cfg.label;
    s["config_hash"] = hash_hex(hash);
    s["seed"] = cfg.seed;
    s["model"] = model_echo(params);
    if (prep.calibrated)
        s["calibration"] = ojson{{"rho_minus", jreal(params.rho_minus)},
                                 {"mu", jreal(params.mu)}};
    s["flow"] = flow_summary(flow);
    s["checks"] = checks;
    s["passed"] = all_pass;
    write_file(out / "summary.json", s.dump(2) + "\n");
    write_file(out / "timing.txt", "verify_seconds=" + fmt17(dt.count()) + "\n");
    return all_pass ? 0 : 1;
}

int run_sweep_command(const RunConfig& cfg, std::uint64_t hash) {
    if (cfg.sweep.axis.empty())
        throw InvariantViolation("sweep requires [sweep] axis and values");
    const fs::path out(cfg.out_dir);

    // Materialize and validate every point before running any of them.
    std::vector<ModelParams> points;
    for (Real v : cfg.sweep.values) {
        ModelParams p = cfg.model;
        if (cfg.sweep.axis == "alpha") {
            p.alpha = v;
        } else if (cfg.sweep.axis == "P") {
            const Real n = cfg.model.P.norm();
            const Vec3 dir = n > 0 ? Vec3(cfg.model.P / n) : Vec3(1.0, 0.0, 0.0);
            p.P = v * dir;
        } else if (cfg.sweep.axis == "Nmax") {
            p.Nmax = static_cast<int>(std::lround(v));
        } else if (cfg.sweep.axis == "n_radial") {
            p.n_radial = static_cast<int>(std::lround(v));
        } else if (cfg.sweep.axis == "n_theta") {
            p.n_theta = static_cast<int>(std::lround(v));
        } else {
            p.n_phi = static_cast<int>(std::lround(v));
        }
        p.validate();
        points.push_back(p);
    }

    std::string csv = provenance_line(hash);
    csv += "index,value,E_final,gradE_norm,gap_ratio_min,Nf_final,dPhi_final\n";
    for (size_t i = 0; i < points.size(); ++i) {
        const FlowResult flow = run_flow(points[i], options_from(cfg));
        char sub[32];
        std::snprintf(sub, sizeof(sub), "point_%03zu", i);
        fs::create_directories(out / sub);
        write_file(out / sub / "flow.csv", flow_csv_text(flow, hash));
        ojson s;
        s["artifact"] = kArtifactVersion;
        s["command"] = "sweep";
        s["label"] = cfg.label;
        s["config_hash"] = hash_hex(hash);
        s["axis"] = cfg.sweep.axis;
        s["value"] = jreal(cfg.sweep.values[i]);
        s["model"] = model_echo(points[i]);
        s["flow"] = flow_summary(flow);
        write_file(out / sub / "summary.json", s.dump(2) + "\n");

        const FlowRecord& last = flow.records.back();
        csv += std::to_string(i) + ',' + fmt17(cfg.sweep.values[i]) + ',' + fmt17(last.E) +
               ',' + fmt17(last.gradE.norm()) + ',' + fmt17(flow.rho_minus_observed) + ',' +
               fmt17(last.Nf) + ',' + fmt17(last.dPhi) + '\n';
        std::cout << "sweep point " << i << " (" << cfg.sweep.axis << "="
                  << fmt17(cfg.sweep.values[i]) << "): E_final=" << fmt17(last.E) << "\n";
    }
    write_file(out / "sweep.csv", csv);
    return 0;
}

// ---------------------------------------------------------------------------
// selfcheck: fast structural assertions and small cross-checked oracles.

struct CheckFail final : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool cond, const std::string& msg) {
    if (!cond) throw CheckFail(msg);
}

void expect_near(Real a, Real b, Real tol, const std::string& what) {
    if (!(std::abs(a - b) <= tol))
        throw CheckFail(what + ": " + fmt17(a) + " vs " + fmt17(b) + " (tol " + fmt17(tol) +
                        ")");
}

Mode mk_mode(const Vec3& k, Real weight, int which_pol, int shell) {
    const auto [e1, e2] = polarization_basis(k);
    Mode m;
    m.k = k;
    m.weight = weight;
    m.lambda = which_pol == 0 ? +1 : -1;
    m.eps = which_pol == 0 ? e1 : e2;
    m.shell = shell;
    return m;
}

void check_fock_dimensions() {
    expect(fock_dimension(2, 2, 1000) == 6, "fock_dimension(2,2) != 6");
    expect(fock_dimension(4, 0, 1000) == 1, "fock_dimension(4,0) != 1");
    expect(fock_dimension(4, 3, 1000) == 35, "fock_dimension(4,3) != 35");
    const ModeGrid g = make_custom_grid(
        {mk_mode(Vec3(0, 0, 0.6), 0.02, 0, 0), mk_mode(Vec3(0.5, 0.1, 0.0), 0.03, 1, 0)});
    const FockBasis b = build_fock_basis(g, 2, 1000);
    expect(b.dim() == 6, "2-mode Nmax=2 basis dimension != 6");
    expect(b.total(0) == 0, "vacuum is not state 0");
    for (Eigen::Index i = 1; i < b.dim(); ++i)
        expect(b.total(static_cast<std::int32_t>(i)) >=
                   b.total(static_cast<std::int32_t>(i - 1)),
               "basis enumeration not graded");
}

void check_shell_ladder() {
    const ModelParams p;
    expect_near(p.sigma(0), 1.0, 1e-15, "sigma_0");
    expect_near(p.sigma(1), 0.4, 1e-15, "sigma_1");
    expect_near(p.sigma(3), 0.064, 1e-15, "sigma_3");
    const ModeGrid g = build_mode_grid(p);
    expect(g.n_shells() == p.J, "grid shell count != J");
    expect(g.n_modes() == p.J * p.modes_per_shell(), "grid mode count");
    for (int s = 0; s < g.n_shells(); ++s) {
        const auto [lo, hi] = g.shell_offsets[static_cast<size_t>(s)];
        for (int m = lo; m < hi; ++m) {
            const Real kn = g.modes[static_cast<size_t>(m)].k.norm();
            expect(kn <= p.sigma(s) + 1e-12 && kn > p.sigma(s + 1) - 1e-12,
                   "mode outside its shell annulus");
        }
    }
}

void check_polarization() {
    const auto [e1, e2] = polarization_basis(Vec3(0, 0, 1));
    expect_near(std::abs(e1[0] - Complex(1, 0)), 0.0, 1e-15, "e1 at the pole");
    expect_near(std::abs(e2[1] - Complex(1, 0)), 0.0, 1e-15, "e2 at the pole");
    SplitMix64 rng(99);
    for (int i = 0; i < 10; ++i) {
        const Vec3 k(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        if (k.norm() < 1e-3) continue;
        const auto [f1, f2] = polarization_basis(k);
        expect_near(std::abs(f1.dot(k.cast<Complex>())), 0.0, 1e-12, "transversality e1");
        expect_near(std::abs(f2.dot(k.cast<Complex>())), 0.0, 1e-12, "transversality e2");
        expect_near(std::abs(f1.dot(f2)), 0.0, 1e-12, "polarization orthogonality");
        expect_near(f1.norm(), 1.0, 1e-12, "polarization normalization");
    }
}

void check_quadrature_cell() {
    ModelParams p;
    p.n_radial = 2;
    p.J = 2;
    const ModeGrid g = build_mode_grid(p);
    for (int s = 0; s < g.n_shells(); ++s) {
        const auto [lo, hi] = g.shell_offsets[static_cast<size_t>(s)];
        Real w = 0.0;
        for (int m = lo; m < hi; ++m) w += g.modes[static_cast<size_t>(m)].weight;
        // Each geometric cell appears once per polarization, hence the 2x.
        const Real exact = 2.0 * 4.0 * kPi / 3.0 *
                           (std::pow(p.sigma(s), 3) - std::pow(p.sigma(s + 1), 3));
        expect_near(w, exact, 1e-12 * exact, "shell cell volume (2-point radial rule)");
    }
}

void check_single_mode_field() {
    const ModeGrid g = make_custom_grid({mk_mode(Vec3(0, 0, 0.5), 0.04, 0, 0)});
    const FockBasis b = build_fock_basis(g, 2, 100);
    const FieldOperators ops = assemble_field_operators(g, b, {0, 1});
    const Real amp = std::sqrt(0.04) / std::sqrt(0.5);
    CMat expected = CMat::Zero(3, 3);
    expected(1, 0) = expected(0, 1) = amp;
    expected(2, 1) = expected(1, 2) = amp * std::sqrt(2.0);
    expect_near((CMat(ops.A[0].m) - expected).cwiseAbs().maxCoeff(), 0.0, 1e-14,
                "single-mode A_x matrix");
    expect_near(CMat(ops.A[2].m).cwiseAbs().maxCoeff(), 0.0, 1e-14,
                "A_z vanishes for k || z");
    const CMat pf = CMat(ops.Pf[2].m);
    expect_near(std::abs(pf(1, 1) - Complex(0.5, 0)), 0.0, 1e-14, "Pf_z one photon");
    expect_near(std::abs(pf(2, 2) - Complex(1.0, 0)), 0.0, 1e-14, "Pf_z two photons");
    expect_near(std::abs(CMat(ops.Hf.m)(2, 2) - Complex(1.0, 0)), 0.0, 1e-14, "Hf");
    expect_near(std::abs(CMat(ops.Nf.m)(2, 2) - Complex(2.0, 0)), 0.0, 1e-14, "Nf");
}

void check_free_theory_flow() {
    ModelParams p;
    p.alpha = 0.0;
    p.J = 2;
    const FlowResult flow = run_flow(p, {});
    const Real e_free = 0.5 * p.P.squaredNorm();
    for (const FlowRecord& r : flow.records) {
        expect_near(r.E, e_free, 1e-12, "free ground energy");
        expect_near((r.gradE - p.P).norm(), 0.0, 1e-12, "free gradient");
        expect_near(r.Nf, 0.0, 1e-12, "free photon number");
        if (r.j >= 1) {
            expect_near(r.dPsi, 0.0, 1e-12, "free state increment");
            expect_near(r.dPhi, 0.0, 1e-12, "free dressed increment");
        }
    }
    const CVec& psi = flow.final_state().Psi;
    expect_near(std::abs(psi[0]), 1.0, 1e-12, "free ground state is the vacuum");
}

void check_dense_ground() {
    ModelParams p;
    p.J = 1;
    const ModeGrid g = build_mode_grid(p);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    const SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, 1);
    const SpectralResult gs = ground_state(H, p.tol_eig);
    Eigen::SelfAdjointEigenSolver<CMat> es{CMat(H.m)};
    expect_near(gs.energy, es.eigenvalues()[0], 1e-9, "Lanczos vs dense ground energy");
    const CVec v0 = es.eigenvectors().col(0);
    expect(std::abs(std::abs(v0.dot(gs.vector)) - 1.0) <= 1e-8,
           "Lanczos vs dense ground vector overlap");
}

void check_weyl_unitarity() {
    const ModeGrid g = make_custom_grid(
        {mk_mode(Vec3(0, 0, 0.6), 0.03, 0, 0), mk_mode(Vec3(0.4, 0.3, 0.1), 0.05, 1, 0)});
    const FockBasis b = build_fock_basis(g, 3, 1000);
    const CoherentDisplacement cd =
        displacement_coefficients(0.04, g, Vec3(0.2, 0.1, 0.0), {0, 1});
    const SpMat G = weyl_generator(cd, b);
    const CVec v = seeded_unit(b.dim(), 7);
    const CVec w = apply_weyl(G, v, 1e-12);
    const CVec back = apply_weyl(SpMat(-G), w, 1e-12);
    expect_near((back - v).norm(), 0.0, 1e-8, "Weyl round trip");
    expect_near(w.norm(), 1.0, 1e-10, "Weyl isometry");
}

void check_coherent_occupation() {
    const ModeGrid g = make_custom_grid({mk_mode(Vec3(0, 0, 0.5), 0.01, 0, 0)});
    const FockBasis b = build_fock_basis(g, 6, 1000);
    const CoherentDisplacement cd =
        displacement_coefficients(0.01, g, Vec3(0.1, 0.0, 0.0), {0, 1});
    const Real f = 0.1 * 0.1 * 0.1 / std::pow(0.5, 1.5);  // sqrt(alpha w) proj / k^{3/2}
    expect_near(std::abs(cd.f[0]), f, 1e-15, "displacement amplitude");
    const SpMat G = weyl_generator(cd, b);
    CVec vac = CVec::Zero(b.dim());
    vac[0] = 1.0;
    const CVec phi = apply_weyl(G, vac, 1e-13);
    const FieldOperators ops = assemble_field_operators(g, b, {0, 1});
    const Real n = std::real(Complex(phi.dot(CVec(ops.Nf.m * phi))));
    expect_near(n, f * f, 1e-12, "coherent occupation |f|^2");
}

void check_delta_H_identity() {
    const ModelParams p;
    const ModeGrid full = build_mode_grid(p);
    const ModeGrid g = shell_prefix(full, 2);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    const SparseHermitian H2 = assemble_fiber_hamiltonian(p, g, b, 2);
    const SparseHermitian H1e = assemble_fiber_hamiltonian(p, g, b, 1);
    const SparseHermitian dH = assemble_delta_H(p, g, b, 1);
    const Real defect =
        CMat(SpMat(H2.m - H1e.m - dH.m)).cwiseAbs().maxCoeff();
    expect_near(defect, 0.0, 1e-12, "scale-increment identity");
}

void check_canonical_certified() {
    ModelParams p;
    p.alpha = 0.02;
    const ModeGrid g = make_custom_grid(
        {mk_mode(Vec3(0, 0, 0.6), 0.03, 0, 0), mk_mode(Vec3(0.5, 0.2, 0.1), 0.05, 1, 0)});
    const FockBasis b = build_fock_basis(g, 3, 1000);
    const SparseHermitian H =
        assemble_fiber_hamiltonian_at(p.P, p.alpha, p.tol_herm, g, b, {0, 1});
    const SpectralResult gs = ground_state(H, p.tol_eig);
    const Vec3 gradE = gradient_feynman_hellmann(p, g, b, 1, gs.vector);
    const CoherentDisplacement cd = displacement_coefficients(p.alpha, g, gradE, {0, 1});
    const SpMat G = weyl_generator(cd, b);
    CVec phi = apply_weyl(G, gs.vector, 1e-12);
    fix_phase(phi, 0);
    CertifyOptions copt;
    copt.H = &H;
    copt.tol = 1e-8;
    const CanonicalPieces cp = canonical_form(p, g, b, {0, 1}, gradE, phi, copt);
    expect(cp.certification_residual <= 1e-8, "canonical certification residual");
}

void check_feynman_hellmann_fd() {
    const ModelParams p;
    const ModeGrid full = build_mode_grid(p);
    const ModeGrid g = shell_prefix(full, 1);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    const SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, 1);
    const SpectralResult gs = ground_state(H, p.tol_eig);
    const Vec3 fh = gradient_feynman_hellmann(p, g, b, 1, gs.vector);
    const Vec3 fd = gradient_finite_difference(p, g, b, 1, 1e-3, 5);
    expect_near((fh - fd).cwiseAbs().maxCoeff(), 0.0, 1e-4, "FH vs FD gradient");
}

void check_contour_projector() {
    const ModelParams p;
    const ModeGrid full = build_mode_grid(p);
    const ModeGrid g = shell_prefix(full, 1);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    const SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, 1);
    Eigen::SelfAdjointEigenSolver<CMat> es{CMat(H.m)};
    const Real gap = es.eigenvalues()[1] - es.eigenvalues()[0];
    CVec u = seeded_unit(b.dim(), 11);
    u[0] += Complex(2.0, 0.0);
    u.normalize();
    const CVec v0 = es.eigenvectors().col(0);
    const CVec dense = v0 * (v0.dot(u));
    ContourSpec spec;
    spec.center = Complex(es.eigenvalues()[0], 0.0);
    spec.radius = 0.25 * gap;
    spec.n_quad = 32;
    const CVec proj = contour_project(H, spec, u, p.tol_solve);
    expect_near((proj - dense).norm(), 0.0, 1e-8, "contour projector vs dense");
}

void check_shifted_solve_residual() {
    const ModelParams p;
    const ModeGrid full = build_mode_grid(p);
    const ModeGrid g = shell_prefix(full, 1);
    const FockBasis b = build_fock_basis(g, p.Nmax, p.dim_cap);
    const SparseHermitian H = assemble_fiber_hamiltonian(p, g, b, 1);
    const CVec rhs = seeded_unit(b.dim(), 13);
    const Complex z(0.05, 0.1);
    const CVec x = shifted_solve(H, z, rhs, p.tol_solve);
    const CVec r = CVec(H.m * x) - z * x - rhs;
    expect(r.norm() <= 2.0 * p.tol_solve * rhs.norm(), "shifted-solve residual contract");
}

void check_determinism_digest() {
    ModelParams p;
    p.J = 2;
    FlowOptions fo;
    fo.seed = 777;
    const FlowResult a = run_flow(p, fo);
    const FlowResult b = run_flow(p, fo);
    const std::string ca = flow_csv_text(a, 0), cb = flow_csv_text(b, 0);
    expect(ca == cb, "repeated flow runs differ");
    expect(fnv1a64(ca) == fnv1a64(cb), "digest mismatch");
}

void check_series_consistency() {
    ModelParams p;
    p.J = 2;
    p.strategy = Strategy::Both;
    const FlowResult flow = run_flow(p, {});
    for (const ScaleEvent& e : flow.events)
        expect(e.what.find("discrepancy") == std::string::npos,
               "recursive/direct discrepancy: " + e.what);
    for (const FlowRecord& r : flow.records)
        if (r.j >= 1)
            expect(std::isfinite(r.contraction) && r.contraction < 1.0,
                   "contraction factor not recorded below 1");
}

int run_selfcheck_command(const RunConfig& cfg, std::uint64_t hash) {
    struct Item {
        const char* name;
        void (*fn)();
    };
    const Item items[] = {
        {"fock_dimensions", check_fock_dimensions},
        {"shell_ladder", check_shell_ladder},
        {"polarization", check_polarization},
        {"quadrature_cell", check_quadrature_cell},
        {"single_mode_field", check_single_mode_field},
        {"free_theory_flow", check_free_theory_flow},
        {"dense_ground", check_dense_ground},
        {"weyl_unitarity", check_weyl_unitarity},
        {"coherent_occupation", check_coherent_occupation},
        {"delta_H_identity", check_delta_H_identity},
        {"canonical_certified", check_canonical_certified},
        {"feynman_hellmann_fd", check_feynman_hellmann_fd},
        {"contour_projector", check_contour_projector},
        {"shifted_solve_residual", check_shifted_solve_residual},
        {"determinism_digest", check_determinism_digest},
        {"series_consistency", check_series_consistency},
    };

    bool all = true;
    ojson checks = ojson::object();
    for (const Item& it : items) {
        std::string detail;
        bool ok = true;
        try {
            it.fn();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        all = all && ok;
        checks[it.name] = ok;
        std::cout << "selfcheck " << it.name << ": " << (ok ? "PASS" : "FAIL");
        if (!ok) std::cout << " (" << detail << ")";
        std::cout << "\n";
    }

    ojson s;
    s["artifact"] = kArtifactVersion;
    s["command"] = "selfcheck";
    s["label"] = cfg.label;
    s["config_hash"] = hash_hex(hash);
    s["checks"] = checks;
    s["passed"] = all;
    write_file(fs::path(cfg.out_dir) / "summary.json", s.dump(2) + "\n");
    return all ? 0 : 1;
}

}  // namespace

int execute(const std::string& command, RunConfig cfg) {
    try {
        if (command != "flow" && command != "verify" && command != "sweep" &&
            command != "selfcheck")
            throw InvalidParams("unknown command '" + command + "'");
        cfg.finalize();
        const std::uint64_t hash = fnv1a64(cfg.raw_text);
        fs::create_directories(cfg.out_dir);
        if (command != "verify")  // verify writes the echo after its provenance check
            write_file(fs::path(cfg.out_dir) / "config.ini", cfg.raw_text);

        if (command == "flow") return run_flow_command(cfg, hash);
        if (command == "verify") return run_verify_command(cfg, hash);
        if (command == "sweep") return run_sweep_command(cfg, hash);
        return run_selfcheck_command(cfg, hash);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvariantViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidParams& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DimOverflow& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace irflow
