#include "irflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "irflow/errors.hpp"

namespace irflow {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

Real parse_real(int line, const std::string& v) {
    char* end = nullptr;
    const Real x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
        throw ParseError(line, "expected a number, got '" + v + "'");
    return x;
}

long parse_long(int line, const std::string& v) {
    char* end = nullptr;
    const long x = std::strtol(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
        throw ParseError(line, "expected an integer, got '" + v + "'");
    return x;
}

int parse_int(int line, const std::string& v) { return static_cast<int>(parse_long(line, v)); }

bool parse_bool(int line, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ParseError(line, "expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_ws(const std::string& v) {
    std::istringstream ss(v);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

Vec3 parse_vec3(int line, const std::string& v) {
    const auto toks = split_ws(v);
    if (toks.size() != 3) throw ParseError(line, "expected three numbers, got '" + v + "'");
    return Vec3(parse_real(line, toks[0]), parse_real(line, toks[1]),
                parse_real(line, toks[2]));
}

std::vector<Real> parse_real_list(int line, const std::string& v) {
    std::vector<Real> out;
    for (const auto& t : split_ws(v)) out.push_back(parse_real(line, t));
    return out;
}

std::vector<int> parse_int_list(int line, const std::string& v) {
    std::vector<int> out;
    for (const auto& t : split_ws(v)) out.push_back(parse_int(line, t));
    return out;
}

}  // namespace

void RunConfig::finalize() {
    model.validate();
    if (threads < 1) throw InvariantViolation("threads must be >= 1");
    if (fd_h <= 0.0) throw InvariantViolation("fd_h must be positive");
    if (seed == 0) throw InvariantViolation("seed must be nonzero");
    if (out_dir.empty()) throw InvariantViolation("out_dir must not be empty");
    if (verify.i4_P_samples < 1 || verify.i4_k_samples < 1)
        throw InvariantViolation("I4 sample counts must be >= 1");
    if (verify.pull_scale < 0) verify.pull_scale = std::min(2, model.J);
    if (verify.pull_scale > model.J) throw InvariantViolation("pull_scale outside [0, J]");
    if (verify.holder_scales.empty())
        for (int j = 1; j <= std::min(3, model.J); ++j) verify.holder_scales.push_back(j);
    for (int j : verify.holder_scales)
        if (j < 0 || j > model.J) throw InvariantViolation("holder scale outside [0, J]");
    if (verify.holder_deltas.empty())
        verify.holder_deltas = {0.04, 0.02, 0.01, 0.005, 0.0025};
    for (Real d : verify.holder_deltas)
        if (d <= 0.0) throw InvariantViolation("holder deltas must be positive");
    if (!sweep.axis.empty()) {
        static const char* axes[] = {"alpha", "P", "Nmax", "n_radial", "n_theta", "n_phi"};
        if (std::find_if(std::begin(axes), std::end(axes), [&](const char* a) {
                return sweep.axis == a;
            }) == std::end(axes))
            throw InvariantViolation("unknown sweep axis '" + sweep.axis + "'");
        if (sweep.values.empty()) throw InvariantViolation("sweep values must not be empty");
    }
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    cfg.raw_text = text;
    ModelParams& m = cfg.model;

    std::istringstream in(text);
    std::string raw;
    std::string section = "model";  // sectionless prefix keys belong to [model]
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const size_t hash_pos = raw.find('#');
        if (hash_pos != std::string::npos) raw.erase(hash_pos);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "run" && section != "verify" &&
                section != "sweep")
                throw SchemaViolation("[" + section + "]");
            continue;
        }

        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(line_no, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "empty key");
        if (val.empty()) throw ParseError(line_no, "empty value for '" + key + "'");

        if (section == "model") {
            if (key == "alpha") m.alpha = parse_real(line_no, val);
            else if (key == "Lambda") m.Lambda = parse_real(line_no, val);
            else if (key == "P") m.P = parse_vec3(line_no, val);
            else if (key == "epsilon") m.epsilon = parse_real(line_no, val);
            else if (key == "J") m.J = parse_int(line_no, val);
            else if (key == "n_radial") m.n_radial = parse_int(line_no, val);
            else if (key == "n_theta") m.n_theta = parse_int(line_no, val);
            else if (key == "n_phi") m.n_phi = parse_int(line_no, val);
            else if (key == "Nmax") m.Nmax = parse_int(line_no, val);
            else if (key == "mu") m.mu = parse_real(line_no, val);
            else if (key == "rho_minus") m.rho_minus = parse_real(line_no, val);
            else if (key == "rho_plus") m.rho_plus = parse_real(line_no, val);
            else if (key == "nu_min") m.nu_min = parse_real(line_no, val);
            else if (key == "nu_max") m.nu_max = parse_real(line_no, val);
            else if (key == "tol_eig") m.tol_eig = parse_real(line_no, val);
            else if (key == "tol_solve") m.tol_solve = parse_real(line_no, val);
            else if (key == "tol_herm") m.tol_herm = parse_real(line_no, val);
            else if (key == "tol_canonical") m.tol_canonical = parse_real(line_no, val);
            else if (key == "tol_canonical_flow")
                m.tol_canonical_flow = parse_real(line_no, val);
            else if (key == "tol_series") m.tol_series = parse_real(line_no, val);
            else if (key == "n_quad") m.n_quad = parse_int(line_no, val);
            else if (key == "neumann_terms") m.neumann_terms = parse_int(line_no, val);
            else if (key == "max_lanczos") m.max_lanczos = parse_int(line_no, val);
            else if (key == "strategy") {
                try {
                    m.strategy = strategy_from_string(val);
                } catch (const Error& e) {
                    throw ParseError(line_no, e.what());
                }
            } else if (key == "dim_cap") m.dim_cap = parse_long(line_no, val);
            else if (key == "dense_cutoff") m.dense_cutoff = parse_int(line_no, val);
            else if (key == "c_alpha_margin") m.c_alpha_margin = parse_real(line_no, val);
            else if (key == "delta_rate") m.delta_rate = parse_real(line_no, val);
            else if (key == "trunc_warn") m.trunc_warn = parse_real(line_no, val);
            else throw SchemaViolation("model." + key);
        } else if (section == "run") {
            if (key == "label") cfg.label = val;
            else if (key == "out_dir") cfg.out_dir = val;
            else if (key == "seed")
                cfg.seed = static_cast<std::uint64_t>(parse_long(line_no, val));
            else if (key == "threads") cfg.threads = parse_int(line_no, val);
            else if (key == "fd_h") cfg.fd_h = parse_real(line_no, val);
            else if (key == "with_fd") cfg.with_fd = parse_bool(line_no, val);
            else if (key == "certify") cfg.certify = parse_bool(line_no, val);
            else if (key == "calibrate") cfg.calibrate = parse_bool(line_no, val);
            else throw SchemaViolation("run." + key);
        } else if (section == "verify") {
            if (key == "checks") {
                VerifyToggles& t = cfg.verify;
                t.i4 = t.pull_through = t.photon = t.holder = t.gradient = t.marginal =
                    t.ladder = false;
                for (const auto& name : split_ws(val)) {
                    if (name == "i4") t.i4 = true;
                    else if (name == "pull_through") t.pull_through = true;
                    else if (name == "photon") t.photon = true;
                    else if (name == "holder") t.holder = true;
                    else if (name == "gradient") t.gradient = true;
                    else if (name == "marginal") t.marginal = true;
                    else if (name == "ladder") t.ladder = true;
                    else throw SchemaViolation("verify.checks: " + name);
                }
            } else if (key == "i4_P_samples")
                cfg.verify.i4_P_samples = parse_int(line_no, val);
            else if (key == "i4_k_samples")
                cfg.verify.i4_k_samples = parse_int(line_no, val);
            else if (key == "pull_scale") cfg.verify.pull_scale = parse_int(line_no, val);
            else if (key == "holder_scales")
                cfg.verify.holder_scales = parse_int_list(line_no, val);
            else if (key == "holder_deltas")
                cfg.verify.holder_deltas = parse_real_list(line_no, val);
            else throw SchemaViolation("verify." + key);
        } else {  // sweep
            if (key == "axis") cfg.sweep.axis = val;
            else if (key == "values") cfg.sweep.values = parse_real_list(line_no, val);
            else throw SchemaViolation("sweep." + key);
        }
    }

    cfg.finalize();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(0, "cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace irflow
