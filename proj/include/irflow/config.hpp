#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irflow/params.hpp"
#include "irflow/types.hpp"

namespace irflow {

inline constexpr const char* kArtifactVersion = "irflow 1.0.0";

// Per-check switches and scan shapes for the `verify` command.
struct VerifyToggles {
    bool i4 = true;
    bool pull_through = true;
    bool photon = true;
    bool holder = true;
    bool gradient = true;
    bool marginal = true;
    bool ladder = true;

    int i4_P_samples = 4;
    int i4_k_samples = 8;
    int pull_scale = -1;  // -1 = auto: min(2, J)
    std::vector<int> holder_scales;    // empty = {1, 2, 3} clipped to J
    std::vector<Real> holder_deltas;   // empty = {0.04, 0.02, 0.01, 0.005, 0.0025}
};

struct SweepSpec {
    std::string axis;          // "alpha" | "P" | "Nmax" | "n_radial" | "n_theta" | "n_phi"
    std::vector<Real> values;  // integer axes take rounded values
};

// Full experiment description: model parameters plus orchestration knobs.
// raw_text preserves the exact parsed bytes; the config hash and the config
// echo are derived from it so provenance survives reformatting-free.
struct RunConfig {
    ModelParams model;
    std::string out_dir = "out";
    std::string label = "run";
    std::uint64_t seed = 12345;
    int threads = 1;
    Real fd_h = 1e-3;
    bool with_fd = true;
    bool certify = true;
    bool calibrate = false;
    VerifyToggles verify;
    SweepSpec sweep;
    std::string raw_text;

    // Fills dependent defaults (holder ladder shape) and validates everything;
    // throws InvariantViolation / InvalidParams.
    void finalize();
};

// FNV-1a 64-bit over the raw bytes; the provenance hash in every output file.
std::uint64_t fnv1a64(const std::string& data);
std::string hash_hex(std::uint64_t h);

// Strict-schema parse of the INI-like format documented in the README:
// sections [model] / [run] / [verify] / [sweep], key = value lines, '#'
// comments.  Unknown sections or keys raise SchemaViolation; malformed values
// raise ParseError with the line number; parameter-regime problems raise
// InvariantViolation.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

}  // namespace irflow
