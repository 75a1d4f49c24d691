#pragma once

#include <cstdint>
#include <string>

#include "irflow/config.hpp"
#include "irflow/flow.hpp"
#include "irflow/verify.hpp"

namespace irflow {

// Canonical byte renderings of the result bundle (fixed column set, 17
// significant digits, '#' provenance line).  Exposed so the determinism
// contract can be tested without touching the filesystem.
std::string flow_csv_text(const FlowResult& flow, std::uint64_t config_hash);
std::string report_json_text(const VerificationReport& rep, std::uint64_t config_hash);

// Runs one CLI command ("flow" | "verify" | "sweep" | "selfcheck") against a
// parsed configuration, writing the result bundle under cfg.out_dir.
// Returns the process exit code: 0 all pass, 1 check failure,
// 2 configuration error, 3 numerical failure.
int execute(const std::string& command, RunConfig cfg);

}  // namespace irflow
