#pragma once

#include <stdexcept>
#include <string>

namespace irflow {

// Base class for all domain errors thrown by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- model ---
struct ZeroMomentum final : Error {
    ZeroMomentum() : Error("polarization basis undefined for k = 0") {}
};
struct InvalidParams final : Error {
    explicit InvalidParams(const std::string& what) : Error("invalid parameters: " + what) {}
};
struct DimOverflow final : Error {
    explicit DimOverflow(const std::string& what) : Error("Fock dimension overflow: " + what) {}
};
struct WindowOutOfRange final : Error {
    explicit WindowOutOfRange(const std::string& what) : Error("shell window out of range: " + what) {}
};

// --- spectral ---
struct NoConvergence final : Error {
    int iterations = 0;
    explicit NoConvergence(const std::string& what, int iters = 0)
        : Error("no convergence: " + what), iterations(iters) {}
};
struct DegenerateGround final : Error {
    explicit DegenerateGround(const std::string& what)
        : Error("degenerate ground state: " + what) {}
};
struct SingularShift final : Error {
    explicit SingularShift(const std::string& what) : Error("singular shift: " + what) {}
};
struct EnclosureViolation final : Error {
    explicit EnclosureViolation(const std::string& what)
        : Error("contour enclosure violation: " + what) {}
};
struct ContractionFailure final : Error {
    double factor = 0.0;
    explicit ContractionFailure(const std::string& what, double f = 0.0)
        : Error("resolvent series not contracting: " + what), factor(f) {}
};

// --- dressing ---
struct GradientTooLarge final : Error {
    explicit GradientTooLarge(const std::string& what)
        : Error("|gradE| >= 1, displacement denominator can vanish: " + what) {}
};
struct ConsistencyFailure final : Error {
    double residual = 0.0;
    explicit ConsistencyFailure(const std::string& what, double r = 0.0)
        : Error("cross-assembly consistency failure: " + what), residual(r) {}
};

// --- flow ---
struct GapCollapse final : Error {
    explicit GapCollapse(const std::string& what) : Error("spectral gap collapse: " + what) {}
};

// --- cli ---
struct ParseError final : Error {
    int line = 0;
    ParseError(int line_, const std::string& what)
        : Error("parse error at line " + std::to_string(line_) + ": " + what), line(line_) {}
};
struct SchemaViolation final : Error {
    explicit SchemaViolation(const std::string& key)
        : Error("unknown configuration key: " + key) {}
};
struct InvariantViolation final : Error {
    explicit InvariantViolation(const std::string& what)
        : Error("invariant violation: " + what) {}
};

}  // namespace irflow
