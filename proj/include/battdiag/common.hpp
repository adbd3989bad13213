#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

// Shared error vocabulary. Every failure mode the library reports maps onto
// one of these types so callers can react (retry, fall back, abort) without
// string-matching messages.
namespace battdiag {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller passed a value outside an operation's contract.
struct InvalidArgument : Error {
    using Error::Error;
};

// Malformed external input (CSV, config). Message carries file/line context.
struct ParseError : Error {
    using Error::Error;
};

// Structurally well-formed data that violates a domain invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Half-cell parameter set whose reconstructed curve cannot cover the
// requested voltage window.
struct InfeasibleParameters : Error {
    using Error::Error;
};

// Fewer differential-capacity peaks than an operation requires.
struct PeakDeficit : Error {
    using Error::Error;
};

// Derivative-free fit found no feasible starting point or failed to converge.
struct FitFailure : Error {
    using Error::Error;
};

// Linear algebra could not be stabilised within the jitter budget.
struct IllConditioned : Error {
    using Error::Error;
};

// Iterative training produced non-finite loss.
struct TrainingDiverged : Error {
    TrainingDiverged(const std::string& msg, int at_epoch)
        : Error(msg), epoch(at_epoch) {}
    int epoch = -1;
};

// Sampling bounds rejected too many draws.
struct WidenBounds : Error {
    using Error::Error;
};

// Synthetic data generation could not produce a feasible cell history.
struct GenerationError : Error {
    using Error::Error;
};

// Surrogate model missed its held-out accuracy target after retries.
struct SurrogateAccuracy : Error {
    using Error::Error;
};

// Bad or missing run configuration.
struct ConfigError : Error {
    using Error::Error;
};

// FNV-1a, used for config/content hashing in manifests (stable across runs).
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

}  // namespace battdiag
