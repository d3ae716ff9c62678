#pragma once

#include <stdexcept>
#include <string>

namespace cpdoc {

/// Error taxonomy used across the library. Everything derives from
/// std::runtime_error so callers can catch broadly; the CLI maps
/// ConfigError/ValidationError to exit code 1 and the rest to 2.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& m) : std::runtime_error("shape error: " + m) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& m) : std::runtime_error("domain error: " + m) {}
};

struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& m) : std::runtime_error("usage error: " + m) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error("config error: " + m) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& m) : std::runtime_error("validation error: " + m) {}
};

struct NoPathError : std::runtime_error {
  explicit NoPathError(const std::string& m) : std::runtime_error("no-path error: " + m) {}
};

struct CorruptedStateError : std::runtime_error {
  explicit CorruptedStateError(const std::string& m) : std::runtime_error("corrupted-state error: " + m) {}
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& m) : std::runtime_error("model-divergence error: " + m) {}
};

struct PoisonedUpdateError : std::runtime_error {
  explicit PoisonedUpdateError(const std::string& m) : std::runtime_error("poisoned-update error: " + m) {}
};

}  // namespace cpdoc
