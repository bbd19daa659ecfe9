#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace latentbench {

// Process exit codes used by the CLI.
enum class ExitCode : int { ok = 0, internal = 1, config = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Bad sizes, invalid plans, missing options.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

/// Unreadable or inconsistent input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Malformed file contents. `position` is a byte offset for binary formats
/// and a 1-based line number for text formats.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::uint64_t position)
      : DataError(what), position_(position) {}
  std::uint64_t position() const noexcept { return position_; }

 private:
  std::uint64_t position_;
};

/// Non-finite losses, divergence, solver failures.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ExitCode::numeric, what) {}
};

/// A statistic was about to be fit on held-out rows.
class LeakageError : public Error {
 public:
  explicit LeakageError(const std::string& what) : Error(ExitCode::internal, what) {}
};

}  // namespace latentbench
