#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Error categories. The CLI maps each one to a distinct exit code.
enum class ErrorKind {
  config,     ///< invalid configuration or rejected input (exit 2)
  data,       ///< malformed or inconsistent datasets (exit 3)
  numerical,  ///< singular designs, failed factorizations, stuck chains (exit 4)
  protocol,   ///< message schema, version or exchange failures (exit 5)
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message)
      : Error(ErrorKind::numerical, message) {}
};

class ProtocolError : public Error {
 public:
  enum class Fault { io, version, schema, non_finite, exchange };

  ProtocolError(Fault fault, const std::string& message)
      : Error(ErrorKind::protocol, message), fault_(fault) {}

  Fault fault() const noexcept { return fault_; }

 private:
  Fault fault_;
};

/// Rethrows the active exception as the same error kind with `stage` prepended.
[[noreturn]] void rethrow_with_stage(std::string_view stage);

/// Warnings go to stderr unless silenced (simulation campaigns silence them).
void warn(const std::string& message);
void set_warnings_enabled(bool enabled);
bool warnings_enabled();

}  // namespace fedm
