#pragma once

#include <stdexcept>
#include <string>

namespace mra {

/// Broad failure categories; the CLI maps each to a distinct exit code.
enum class ErrorKind { config, format, numerical, io, structural, transport };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::format, w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct StructuralError : Error {
  explicit StructuralError(const std::string& w) : Error(ErrorKind::structural, w) {}
};
struct TransportError : Error {
  explicit TransportError(const std::string& w) : Error(ErrorKind::transport, w) {}
};

/// Throws the subclass matching `kind`.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  switch (kind) {
    case ErrorKind::config: throw ConfigError(what);
    case ErrorKind::format: throw FormatError(what);
    case ErrorKind::numerical: throw NumericalError(what);
    case ErrorKind::io: throw IoError(what);
    case ErrorKind::structural: throw StructuralError(what);
    case ErrorKind::transport: break;
  }
  throw TransportError(what);
}

}  // namespace mra
