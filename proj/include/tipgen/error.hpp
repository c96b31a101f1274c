#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tipgen {

enum class ErrorKind {
  Io,
  Decode,
  EmptyMask,
  EmptySignature,
  SignatureTooLarge,
  NoValidPlacement,
  DegenerateComposite,
  Domain,
  Config,
  Schema,
  UnknownCategory,
  ExhaustedRetries,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Decode: return "DecodeError";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::EmptySignature: return "EmptySignature";
    case ErrorKind::SignatureTooLarge: return "SignatureTooLarge";
    case ErrorKind::NoValidPlacement: return "NoValidPlacement";
    case ErrorKind::DegenerateComposite: return "DegenerateComposite";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Schema: return "SchemaError";
    case ErrorKind::UnknownCategory: return "UnknownCategory";
    case ErrorKind::ExhaustedRetries: return "ExhaustedRetries";
  }
  return "Error";
}

/// Single exception type for the toolkit; `kind()` says which failure it is.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Same kind, message prefixed with extra context (e.g. the offending file).
  Error with_context(const std::string& context) const {
    Error e = *this;
    static_cast<std::runtime_error&>(e) = std::runtime_error(context + ": " + what());
    return e;
  }

 private:
  ErrorKind kind_;
};

}  // namespace tipgen
