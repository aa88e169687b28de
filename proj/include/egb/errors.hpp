#pragma once

#include <stdexcept>
#include <string>

namespace egb {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A TokenDistribution violated its invariants (negative entry, bad sum).
class DistributionError : public Error {
 public:
  using Error::Error;
};

/// A parameter was outside its documented domain (temperature <= 0, order < 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent search / CLI configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (dataset, trace, script).
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, long line = -1)
      : Error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Remote call failed. Carries the raw payload for diagnostics.
class TransportError : public Error {
 public:
  TransportError(const std::string& msg, std::string payload = {}, int status = 0,
                 int retries = 0)
      : Error(msg), payload_(std::move(payload)), status_(status), retries_(retries) {}
  const std::string& payload() const { return payload_; }
  int status() const { return status_; }
  int retries() const { return retries_; }

 private:
  std::string payload_;
  int status_;
  int retries_;
};

/// Remote call timed out.
class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Remote returned a syntactically or semantically invalid body.
class MalformedResponseError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Remote returned a non-2xx HTTP status.
class HttpStatusError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Context longer than the model window.
class ContextOverflowError : public Error {
 public:
  using Error::Error;
};

/// A verifier produced an out-of-range score.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace egb
