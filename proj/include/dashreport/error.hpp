#pragma once

#include <stdexcept>
#include <string>

namespace dashreport {

// Base for every failure raised by the library. Each subclass maps onto one
// failure category callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Document parse failure. `field` names the offending field when known;
// `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::string field, int line = 0)
      : Error(message), field_(std::move(field)), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts)
      : Error(message), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class ProviderError : public Error {
 public:
  ProviderError(int status, const std::string& message)
      : Error("provider returned HTTP " + std::to_string(status) + ": " +
              message),
        status_(status),
        provider_message_(message) {}

  int status() const { return status_; }
  const std::string& provider_message() const { return provider_message_; }

 private:
  int status_;
  std::string provider_message_;
};

// The scripted backend has no response for a request key.
class ScriptMissError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& message, std::string raw_text)
      : Error(message), raw_text_(std::move(raw_text)) {}
  const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

class StageError : public Error {
 public:
  using Error::Error;
};

class UndefinedScoreError : public Error {
 public:
  using Error::Error;
};

class SessionError : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace dashreport
