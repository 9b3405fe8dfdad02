#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace recon {

enum class ErrorCode {
  EmptyDump,
  DuplicateFunction,
  ParseFailure,
  UnknownFunction,
  UnknownVariable,
  BudgetTooSmall,
  FormatError,
  SchemaError,
  Timeout,
  HttpError,
  AuthError,
  TransportError,
  JudgeFormatError,
  GenFormatError,
  ExhaustedAttempts,
  StepRejected,
  UnknownType,
  DatasetError,
  MissingSegment,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI and the HTTP layer can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseFailure : public Error {
 public:
  ParseFailure(int line, const std::string& message)
      : Error(ErrorCode::ParseFailure,
              "line " + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

class HttpError : public Error {
 public:
  HttpError(int status, const std::string& message)
      : Error(ErrorCode::HttpError, "HTTP " + std::to_string(status) + ": " + message),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class StepRejected : public Error {
 public:
  explicit StepRejected(int step)
      : Error(ErrorCode::StepRejected, "super-CoT step " + std::to_string(step) + " rejected"),
        step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace recon
