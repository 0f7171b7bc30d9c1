// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace apthunt {

enum class ErrorKind {
  MissingColumn,
  RowArity,
  BadField,
  MalformedLine,
  OovToken,
  DimMismatch,
  DegenerateInput,
  NonFinite,
  AlignmentMismatch,
  SchemaError,
  UnknownAbility,
  BudgetExceeded,
  TemplateMissing,
  InvalidArgument,
  Io,
  Stage,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::RowArity: return "RowArity";
    case ErrorKind::BadField: return "BadField";
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::OovToken: return "OovToken";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::AlignmentMismatch: return "AlignmentMismatch";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::UnknownAbility: return "UnknownAbility";
    case ErrorKind::BudgetExceeded: return "BudgetExceeded";
    case ErrorKind::TemplateMissing: return "TemplateMissing";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Stage: return "Stage";
  }
  return "Unknown";
}

/// Base exception for every recoverable failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// Parse failure that carries the 1-based row or line it refers to.
class ParseError : public Error {
 public:
  ParseError(ErrorKind kind, std::size_t line, const std::string& what)
      : Error(kind, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Schema violation located by a JSON pointer such as "/nodes/2/ability".
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(ErrorKind::SchemaError, path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Failure of one pipeline stage, wrapping the underlying cause.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(ErrorKind::Stage, stage + ": " + cause), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace apthunt
