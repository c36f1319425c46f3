#pragma once

#include <stdexcept>
#include <string>

namespace adec {

// Root of every error raised by the engine. Callers that only need to know
// "something in adec failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A document did not match its schema. `path` names the offending location
// in JSON-pointer style ("/screens/home/root/children/2/bounds").
class ParseError : public Error {
 public:
  ParseError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

// Unrecoverable misuse of a World (e.g. acting after terminate).
class WorldError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class ResponseParseError : public Error {
 public:
  using Error::Error;
};

// Transport or protocol failure talking to a backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

class DesignerError : public BackendError {
 public:
  using BackendError::BackendError;
};

class PlanningInfeasible : public DesignerError {
 public:
  using DesignerError::DesignerError;
};

class AccountingError : public Error {
 public:
  using Error::Error;
};

}  // namespace adec
