#pragma once

#include <stdexcept>
#include <string>

namespace ambisql {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad run configuration, unknown format, missing backend.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset parsing/validation failure; message names the example index and field.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Prompt template rendered with a missing or empty required slot.
class TemplateError : public Error {
 public:
  using Error::Error;
};

// Generation backend failure: transport exhausted retries, replay miss, mock miss.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Database build failure or internal sandbox misuse (ragged rows).
class SandboxError : public Error {
 public:
  using Error::Error;
};

// No SQL-like content in a model reply.
class ExtractionError : public Error {
 public:
  using Error::Error;
};

// A gold query failed to build or execute (dataset defect for the operation at hand).
class GoldExecutionError : public Error {
 public:
  using Error::Error;
};

}  // namespace ambisql
