#pragma once

#include <stdexcept>
#include <string>

namespace flashpuf {

// Base of every error the library throws. A failed key reconstruction is not
// an error; see keyforge.hpp.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Block/page/cell index outside the device geometry.
class AddressError : public Error {
 public:
  using Error::Error;
};

// Buffer length does not match what the operation requires.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration. The message starts with the offending field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Protocol misuse, e.g. extracting a response from an aggressor page.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class IncompleteSetError : public Error {
 public:
  using Error::Error;
};

// Metric evaluated outside its domain (empty input, mismatched lengths, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated persisted file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, std::string best_report)
      : Error(what), best_report_(std::move(best_report)) {}
  const std::string& best_report() const noexcept { return best_report_; }

 private:
  std::string best_report_;
};

}  // namespace flashpuf
