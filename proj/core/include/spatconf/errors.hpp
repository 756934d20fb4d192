#pragma once

#include <stdexcept>
#include <string>

namespace spatconf {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateSiteError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class FactorizationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// A design or constraint matrix lost column rank.
class RankError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class ModeSearchError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  IngestError(const std::string& what, long row, std::string column)
      : Error(what), row_(row), column_(std::move(column)) {}

  long row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  long row_;
  std::string column_;
};

}  // namespace spatconf
