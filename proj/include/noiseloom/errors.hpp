// errors.hpp — exception types shared across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace noiseloom {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Domain errors (CLI maps these to exit code 1).
class NonHermitianInput : public Error {
  public:
    using Error::Error;
};

class InvalidParameter : public Error {
  public:
    using Error::Error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class DegenerateDistribution : public Error {
  public:
    using Error::Error;
};

class BudgetExceeded : public Error {
  public:
    using Error::Error;
};

class GridMismatch : public Error {
  public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
  public:
    using Error::Error;
};

class InsufficientData : public Error {
  public:
    using Error::Error;
};

class OutOfDomain : public Error {
  public:
    using Error::Error;
};

class QuadratureBudget : public Error {
  public:
    using Error::Error;
};

class InvalidRatio : public Error {
  public:
    using Error::Error;
};

// I/O and file-format errors (CLI maps these to exit code 2).
class FormatError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace noiseloom
