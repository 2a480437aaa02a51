#pragma once

#include <stdexcept>
#include <string>

namespace optd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// The information matrix X U X^T is (numerically) singular.
class SingularInformation : public Error {
 public:
  using Error::Error;
};

class RankDeficientData : public Error {
 public:
  using Error::Error;
};

class SubsetRankDeficient : public Error {
 public:
  using Error::Error;
};

class SingularAfterSwap : public Error {
 public:
  using Error::Error;
};

class InfeasibleRounding : public Error {
 public:
  using Error::Error;
};

class DegenerateCoordinate : public Error {
 public:
  using Error::Error;
};

class TooLarge : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. The message names the offending line or byte offset.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace optd
