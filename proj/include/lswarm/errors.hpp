#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lswarm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroVectorError : public Error {
 public:
  using Error::Error;
};

class DegeneratePolygonError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Model or scenario content that parsed but violates an invariant.
/// `index()` names the offending element (building, agent...) when known.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, long index = -1)
      : Error(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

class AlreadyCollidingError : public Error {
 public:
  using Error::Error;
};

class InfeasibleAltitudeError : public Error {
 public:
  using Error::Error;
};

class EmptyPreferredAreaError : public Error {
 public:
  using Error::Error;
};

class UnknownPatternError : public Error {
 public:
  using Error::Error;
};

}  // namespace lswarm
