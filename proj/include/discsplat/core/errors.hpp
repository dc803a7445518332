#pragma once

#include <stdexcept>
#include <string>

namespace discsplat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter violates its documented domain (non-unit quaternion, bad scale).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Input images or maps do not match each other (dimensions, resolution).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Render buffers were produced from a different map revision or view.
class StaleSnapshot : public Error {
 public:
  using Error::Error;
};

/// Frame-to-model alignment did not find enough correspondences.
class TrackingLost : public Error {
 public:
  using Error::Error;
};

/// Dataset, manifest or PLY could not be read.
class LoadError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace discsplat
