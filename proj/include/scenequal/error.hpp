#pragma once

#include <stdexcept>
#include <string>

namespace scenequal {

/// Runtime failure (bad data, IO, numerical abort). Maps to CLI exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or usage. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Lookup of a (scene, method) key or branch that does not exist.
class KeyNotFound : public Error {
 public:
  using Error::Error;
};

/// Unreadable or corrupted on-disk artifact (checkpoint, manifest, cache).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace scenequal
