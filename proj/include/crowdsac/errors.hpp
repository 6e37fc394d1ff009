#pragma once

#include <stdexcept>
#include <string>

namespace crowdsac {

// Every error carries a category so the C boundary can map it to a code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Layer/shape/key mismatches and invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// API misuse: stepping a finished episode, non-scalar loss, ...
class UsageError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class SpawnError : public Error {
 public:
  using Error::Error;
};

}  // namespace crowdsac
