#pragma once

#include <stdexcept>
#include <string>

namespace gridtsc {

/// Base class for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scenario, episode or module configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A split (or other bounded quantity) fell outside its allowed range.
class BoundsError : public Error {
 public:
  using Error::Error;
};

class InvalidActionError : public Error {
 public:
  using Error::Error;
};

class EpisodeFinishedError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// Call-order or shape contract broken by the caller (e.g. too many cycle samples).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared while training a learner.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridtsc
