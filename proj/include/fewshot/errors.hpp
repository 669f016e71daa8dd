#pragma once

#include <stdexcept>
#include <string>

namespace fewshot {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, inconsistent shapes, infeasible configurations.
/// The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Network failure that survived the retry policy, or a connection that never
/// came up. Exit code 1.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The provider rejected our credentials. Never retried.
class AuthError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// The provider answered with a well-formed but invalid response, e.g.
/// inconsistent embedding dimensions within a batch.
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Head fitting failed (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace fewshot
