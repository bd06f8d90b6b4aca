#pragma once

#include <stdexcept>
#include <string>

namespace cjscore {

// Base for every error raised by the library. Subclasses mark the failure
// classes callers are expected to branch on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

// Model output could not be interpreted; the caller may re-ask.
class ParseFailure : public Error {
 public:
  using Error::Error;
};

// Model output was parsed but the score is not on the permitted scale.
class OutOfScale : public Error {
 public:
  using Error::Error;
};

// Comparative response declared the two essays equal.
class TieResponse : public Error {
 public:
  using Error::Error;
};

class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

class DisconnectedGraph : public Error {
 public:
  using Error::Error;
};

// An item won (or lost) every comparison it took part in, so the unpenalized
// likelihood has no finite maximizer.
class SeparationError : public Error {
 public:
  using Error::Error;
};

class DegenerateSpread : public Error {
 public:
  using Error::Error;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

}  // namespace cjscore
