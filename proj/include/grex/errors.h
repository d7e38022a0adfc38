#ifndef GREX_ERRORS_H_
#define GREX_ERRORS_H_

#include <stdexcept>
#include <string>

namespace grex {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The sentence has no token of the class an anomaly kind operates on.
class NoEligibleToken : public Error {
 public:
  using Error::Error;
};

class InsufficientUniqueSentences : public Error {
 public:
  using Error::Error;
};

// Malformed model, policy, tree, or record text.
class ParseError : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class NoGatedTrials : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace grex

#endif  // GREX_ERRORS_H_
