#pragma once

#include <stdexcept>
#include <string>

namespace dphmm {

// Argument or state outside an operation's domain (bad probability, empty
// history, mismatched lengths, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or unreadable input files. Messages name the file and line.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation produced an impossible or non-finite result, e.g. an
// all-zero forward vector or a candidate set with zero total weight.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dphmm
