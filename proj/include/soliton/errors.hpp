#ifndef SOLITON_ERRORS_HPP
#define SOLITON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace soliton {

// A stated hypothesis of the underlying construction fails for the given
// inputs (bad bracket, data too large, z0 too small, ...). The CLI maps
// these to exit code 2.
class HypothesisError : public std::runtime_error {
public:
  explicit HypothesisError(const std::string& what) : std::runtime_error(what) {}
};

// A solver failed to converge or produced unusable numbers. Exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Inputs outside the operation's domain (range too short, grid too coarse).
class DomainError : public std::invalid_argument {
public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace soliton

#endif
