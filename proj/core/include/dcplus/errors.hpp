#pragma once

#include <stdexcept>
#include <string>

namespace dcplus {

/// Malformed case text or unreadable input.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& msg, int line = 0)
        : std::runtime_error(line > 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

/// Violated model invariant (bad bus reference, missing slack, islanded grid, ...).
class GridError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Factorization failed or an inner Woodbury system is singular.
class SingularMatrixError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// AC load flow did not converge where a converged state is required.
class ConvergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid topology action (bad split assignment, unsupported split bus, ...).
class TopologyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace dcplus
