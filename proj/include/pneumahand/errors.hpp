#pragma once

#include <stdexcept>
#include <string>

namespace pneumahand {

// Precondition violated by an argument (non-positive volume, pressure out of
// range, joint beyond its limit, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Least-squares fit could not be formed from the supplied data.
class FitError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Data was fitted or loaded but violates a model invariant.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed file or message. `where` is "file:line" when known.
class FormatError : public std::runtime_error {
public:
  FormatError(std::string where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what),
        where_(std::move(where)) {}
  explicit FormatError(const std::string& what) : FormatError("", what) {}

  const std::string& where() const noexcept { return where_; }

private:
  std::string where_;
};

// A physical procedure did not complete (e.g. vent never reached ambient).
class HardwareFault : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Command rejected because the channel or session is in another mode.
class BusyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace pneumahand
