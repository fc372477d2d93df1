#pragma once

#include <stdexcept>
#include <string>

namespace optcon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad JSON, unknown field kind, wrong shapes.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid input that violates a standing assumption
/// (disconnected graph, non-positive gain, negative multiplier, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite rate encountered while integrating.
class IntegrationError : public Error {
 public:
  IntegrationError(double t, std::size_t agent, std::string quantity,
                   const std::string& what)
      : Error(what), t_(t), agent_(agent), quantity_(std::move(quantity)) {}

  double time() const { return t_; }
  std::size_t agent() const { return agent_; }
  const std::string& quantity() const { return quantity_; }

 private:
  double t_;
  std::size_t agent_;
  std::string quantity_;
};

/// The centralized solver could not produce a solution.
class OracleError : public Error {
 public:
  using Error::Error;
};

}  // namespace optcon
