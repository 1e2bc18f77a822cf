#pragma once

#include <stdexcept>
#include <string>

namespace pvdyn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model or constraint document.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Invalid robot model, state or argument (dimension mismatch, non-PD joint inertia, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// A factorization met a pivot below tolerance. `factorization()` names the
/// matrix that failed (e.g. "L0^A", "D[3]", "KKT").
class RankDeficientError : public Error {
 public:
  RankDeficientError(std::string factorization, const std::string& detail)
      : Error("rank-deficient " + factorization + ": " + detail),
        factorization_(std::move(factorization)) {}
  const std::string& factorization() const { return factorization_; }

 private:
  std::string factorization_;
};

/// More than six multipliers propagated onto a single link acceleration.
class OverConstrainedError : public Error {
 public:
  using Error::Error;
};

/// A solver failure during time stepping, tagged with the simulation time.
class SimulationError : public Error {
 public:
  SimulationError(double time, const std::string& what)
      : Error("t = " + std::to_string(time) + " s: " + what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace pvdyn
