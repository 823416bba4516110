#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace qce {

/// Base of every error raised by the library. Each subclass corresponds to
/// one failure mode of the construction and carries enough context to act on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleParams : public Error {
 public:
  InfeasibleParams(std::string constraint, const std::string& detail)
      : Error("infeasible parameters: " + constraint + " (" + detail + ")"),
        constraint_(std::move(constraint)) {}

  const std::string& constraint() const { return constraint_; }

 private:
  std::string constraint_;
};

/// Strong separation failed. For an overlap the witness is the pair of
/// offending map indices; for a containment failure both entries hold the
/// index of the map whose image leaves the domain box.
class SeparationViolation : public Error {
 public:
  enum class Kind { overlap, containment };

  SeparationViolation(Kind kind, std::size_t first, std::size_t second,
                      const std::string& detail)
      : Error("strong separation violated: " + detail),
        kind_(kind),
        witness_(first, second) {}

  Kind kind() const { return kind_; }
  std::pair<std::size_t, std::size_t> witness() const { return witness_; }

 private:
  Kind kind_;
  std::pair<std::size_t, std::size_t> witness_;
};

class BadAddress : public Error {
 public:
  using Error::Error;
};

class MoveValidationFailure : public Error {
 public:
  MoveValidationFailure(std::size_t move, std::size_t simplex, const std::string& detail)
      : Error("move " + std::to_string(move) + ", simplex " + std::to_string(simplex) +
              ": " + detail),
        move_(move),
        simplex_(simplex) {}

  std::size_t move() const { return move_; }
  std::size_t simplex() const { return simplex_; }

 private:
  std::size_t move_;
  std::size_t simplex_;
};

class PlanningFailure : public Error {
 public:
  using Error::Error;
};

class PointInHole : public Error {
 public:
  PointInHole(std::size_t hole, const std::string& detail)
      : Error("point lies in open hole " + std::to_string(hole) + ": " + detail), hole_(hole) {}

  std::size_t hole() const { return hole_; }

 private:
  std::size_t hole_;
};

class LocationFailure : public Error {
 public:
  using Error::Error;
};

class NeedsGeneratingMap : public Error {
 public:
  using Error::Error;
};

class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class DivergentSeries : public Error {
 public:
  explicit DivergentSeries(double q)
      : Error("Sobolev series diverges: q = " + std::to_string(q) + " >= 1"), q_(q) {}

  double q() const { return q_; }

 private:
  double q_;
};

/// A stored artifact (instance, construction, report) is malformed or does
/// not match what its parameters reproduce.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace qce
