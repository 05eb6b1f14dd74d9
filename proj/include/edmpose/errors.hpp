#pragma once

#include <stdexcept>
#include <string>

namespace edmpose {

// Invalid inputs: bad matrices, inconsistent scenes, malformed files.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Fewer than r+1 anchors, or anchors affinely degenerate.
class AlignmentUnderdeterminedError : public std::runtime_error {
 public:
  explicit AlignmentUnderdeterminedError(const std::string& what)
      : std::runtime_error(what) {}
};

// All horizontal projections of the priors collapse onto the origin.
class PlaneUndeterminedError : public std::runtime_error {
 public:
  explicit PlaneUndeterminedError(const std::string& what)
      : std::runtime_error(what) {}
};

// Distance projection radicand went negative; carries the deficit.
class InfeasibleProjectionError : public std::runtime_error {
 public:
  InfeasibleProjectionError(const std::string& what, double deficit)
      : std::runtime_error(what), deficit_(deficit) {}
  double deficit() const { return deficit_; }

 private:
  double deficit_;
};

// A required (target, anchor) range is missing. Indices are 1-based,
// matching the scene file convention.
class IncompleteMeasurementError : public std::runtime_error {
 public:
  IncompleteMeasurementError(const std::string& what, int i, int j)
      : std::runtime_error(what), i_(i), j_(j) {}
  int target_index() const { return i_; }
  int anchor_index() const { return j_; }

 private:
  int i_;
  int j_;
};

// The penalized objective increased between outer iterations. This is an
// implementation bug, not a data condition.
class DescentViolationError : public std::logic_error {
 public:
  explicit DescentViolationError(const std::string& what)
      : std::logic_error(what) {}
};

// Anchor geometry cannot determine a unique point (SR-LS).
class UnderdeterminedError : public std::runtime_error {
 public:
  explicit UnderdeterminedError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace edmpose
