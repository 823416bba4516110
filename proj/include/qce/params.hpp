#pragma once

// Parameter derivation for the construction. In paper mode every quantity is
// derived from (n, p, alpha, beta) by the deterministic rules below and all
// comparisons run on natural logarithms in extended precision, since d and t
// are far below 1e-12 for ordinary inputs. Direct mode accepts a hand-picked
// small instance and certifies only the structural constraints.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qce {

struct TheoremInputs {
  int n = 2;
  double p = 3.0;
  double alpha = 1.0;
  double beta = 0.0;
};

/// (n-1) - p (1 - 1/alpha)
double beta_hat(int n, double p, double alpha);

struct ConstraintCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ConstraintCheck> checks;
  double beta_hat = 0.0;

  bool passed() const;
  /// First failing check, or nullptr.
  const ConstraintCheck* first_failure() const;
};

enum class ParamMode { paper, direct };

struct InstanceParams {
  int n = 2;
  double p = 0.0;
  double d = 0.0;
  std::uint64_t M = 1;
  std::uint64_t Mprime = 1;
  double t = 0.0;
  double beta_achieved = 0.0;
  double alpha_achieved = 0.0;
  double q = 0.0;
  ParamMode mode = ParamMode::direct;
  /// The seven evaluated right-hand sides of the smallness requirements on d
  /// (paper mode only).
  std::vector<double> bounds;

  // Canonical logarithms. d and t are also exactly representable doubles
  // whenever they are normal numbers; the logs are then computed from them.
  long double d_ln = 0.0L;
  long double t_ln = 0.0L;
  long double M_ln = 0.0L;
  long double Mprime_ln = 0.0L;
  long double q_ln = 0.0L;

  /// Target dimensions the instance is meant to beat. Always present in paper
  /// mode; optional for direct instances.
  std::optional<double> alpha;
  std::optional<double> beta;

  /// Informational notes (never errors), e.g. the upper-bound consistency note.
  std::vector<std::string> notes;
};

/// Report-style check of the theorem hypotheses; never throws.
ValidationReport validate_theorem_inputs(const TheoremInputs& in);

/// Natural logs of the seven smallness bounds on d, in order (1)..(7).
std::array<long double, 7> smallness_bounds_ln(const TheoremInputs& in);

/// Derive (d, M, t, M') by the deterministic rules: d is half the smallest
/// bound, M and M' are the smallest admissible integers, t is the midpoint of
/// its admissible interval. Throws InfeasibleParams if the inputs fail
/// validation or any derived inequality does not hold.
InstanceParams derive_paper_params(const TheoremInputs& in);

/// Every inequality a paper-mode instance must satisfy, evaluated in log space.
ValidationReport audit_paper_params(const InstanceParams& params);

/// Certify a hand-picked instance against the structural constraints
/// M < d^-(n-1), M' < 1/d, M M' < t^-n and q < 1.
InstanceParams check_direct_params(int n, double p, double d, std::uint64_t M,
                                   std::uint64_t Mprime, double t);

/// ln of M M' (t/d)^p d^n.
long double sobolev_factor_ln(int n, double p, long double d_ln, long double t_ln,
                              long double M_ln, long double Mprime_ln);

/// M M' (t/d)^p d^n evaluated directly in double precision.
double sobolev_factor_direct(int n, double p, double d, std::uint64_t M, std::uint64_t Mprime,
                             double t);

const char* to_string(ParamMode mode);

}  // namespace qce
