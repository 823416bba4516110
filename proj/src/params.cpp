#include "qce/params.hpp"

#include "qce/errors.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <sstream>

namespace qce {

namespace {

constexpr long double kLn2 = 0.693147180559945309417232121458176568L;
constexpr long double kLn3 = 1.098612288668109691395245236922525704L;

std::string fmt(long double v) {
  std::ostringstream os;
  os.precision(17);
  os << static_cast<double>(v);
  return os.str();
}

void add(ValidationReport& r, std::string name, bool ok, std::string detail) {
  r.checks.push_back({std::move(name), ok, std::move(detail)});
}

/// Snap exp(value_ln) to a double when it is a normal number so that the
/// stored nominal value is the canonical one; returns the (possibly updated)
/// log and writes the nominal value.
long double snap(long double value_ln, double& nominal) {
  const long double v = std::exp(value_ln);
  nominal = static_cast<double>(v);
  if (nominal >= DBL_MIN && std::isfinite(nominal)) return std::log(static_cast<long double>(nominal));
  return value_ln;
}

/// ln(a + b) from ln a, ln b.
long double log_add(long double a_ln, long double b_ln) {
  const long double hi = std::max(a_ln, b_ln);
  const long double lo = std::min(a_ln, b_ln);
  return hi + std::log1p(std::exp(lo - hi));
}

void fill_achieved(InstanceParams& p) {
  p.beta_achieved = p.M <= 1 ? 0.0 : static_cast<double>(p.M_ln / -p.d_ln);
  p.alpha_achieved = p.Mprime <= 1 ? 0.0 : static_cast<double>(p.Mprime_ln / -p.t_ln);
  p.q_ln = sobolev_factor_ln(p.n, p.p, p.d_ln, p.t_ln, p.M_ln, p.Mprime_ln);
  p.q = static_cast<double>(std::exp(p.q_ln));
}

void add_consistency_note(InstanceParams& p) {
  if (p.p <= p.n - 1) return;
  const double cap = p.p / (p.p - (p.n - 1));
  std::ostringstream os;
  os.precision(6);
  os << "fiber-image dimension " << p.alpha_achieved << (p.alpha_achieved <= cap ? " <= " : " > ")
     << "p/(p-(n-1)) = " << cap
     << (p.alpha_achieved <= cap ? " (consistent with the Sobolev upper bound)"
                                 : " (exceeds the Sobolev upper bound; check inputs)");
  p.notes.push_back(os.str());
}

}  // namespace

double beta_hat(int n, double p, double alpha) { return (n - 1) - p * (1.0 - 1.0 / alpha); }

bool ValidationReport::passed() const { return first_failure() == nullptr; }

const ConstraintCheck* ValidationReport::first_failure() const {
  for (const auto& c : checks) {
    if (!c.passed) return &c;
  }
  return nullptr;
}

const char* to_string(ParamMode mode) { return mode == ParamMode::paper ? "paper" : "direct"; }

ValidationReport validate_theorem_inputs(const TheoremInputs& in) {
  ValidationReport r;
  r.beta_hat = beta_hat(in.n, in.p, in.alpha);
  add(r, "n >= 2", in.n >= 2, "n = " + std::to_string(in.n));
  add(r, "p > n", in.p > in.n, "p = " + fmt(in.p));
  add(r, "alpha >= 1", in.alpha >= 1.0, "alpha = " + fmt(in.alpha));
  // strict bounds computed from the inputs must hold with a relative margin,
  // so inputs on a bound up to rounding are rejected
  constexpr double kStrict = 1e-12;
  const double cap = in.p / (in.p - (in.n - 1));
  const bool cap_ok = in.p > in.n - 1 && in.alpha < cap - kStrict * cap;
  add(r, "alpha < p/(p-(n-1))", cap_ok,
      in.p > in.n - 1 ? "cap = " + fmt(in.p / (in.p - (in.n - 1))) : "p <= n-1");
  add(r, "beta > 0", in.beta > 0.0, "beta = " + fmt(in.beta));
  add(r, "beta < betaHat", in.beta < r.beta_hat - kStrict * std::abs(r.beta_hat),
      "beta = " + fmt(in.beta) + ", betaHat = " + fmt(r.beta_hat));
  return r;
}

std::array<long double, 7> smallness_bounds_ln(const TheoremInputs& in) {
  const long double n = in.n;
  const long double p = in.p;
  const long double a = in.alpha;
  const long double b = in.beta;
  const long double bh = static_cast<long double>(in.n - 1) - p * (1.0L - 1.0L / a);
  return {
      -kLn2 / b,
      std::log(std::expm1(b * kLn2)) / b,
      -b * kLn2 / (n - 1.0L - b),
      -(1.0L + a) * kLn2,
      std::log1p(-std::exp(-a * kLn2)),
      (-b * kLn2 - n * kLn3) / (n / a - b - 1.0L),
      (-b * kLn2 - p * kLn3) / (bh - b),
  };
}

long double sobolev_factor_ln(int n, double p, long double d_ln, long double t_ln,
                              long double M_ln, long double Mprime_ln) {
  return M_ln + Mprime_ln + static_cast<long double>(p) * (t_ln - d_ln) +
         static_cast<long double>(n) * d_ln;
}

double sobolev_factor_direct(int n, double p, double d, std::uint64_t M, std::uint64_t Mprime,
                             double t) {
  return static_cast<double>(M) * static_cast<double>(Mprime) * std::pow(t / d, p) *
         std::pow(d, n);
}

InstanceParams derive_paper_params(const TheoremInputs& in) {
  const ValidationReport v = validate_theorem_inputs(in);
  if (const auto* bad = v.first_failure()) throw InfeasibleParams(bad->name, bad->detail);

  InstanceParams out;
  out.mode = ParamMode::paper;
  out.n = in.n;
  out.p = in.p;
  out.alpha = in.alpha;
  out.beta = in.beta;

  const auto bounds_ln = smallness_bounds_ln(in);
  for (long double b : bounds_ln) out.bounds.push_back(static_cast<double>(std::exp(b)));
  const long double min_ln = *std::min_element(bounds_ln.begin(), bounds_ln.end());
  out.d_ln = snap(min_ln - kLn2, out.d);

  const long double a = in.alpha;
  const long double b = in.beta;

  // M: smallest integer strictly above (1/d)^beta, audited at +-1.
  const long double m_target = -b * out.d_ln;
  if (m_target > 63.0L * kLn2) throw InfeasibleParams("M representable", "(1/d)^beta >= 2^63");
  auto m = static_cast<std::uint64_t>(std::floor(std::exp(m_target))) + 1;
  while (m > 1 && std::log(static_cast<long double>(m - 1)) > m_target) --m;
  while (std::log(static_cast<long double>(m)) <= m_target) ++m;
  out.M = m;
  out.M_ln = std::log(static_cast<long double>(m));

  // t: midpoint of (2 d^(1/alpha), min{2^(-1/alpha), (2^alpha-1)^(1/alpha), 3 d^(1/alpha)}).
  const long double lo_ln = kLn2 + out.d_ln / a;
  const long double hi_ln = std::min({-kLn2 / a, std::log(std::expm1(a * kLn2)) / a,
                                      kLn3 + out.d_ln / a});
  if (!(lo_ln < hi_ln)) throw InfeasibleParams("t interval nonempty", "empty interval");
  out.t_ln = snap(log_add(lo_ln, hi_ln) - kLn2, out.t);

  // M': smallest integer >= (1/t)^alpha, audited at +-1.
  const long double mp_target = -a * out.t_ln;
  if (mp_target > 63.0L * kLn2) throw InfeasibleParams("M' representable", "(1/t)^alpha >= 2^63");
  auto mp = static_cast<std::uint64_t>(std::ceil(std::exp(mp_target)));
  while (mp > 1 && std::log(static_cast<long double>(mp - 1)) >= mp_target) --mp;
  while (std::log(static_cast<long double>(mp)) < mp_target) ++mp;
  out.Mprime = mp;
  out.Mprime_ln = std::log(static_cast<long double>(mp));

  fill_achieved(out);
  add_consistency_note(out);

  const ValidationReport audit = audit_paper_params(out);
  if (const auto* bad = audit.first_failure()) throw InfeasibleParams(bad->name, bad->detail);
  return out;
}

ValidationReport audit_paper_params(const InstanceParams& P) {
  ValidationReport r;
  if (!P.alpha || !P.beta) {
    add(r, "declared alpha and beta", false, "paper-mode audit needs alpha and beta");
    return r;
  }
  const long double a = *P.alpha;
  const long double b = *P.beta;
  const long double n = P.n;
  const long double p = P.p;
  const long double bh = beta_hat(P.n, P.p, *P.alpha);
  r.beta_hat = static_cast<double>(bh);
  const long double d = P.d_ln;
  const long double t = P.t_ln;

  const TheoremInputs in{P.n, P.p, *P.alpha, *P.beta};
  const auto bounds = smallness_bounds_ln(in);
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    add(r, "d < bound(" + std::to_string(i + 1) + ")", d < bounds[i],
        "ln d = " + fmt(d) + ", ln bound = " + fmt(bounds[i]));
  }

  const long double x_beta = -b * d;
  add(r, "2 < (1/d)^beta", kLn2 < x_beta, "ln (1/d)^beta = " + fmt(x_beta));
  add(r, "(1/d)^beta < M", x_beta < P.M_ln, "ln M - ln (1/d)^beta = " + fmt(P.M_ln - x_beta));
  add(r, "M < (2/d)^beta", P.M_ln < b * (kLn2 - d), "ln M = " + fmt(P.M_ln));
  add(r, "(2/d)^beta < (1/d)^(n-1)", b * (kLn2 - d) < -(n - 1) * d, "");

  const long double t_lo = kLn2 + d / a;
  add(r, "2 d^(1/alpha) < t", t_lo < t, "ln t = " + fmt(t));
  add(r, "t < 2^(-1/alpha)", t < -kLn2 / a, "");
  add(r, "t < (2^alpha - 1)^(1/alpha)", t < std::log(std::expm1(a * kLn2)) / a, "");
  add(r, "t < 3 d^(1/alpha)", t < kLn3 + d / a, "");

  const long double x_alpha = -a * t;
  add(r, "2 < (1/t)^alpha", kLn2 < x_alpha, "");
  add(r, "(1/t)^alpha <= M'", x_alpha <= P.Mprime_ln,
      "ln M' - ln (1/t)^alpha = " + fmt(P.Mprime_ln - x_alpha));
  add(r, "M' < (2/t)^alpha", P.Mprime_ln < a * (kLn2 - t), "");
  add(r, "(2/t)^alpha < 1/d", a * (kLn2 - t) < -d, "");
  add(r, "M M' < t^-n", P.M_ln + P.Mprime_ln < -n * t,
      "ln(M M' t^n) = " + fmt(P.M_ln + P.Mprime_ln + n * t));

  const long double q_ln = sobolev_factor_ln(P.n, P.p, d, t, P.M_ln, P.Mprime_ln);
  add(r, "q < 1", q_ln < 0.0L, "q = " + fmt(std::exp(q_ln)));
  add(r, "q <= 2^beta 3^p d^(betaHat-beta)", q_ln <= b * kLn2 + p * kLn3 + (bh - b) * d,
      "ln bound = " + fmt(b * kLn2 + p * kLn3 + (bh - b) * d));
  add(r, "dim E > beta", P.M_ln > b * -d, "ln M - beta ln(1/d) = " + fmt(P.M_ln + b * d));
  add(r, "fiber-image dimension > alpha", P.Mprime_ln > a * -t,
      "ln M' - alpha ln(1/t) = " + fmt(P.Mprime_ln + a * t));
  return r;
}

InstanceParams check_direct_params(int n, double p, double d, std::uint64_t M,
                                   std::uint64_t Mprime, double t) {
  if (n < 2) throw InfeasibleParams("n >= 2", "n = " + std::to_string(n));
  if (!(d > 0.0 && d < 1.0)) throw InfeasibleParams("0 < d < 1", "d = " + fmt(d));
  if (!(t > 0.0 && t < 1.0)) throw InfeasibleParams("0 < t < 1", "t = " + fmt(t));
  if (M < 1 || Mprime < 1) throw InfeasibleParams("M, M' >= 1", "branch counts must be positive");
  if (!(p > 0.0)) throw InfeasibleParams("p > 0", "p = " + fmt(p));

  InstanceParams out;
  out.mode = ParamMode::direct;
  out.n = n;
  out.p = p;
  out.d = d;
  out.t = t;
  out.M = M;
  out.Mprime = Mprime;
  out.d_ln = std::log(static_cast<long double>(d));
  out.t_ln = std::log(static_cast<long double>(t));
  out.M_ln = std::log(static_cast<long double>(M));
  out.Mprime_ln = std::log(static_cast<long double>(Mprime));
  fill_achieved(out);

  const long double nn = n;
  if (!(out.M_ln < -(nn - 1) * out.d_ln)) {
    throw InfeasibleParams("M < d^-(n-1)", "M = " + std::to_string(M) + ", d^-(n-1) = " +
                                               fmt(std::exp(-(nn - 1) * out.d_ln)));
  }
  if (!(out.Mprime_ln < -out.d_ln)) {
    throw InfeasibleParams("M' < 1/d", "M' = " + std::to_string(Mprime) + ", 1/d = " + fmt(1.0 / d));
  }
  if (!(out.M_ln + out.Mprime_ln < -nn * out.t_ln)) {
    throw InfeasibleParams("M M' < t^-n", "M M' = " + std::to_string(M * Mprime) +
                                              ", t^-n = " + fmt(std::exp(-nn * out.t_ln)));
  }
  if (!(out.q_ln < 0.0L)) throw InfeasibleParams("q < 1", "q = " + fmt(out.q));
  add_consistency_note(out);
  return out;
}

}  // namespace qce
