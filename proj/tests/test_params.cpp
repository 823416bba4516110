#include <doctest.h>

#include "qce/errors.hpp"
#include "qce/params.hpp"

#include <chrono>
#include <cmath>

using namespace qce;

TEST_CASE("theorem input validation") {
  auto ok = validate_theorem_inputs({2, 3.0, 1.2, 0.4});
  CHECK(ok.passed());
  CHECK(ok.beta_hat == doctest::Approx(0.5).epsilon(1e-14));

  auto edge = validate_theorem_inputs({2, 3.0, 1.2, 0.5});
  REQUIRE_FALSE(edge.passed());
  CHECK(edge.first_failure()->name == "beta < betaHat");

  auto low_p = validate_theorem_inputs({2, 2.0, 1.0, 0.1});
  REQUIRE_FALSE(low_p.passed());
  CHECK(low_p.first_failure()->name == "p > n");

  auto zero_beta = validate_theorem_inputs({2, 3.0, 1.2, 0.0});
  CHECK_FALSE(zero_beta.passed());
}

TEST_CASE("smallness bounds for n=2 p=3 alpha=1.2 beta=0.4") {
  // 50-digit reference evaluation of the seven closed forms
  const double expected[7] = {0.176776695297, 0.0577037501269, 0.629960524947, 0.217637640824,
                              0.564724718352, 9.33352287297e-5, 3.03558484351e-16};
  const auto ln = smallness_bounds_ln({2, 3.0, 1.2, 0.4});
  for (int i = 0; i < 7; ++i) {
    CHECK(static_cast<double>(std::exp(ln[i])) == doctest::Approx(expected[i]).epsilon(1e-10));
  }
}

TEST_CASE("paper-mode derivation") {
  const auto t0 = std::chrono::steady_clock::now();
  const InstanceParams P = derive_paper_params({2, 3.0, 1.2, 0.4});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);

  CHECK(P.mode == ParamMode::paper);
  // exact for the binary64 inputs 3.0, 1.2, 0.4
  CHECK(P.d == 1.517792421755932e-16);
  CHECK(P.M == 2125764u);
  CHECK(P.t == 1.6429221773787507e-13);
  CHECK(P.Mprime == 2194116126732781u);
  CHECK(P.beta_achieved > 0.4);
  CHECK(P.beta_achieved < 0.41);
  // the excess over alpha is ~1e-18, below double resolution; the audit
  // compares logs in extended precision
  CHECK(P.alpha_achieved >= 1.2);
  CHECK(P.alpha_achieved < 1.21);
  CHECK(P.q == doctest::Approx(0.136274078391777).epsilon(1e-9));
  CHECK(P.bounds.size() == 7);
  for (double b : P.bounds) CHECK(P.d < b);

  const auto audit = audit_paper_params(P);
  CHECK(audit.passed());
  for (const auto& c : audit.checks) CHECK_MESSAGE(c.passed, c.name);
}

TEST_CASE("paper-mode derivation holds across inputs") {
  const TheoremInputs cases[] = {{2, 3.0, 1.0, 0.1},  {2, 2.5, 1.1, 0.2}, {3, 4.0, 1.1, 1.2},
                                 {3, 3.5, 1.0, 0.5},  {2, 4.0, 1.05, 0.5}};
  for (const auto& in : cases) {
    CAPTURE(in.p);
    CAPTURE(in.alpha);
    CAPTURE(in.beta);
    const InstanceParams P = derive_paper_params(in);
    CHECK(audit_paper_params(P).passed());
    CHECK(P.beta_achieved > in.beta);
    CHECK(P.alpha_achieved > in.alpha);
    CHECK(P.q < 1.0);
  }
}

TEST_CASE("paper-mode derivation rejects invalid inputs") {
  CHECK_THROWS_AS(derive_paper_params({2, 2.0, 1.0, 0.1}), InfeasibleParams);
  // M' beyond 63 bits is reported rather than wrapped
  CHECK_THROWS_AS(derive_paper_params({2, 4.0, 1.05, 0.7}), InfeasibleParams);
}

TEST_CASE("direct-mode worked instance") {
  const InstanceParams P = check_direct_params(2, 2.1, 0.1, 3, 4, 0.27);
  CHECK(P.mode == ParamMode::direct);
  CHECK(P.beta_achieved == doctest::Approx(0.477121254719662).epsilon(1e-12));
  CHECK(P.alpha_achieved == doctest::Approx(1.05877879983768).epsilon(1e-12));
  CHECK(std::abs(P.q - 0.966151318257148) < 1e-9);
  CHECK(std::abs(P.q - sobolev_factor_direct(2, 2.1, 0.1, 3, 4, 0.27)) < 1e-9 * P.q);
  CHECK_FALSE(P.notes.empty());
}

TEST_CASE("direct-mode rejections name the constraint") {
  try {
    check_direct_params(2, 2.1, 0.1, 3, 4, 0.30);
    FAIL("expected InfeasibleParams");
  } catch (const InfeasibleParams& e) {
    CHECK(e.constraint() == "M M' < t^-n");
  }
  try {
    check_direct_params(2, 2.2, 0.1, 3, 4, 0.27);
    FAIL("expected InfeasibleParams");
  } catch (const InfeasibleParams& e) {
    CHECK(e.constraint() == "q < 1");
  }
  CHECK_THROWS_AS(check_direct_params(2, 2.1, 0.1, 10, 4, 0.27), InfeasibleParams);
  CHECK_THROWS_AS(check_direct_params(2, 2.1, 0.1, 3, 10, 0.27), InfeasibleParams);
}

TEST_CASE("single-branch instance") {
  const InstanceParams P = check_direct_params(2, 3.0, 0.1, 1, 1, 0.1);
  CHECK(P.beta_achieved == 0.0);
  CHECK(P.alpha_achieved == 0.0);
  CHECK(P.q == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("log-space and direct q agree") {
  const double ps[] = {2.05, 2.1, 2.15};
  const double ts[] = {0.2, 0.25, 0.27};
  for (double p : ps) {
    for (double t : ts) {
      const double direct = sobolev_factor_direct(2, p, 0.1, 3, 4, t);
      const double viaLog = static_cast<double>(std::exp(
          sobolev_factor_ln(2, p, std::log(0.1L), std::log(static_cast<long double>(t)),
                            std::log(3.0L), std::log(4.0L))));
      CHECK(std::abs(direct - viaLog) <= 1e-9 * direct);
    }
  }
}
