#include <doctest.h>

#include "qce/errors.hpp"
#include "qce/genmap.hpp"
#include "qce/random.hpp"
#include "fixtures.hpp"

#include <chrono>
#include <cmath>

using namespace qce;
using namespace qce::test;

namespace {

// Sample points of a move's frame, away from its inner box.
Vec frame_point(const Move& m, std::uint64_t i) {
  while (true) {
    Vec u(m.support.dim());
    for (int j = 0; j < u.size(); ++j) u[j] = uniform01(99, i, j);
    const Vec x = m.support.at(u);
    if (!m.inner_before.contains_closed(x)) return x;
    i += 1u << 20;
  }
}

}  // namespace

TEST_CASE("frame remap with equal inner boxes is the identity") {
  const Box W = box2(0, 1, 0, 1);
  const Box A = box2(0.4, 0.6, 0.4, 0.6);
  const Move m = build_frame_remap(W, A, A);
  std::size_t hint = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const Vec x = frame_point(m, i);
    CHECK((m.apply(x, hint) - x).norm() < 1e-14);
  }
}

TEST_CASE("frame remap moving the inner box across the support") {
  const Box W = box2(0, 10, 0, 10);
  const Box A = box2(8, 9, 8, 9);
  const Box B = box2(1, 2, 1, 2);
  const Move m = build_frame_remap(W, A, B);
  CHECK_NOTHROW(validate_move(m));
  std::size_t hint = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const Vec y = sample_box_boundary(W, 5, i);
    CHECK((m.apply(y, hint) - y).norm() <= 1e-12);
    const Vec x = sample_box_boundary(A, 6, i);
    CHECK((m.apply(x, hint) - (x - v2(7, 7))).norm() <= 1e-12);
  }
}

TEST_CASE("frame remap with anisotropic inner rescaling") {
  const Box W = box2(0, 1, 0, 1);
  const Box A = box2(0.4, 0.6, 0.4, 0.6);
  const Box B = box2(0.3, 0.5, 0.2, 0.8);
  const Move m = build_frame_remap(W, A, B);
  CHECK_NOTHROW(validate_move(m));
  CHECK(m.inner_map.linear(1, 1) == doctest::Approx(3.0));
}

TEST_CASE("three-dimensional frame remap validates") {
  Vec lo = Vec::Zero(3), hi = Vec::Constant(3, 1.0);
  const Box W(lo, hi);
  const Box A = Box::cube(Vec::Constant(3, 0.3), 0.1);
  const Box B = Box::cube(Vec::Constant(3, 0.7), 0.05);
  const Move m = build_frame_remap(W, A, B);
  // per layer: 6 faces, 2 triangles each, 3 simplices per prism
  CHECK(m.cells.size() == static_cast<std::size_t>(m.layers) * 6 * 2 * 3);
  CHECK(m.rings.size() == static_cast<std::size_t>(m.layers) + 1);
}

TEST_CASE("twist of a square by a quarter turn") {
  const Box W = box2(-3, 3, -3, 3);
  const Box A = box2(-1, 1, -1, 1);
  const auto rho = SignedPermutation::quarter_turn(2, 0, 1);
  const Move m = build_twist(W, A, rho, 4);
  CHECK(m.layers <= 16);
  std::size_t hint = 0;
  const Vec corner = m.apply(v2(1, 1), hint);
  CHECK((corner - v2(-1, 1)).norm() < 1e-12);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const Vec y = sample_box_boundary(W, 8, i);
    CHECK((m.apply(y, hint) - y).norm() <= 1e-12);
    const Vec x = sample_box_boundary(A, 9, i);
    CHECK((m.apply(x, hint) - rho.apply(x)).norm() <= 1e-12);
  }
}

TEST_CASE("identity twist") {
  const Move m = build_twist(box2(-3, 3, -3, 3), box2(-1, 1, -1, 1), SignedPermutation::identity(2), 8);
  std::size_t hint = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Vec x = frame_point(m, i);
    CHECK((m.apply(x, hint) - x).norm() < 1e-14);
  }
}

TEST_CASE("twist in a thin frame fails validation") {
  CHECK_THROWS_AS(build_twist(box2(-1.05, 1.05, -1.05, 1.05), box2(-1, 1, -1, 1),
                              SignedPermutation::quarter_turn(2, 0, 1), 4),
                  MoveValidationFailure);
}

TEST_CASE("quarter-turn factorization") {
  for (int n = 2; n <= 4; ++n) {
    const auto c = SignedPermutation::quarter_turn(n, 0, n - 1) * SignedPermutation::quarter_turn(n, 1, 0);
    const auto f = quarter_turn_factors(c);
    auto prod = SignedPermutation::identity(n);
    for (const auto& q : f) prod = q * prod;
    CHECK(prod == c);
  }
  CHECK(quarter_turn_factors(SignedPermutation::identity(3)).empty());
}

TEST_CASE("worked instance generating map") {
  const auto t0 = std::chrono::steady_clock::now();
  const GeneratingMap& gm = w1_map();
  MESSAGE("planned in " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                        << " s, " << gm.script.size() << " moves, eps " << gm.epsilon);
  CHECK(gm.hole_count() == 12);
  CHECK(gm.rotation == SignedPermutation::quarter_turn(2, 0, 1));

  // per-hole pipeline lengths
  std::size_t legs = 0, twists = 0, remaps = 0;
  for (const auto& m : gm.script) {
    legs += m.kind == MoveKind::corridorTranslate;
    twists += m.kind == MoveKind::twist;
    remaps += m.kind == MoveKind::frameRemap;
  }
  CHECK(twists == 12);
  CHECK(remaps == 24);
  CHECK(legs <= 12 * 40);

  const auto rep = validate_generating_map(gm);
  for (const auto& c : rep.checks) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
}

TEST_CASE("phi outside Q is the exterior map") {
  const GeneratingMap& gm = w1_map();
  const Vec x = v2(-1, -1);
  const auto r = evaluate_phi(gm, x);
  CHECK(r.point == gm.T.apply(x));
  CHECK(r.jacobian == gm.T.linear);
}

TEST_CASE("phi refuses points inside holes") {
  const GeneratingMap& gm = w1_map();
  const Vec c = gm.hole_box(5).center();
  try {
    evaluate_phi(gm, c);
    FAIL("expected PointInHole");
  } catch (const PointInHole& e) {
    CHECK(e.hole() == 5);
  }
}

TEST_CASE("phi is affine away from cell boundaries") {
  const GeneratingMap& gm = w1_map();
  PhiEvaluator ev(gm);
  int tested = 0;
  for (std::uint64_t i = 0; i < 2000 && tested < 300; ++i) {
    const Vec a = sample_shell(gm, 21, i);
    Vec dir(2);
    dir << uniform01(22, i) - 0.5, uniform01(23, i) - 0.5;
    const Vec b = a + 1e-4 * dir;
    const Vec m = 0.5 * (a + b);
    if (gm.product.locate(b, false)) continue;
    const auto ra = ev.eval(a, true);
    const auto rb = ev.eval(b, true);
    const auto rm = ev.eval(m, true);
    if (ra.trace != rb.trace || ra.trace != rm.trace) continue;
    ++tested;
    const Vec mid = 0.5 * (ra.point + rb.point);
    // relative to the image chord, with a floor for rounding at the scale of S
    CHECK((rm.point - mid).norm() <= 1e-9 * (rb.point - ra.point).norm() + 1e-13 * gm.S.diameter());
  }
  CHECK(tested > 100);
}

TEST_CASE("inverted simplex is caught with its id") {
  GeneratingMap gm = w1_map();
  Move& m = gm.script[3];
  AffinePiece& cell = m.cells[2];
  cell = AffinePiece(cell.domain, {cell.target[1], cell.target[0], cell.target[2]});
  CHECK_THROWS_AS(validate_move(m, 3), MoveValidationFailure);
  try {
    validate_move(m, 3);
  } catch (const MoveValidationFailure& e) {
    CHECK(e.move() == 3);
    CHECK(e.simplex() == 2);
  }
  GenmapValidationOptions opt;
  opt.injectivity_pairs = 100;
  opt.orientation_samples = 100;
  opt.boundary_samples = 10;
  const auto rep = validate_generating_map(gm, opt);
  CHECK_FALSE(rep.passed());
  bool found = false;
  for (const auto& c : rep.checks) {
    if (c.name == "orientation audit") {
      CHECK_FALSE(c.passed);
      CHECK(c.detail.find("move 3 simplex 2") != std::string::npos);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("empty script gives the exterior map everywhere") {
  GeneratingMap gm = w1_map();
  gm.script.clear();
  PhiEvaluator ev(gm);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Vec x = sample_shell(gm, 31, i);
    const auto r = ev.eval(x);
    CHECK((r.point - gm.T.apply(x)).norm() < 1e-15);
    CHECK(r.jacobian == gm.T.linear);
  }
}

TEST_CASE("single-hole instance") {
  const auto inst = build_instance_systems(check_direct_params(2, 2.5, 0.3, 1, 1, 0.4));
  const GeneratingMap gm = plan_moves(inst);
  REQUIRE(gm.script.size() == 4);
  CHECK(gm.script[0].kind == MoveKind::frameRemap);
  CHECK(gm.script[1].kind == MoveKind::corridorTranslate);
  CHECK(gm.script[2].kind == MoveKind::twist);
  CHECK(gm.script[3].kind == MoveKind::frameRemap);
  GenmapValidationOptions opt;
  opt.injectivity_pairs = 5000;
  const auto rep = validate_generating_map(gm, opt);
  for (const auto& c : rep.checks) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
}

TEST_CASE("target gaps far below the domain gaps") {
  // p = n makes q = M M' t^n < 1 whatever t is
  const auto inst = build_instance_systems(check_direct_params(2, 2.0, 0.1, 1, 2, 0.70710))
  ;
  CHECK(inst.target_cert.pairwise_gap < 1e-4 * 0.1);
  CHECK_THROWS_AS(plan_moves(inst), PlanningFailure);
}

TEST_CASE("paper-mode instances are rejected by the planner") {
  const auto inst = build_instance_systems(derive_paper_params({2, 3.0, 1.2, 0.4}));
  CHECK_THROWS_AS(plan_moves(inst), PlanningFailure);
}

TEST_CASE("three-dimensional instance plans and validates") {
  const auto inst = build_instance_systems(check_direct_params(3, 3.5, 0.1, 2, 2, 0.3));
  const GeneratingMap gm = plan_moves(inst);
  GenmapValidationOptions opt;
  opt.boundary_samples = 200;
  opt.injectivity_pairs = 2000;
  opt.orientation_samples = 1000;
  const auto rep = validate_generating_map(gm, opt);
  for (const auto& c : rep.checks) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
}
