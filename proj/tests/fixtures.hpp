#pragma once

#include "qce/genmap.hpp"
#include "qce/ifs.hpp"

namespace qce::test {

inline Vec v2(double a, double b) {
  Vec x(2);
  x << a, b;
  return x;
}

inline Box box2(double x0, double x1, double y0, double y1) { return Box(v2(x0, y0), v2(x1, y1)); }

/// n=2, p=2.1, d=0.1, M=3, M'=4, t=0.27.
inline const ConstructionInstance& w1() {
  static const ConstructionInstance inst =
      build_instance_systems(check_direct_params(2, 2.1, 0.1, 3, 4, 0.27));
  return inst;
}

inline const GeneratingMap& w1_map() {
  static const GeneratingMap gm = plan_moves(w1());
  return gm;
}

}  // namespace qce::test
