#pragma once

// Linear foot placement: the next foothold, relative to the CoM at touchdown,
// is an affine function of the CoM velocity.

#include <cmath>
#include <string>

#include "lipwalk/lip.hpp"

namespace lipwalk {

/// Offset `a` (m) and velocity-feedback gain `b` (s) for one leg.
template <typename Scalar = double>
struct LegParams {
  Scalar a{0};
  Scalar b{0};
};

/// The 3D walking knobs: step-length offset, step-width offset, heading
/// (radians, clockwise from +y), shared gain and step period.
template <typename Scalar = double>
struct Gait3DParams {
  Scalar a_l{0};
  Scalar a_w{0};
  Scalar theta{0};
  Scalar b{0};
  Scalar period{0};
};

/// Foothold relative to the CoM. `y` stays zero for planar walking.
template <typename Scalar = double>
using FootPlacement = Vector2<Scalar>;

enum class Leg { One = 1, Two = 2 };

inline Leg leg_from_id(int id) {
  if (id == 1) return Leg::One;
  if (id == 2) return Leg::Two;
  throw InvalidParameter("leg id must be 1 or 2, got " + std::to_string(id));
}

inline Leg other_leg(Leg leg) { return leg == Leg::One ? Leg::Two : Leg::One; }

template <typename Scalar>
FootPlacement<Scalar> lfpc_2d(const Scalar& v, const LegParams<Scalar>& leg) {
  return FootPlacement<Scalar>(leg.a + leg.b * v, Scalar(0));
}

/// Unit vector of the walking direction for heading `theta`.
template <typename Scalar>
Vector2<Scalar> heading_direction(const Scalar& theta) {
  using std::cos;
  using std::sin;
  return Vector2<Scalar>(sin(theta), cos(theta));
}

/// Maps the theta = 0 frame (walking along +y) onto the frame walking along
/// heading `theta`. A clockwise rotation in the x-y plane.
template <typename Scalar>
Matrix2<Scalar> heading_rotation(const Scalar& theta) {
  using std::cos;
  using std::sin;
  Matrix2<Scalar> r;
  r << cos(theta), sin(theta),
       -sin(theta), cos(theta);
  return r;
}

template <typename Scalar>
FootPlacement<Scalar> lfpc_3d(const Scalar& vx, const Scalar& vy, Leg leg,
                              const Gait3DParams<Scalar>& gait) {
  using std::cos;
  using std::sin;
  const Scalar st = sin(gait.theta);
  const Scalar ct = cos(gait.theta);
  // Leg 1 takes the -a_w side when walking along +y.
  const Scalar side = leg == Leg::One ? Scalar(-1) : Scalar(1);
  const Scalar xf = -gait.a_l * st + side * gait.a_w * ct + gait.b * vx;
  const Scalar yf = -gait.a_l * ct - side * gait.a_w * st + gait.b * vy;
  return FootPlacement<Scalar>(xf, yf);
}

template <typename Scalar>
FootPlacement<Scalar> lfpc_3d(const Scalar& vx, const Scalar& vy, int leg_id,
                              const Gait3DParams<Scalar>& gait) {
  return lfpc_3d(vx, vy, leg_from_id(leg_id), gait);
}

}  // namespace lipwalk
