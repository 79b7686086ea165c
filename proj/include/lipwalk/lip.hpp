#pragma once

// Continuous phase of the linear inverted pendulum: x'' = (g/h) x, with x the
// CoM position relative to the stance foot.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "lipwalk/errors.hpp"

namespace lipwalk {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;

template <typename Scalar>
Scalar time_constant(const Scalar& g, const Scalar& h) {
  using std::sqrt;
  if (!(g > Scalar(0))) throw InvalidParameter("gravity g must be > 0");
  if (!(h > Scalar(0))) throw InvalidParameter("CoM height h must be > 0");
  return sqrt(h / g);
}

/// Gravity, CoM height and the derived time constant T_c = sqrt(h/g).
template <typename Scalar = double>
class ModelParams {
 public:
  ModelParams(const Scalar& g, const Scalar& h) : g_(g), h_(h), tc_(time_constant(g, h)) {}

  const Scalar& g() const { return g_; }
  const Scalar& h() const { return h_; }
  const Scalar& tc() const { return tc_; }

  /// g/h, the squared natural frequency of the divergent mode.
  Scalar omega2() const { return g_ / h_; }

 private:
  Scalar g_;
  Scalar h_;
  Scalar tc_;
};

/// (x, v): CoM position and velocity relative to the stance foot. Behaves as an
/// Eigen column vector so flows and return maps compose as matrix expressions.
template <typename Scalar = double>
class PendulumState : public Vector2<Scalar> {
 public:
  using Base = Vector2<Scalar>;

  PendulumState() : Base(Base::Zero()) {}
  PendulumState(const Scalar& x, const Scalar& v) : Base(x, v) {}

  template <typename OtherDerived>
  PendulumState(const Eigen::MatrixBase<OtherDerived>& other) : Base(other) {}  // NOLINT

  template <typename OtherDerived>
  PendulumState& operator=(const Eigen::MatrixBase<OtherDerived>& other) {
    this->Base::operator=(other);
    return *this;
  }

  Scalar& x() { return (*this)(0); }
  Scalar& v() { return (*this)(1); }
  const Scalar& x() const { return (*this)(0); }
  const Scalar& v() const { return (*this)(1); }
};

/// sinh/cosh of T/T_c for one step period.
template <typename Scalar = double>
struct StepConstants {
  Scalar s_t;
  Scalar c_t;
  Scalar period;
};

template <typename Scalar>
StepConstants<Scalar> step_constants(const Scalar& t, const ModelParams<Scalar>& model) {
  using std::cosh;
  using std::sinh;
  if (!(t >= Scalar(0))) throw InvalidParameter("step period must be >= 0");
  const Scalar u = t / model.tc();
  return {sinh(u), cosh(u), t};
}

/// State transition matrix of the closed-form flow over `t`.
template <typename Scalar>
Matrix2<Scalar> transition_matrix(const Scalar& t, const ModelParams<Scalar>& model) {
  const auto k = step_constants(t, model);
  const Scalar& tc = model.tc();
  Matrix2<Scalar> m;
  m << k.c_t, tc * k.s_t,
       k.s_t / tc, k.c_t;
  return m;
}

template <typename Scalar>
PendulumState<Scalar> flow(const PendulumState<Scalar>& state, const Scalar& t,
                           const ModelParams<Scalar>& model) {
  if (!(t >= Scalar(0))) throw InvalidParameter("flow time must be >= 0");
  return transition_matrix(t, model) * state;
}

/// Fixed-step classic RK4 on x'' = (g/h) x. The last step is shortened to land
/// on `t` exactly. Only meant as a cross-check for `flow`.
template <typename Scalar>
PendulumState<Scalar> flow_numeric(const PendulumState<Scalar>& state, const Scalar& t,
                                   const ModelParams<Scalar>& model, const Scalar& dt) {
  using std::floor;
  if (!(t >= Scalar(0))) throw InvalidParameter("flow time must be >= 0");
  if (t == Scalar(0)) return state;
  if (!(dt > Scalar(0))) throw InvalidParameter("integration step dt must be > 0");

  const Scalar w2 = model.omega2();
  const auto rhs = [&w2](const Vector2<Scalar>& q) { return Vector2<Scalar>(q(1), w2 * q(0)); };
  const auto rk4 = [&rhs](const Vector2<Scalar>& q, const Scalar& step) {
    const Vector2<Scalar> k1 = rhs(q);
    const Vector2<Scalar> k2 = rhs(q + step / 2 * k1);
    const Vector2<Scalar> k3 = rhs(q + step / 2 * k2);
    const Vector2<Scalar> k4 = rhs(q + step * k3);
    return Vector2<Scalar>(q + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4));
  };

  Vector2<Scalar> q = state;
  const auto full_steps = static_cast<long long>(floor(t / dt));
  for (long long i = 0; i < full_steps; ++i) q = rk4(q, dt);
  const Scalar rest = t - Scalar(full_steps) * dt;
  if (rest > dt * Scalar(1e-12)) q = rk4(q, rest);
  return q;
}

/// v^2 - (g/h) x^2, conserved along the flow.
template <typename Scalar>
Scalar orbital_energy(const PendulumState<Scalar>& state, const ModelParams<Scalar>& model) {
  return state.v() * state.v() - model.omega2() * state.x() * state.x();
}

}  // namespace lipwalk
