/*
 Copyright 2026 The empc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef EMPC_DYNAMICS_HPP
#define EMPC_DYNAMICS_HPP

#include <Eigen/Dense>

namespace empc {

// State vector: [q1, q2, q1_dot, q2_dot]
// q1: arm angle (rad)
// q2: pendulum angle from upright (rad), 0 = upright
// q1_dot, q2_dot: angular velocities (rad/s)
using State = Eigen::Vector4d;

constexpr int kQ1 = 0;
constexpr int kQ2 = 1;
constexpr int kQ1Dot = 2;
constexpr int kQ2Dot = 3;

/// Physical parameters of the rotary pendulum, all SI units.
/// Loaded from the `physics` config section; there are no built-in defaults.
struct FurutaParams {
    double m1;      // arm mass (kg)
    double m2;      // pendulum mass (kg)
    double L1;      // arm length (m)
    double L2;      // pendulum length (m)
    double l1;      // arm center-of-mass distance (m)
    double l2;      // pendulum center-of-mass distance (m)
    double I1;      // arm moment of inertia about its CoM (kg m^2)
    double I2;      // pendulum moment of inertia about its CoM (kg m^2)
    double c1;      // arm viscous friction (N m s)
    double c2;      // pendulum viscous friction (N m s)
    double Kg;      // gearbox ratio
    double Kt;      // motor torque constant (N m / A)
    double Kv;      // motor back-emf constant (V s / rad)
    double Rm;      // motor winding resistance (ohm)
    double eta_m;   // motor efficiency, in (0, 1]
    double eta_g;   // gearbox efficiency, in (0, 1]
    double g;       // gravity (m/s^2)

    // Throws std::invalid_argument if any positivity/efficiency invariant fails.
    void validate() const;
};

// Generic discrete-time system x+ = step(x, u). The MPC layer only sees
// this interface, so test fixtures can substitute e.g. exact linear models.
class DiscreteSystem {
public:
    virtual ~DiscreteSystem() = default;
    virtual State step(const State& x, double u) const = 0;
};

/// Euler-discretized rotary pendulum: x+ = x + dt * furuta_rhs(params, x, v).
struct DiscreteModel final : public DiscreteSystem {
    FurutaParams params;
    double dt{0.01};  // sampling time (s), > 0 for any configured model

    DiscreteModel() = default;
    DiscreteModel(const FurutaParams& p, double dt_) : params(p), dt(dt_) {}

    State step(const State& x, double u) const override;
};

/// 2x2 pendulum mass matrix M(q); depends on q2 only. Symmetric positive
/// definite for all q2 under valid parameters.
Eigen::Matrix2d mass_matrix(const FurutaParams& p, double q2);

/// Continuous-time state derivative [q_dot; M(q)^-1 (-C(q,q_dot) q_dot - G(q) + B v)].
/// The Coriolis/damping matrix includes the motor back-emf term
/// eta_m*eta_g*Kg^2*Kt*Kv/Rm on the arm axis. Throws std::runtime_error on a
/// numerically singular mass matrix.
State furuta_rhs(const FurutaParams& p, const State& x, double voltage);

/// Forward-Euler step of the continuous dynamics.
State euler_step(const DiscreteModel& model, const State& x, double voltage);

struct Linearization {
    Eigen::Matrix4d A;
    Eigen::Vector4d B;
};

/// Central finite-difference Jacobians of system.step at (x, u).
Linearization linearize(const DiscreteSystem& system, const State& x, double u,
                        double h = 1e-6);

/// Analytic d(euler_step)/du = dt * [0; 0; M(q)^-1 B]. Exact because the
/// actuator enters the dynamics affinely.
Eigen::Vector4d control_jacobian(const DiscreteModel& model, const State& x);

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace empc

#endif  // EMPC_DYNAMICS_HPP
