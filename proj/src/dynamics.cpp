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

#include "empc/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace empc {

void FurutaParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) {
            throw std::invalid_argument(std::string("physics.") + name +
                                        " must be > 0");
        }
    };
    positive(m1, "m1");
    positive(m2, "m2");
    positive(L1, "L1");
    positive(L2, "L2");
    positive(l1, "l1");
    positive(l2, "l2");
    positive(I1, "I1");
    positive(I2, "I2");
    positive(Kg, "Kg");
    positive(Kt, "Kt");
    positive(Rm, "Rm");
    positive(g, "g");
    if (c1 < 0.0 || c2 < 0.0) {
        throw std::invalid_argument("physics.c1/c2 must be >= 0");
    }
    if (Kv < 0.0) {
        throw std::invalid_argument("physics.Kv must be >= 0");
    }
    if (!(eta_m > 0.0 && eta_m <= 1.0) || !(eta_g > 0.0 && eta_g <= 1.0)) {
        throw std::invalid_argument("physics.eta_m/eta_g must be in (0, 1]");
    }
}

Eigen::Matrix2d mass_matrix(const FurutaParams& p, double q2) {
    const double s = std::sin(q2);
    const double c = std::cos(q2);
    const double off = p.m2 * p.L1 * p.l2 * c;
    Eigen::Matrix2d M;
    M(0, 0) = p.m1 * p.l1 * p.l1 + p.I1 + p.m2 * p.L1 * p.L1 +
              p.m2 * p.l2 * p.l2 * s * s;
    M(0, 1) = off;
    M(1, 0) = off;
    M(1, 1) = p.m2 * p.l2 * p.l2 + p.I2;
    return M;
}

State furuta_rhs(const FurutaParams& p, const State& x, double voltage) {
    const double q2 = x[kQ2];
    const double q1d = x[kQ1Dot];
    const double q2d = x[kQ2Dot];
    const double s = std::sin(q2);
    const double c = std::cos(q2);

    const Eigen::Matrix2d M = mass_matrix(p, q2);

    const double k_emf = p.eta_m * p.eta_g * p.Kg * p.Kg * p.Kt * p.Kv / p.Rm;
    Eigen::Matrix2d C;
    C(0, 0) = 2.0 * p.m2 * p.l2 * p.l2 * s * c * q2d + p.c1 + k_emf;
    C(0, 1) = -p.m2 * p.L1 * p.l2 * s * q2d;
    C(1, 0) = -p.m2 * p.l2 * p.l2 * s * c * q1d;
    C(1, 1) = p.c2;

    const Eigen::Vector2d G(0.0, -p.m2 * p.g * p.l2 * s);
    const Eigen::Vector2d B(p.eta_m * p.eta_g * p.Kt * p.Kg / p.Rm, 0.0);
    const Eigen::Vector2d qd(q1d, q2d);

    const Eigen::Vector2d torque = -C * qd - G + B * voltage;

    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    if (!(std::abs(det) > 1e-14)) {
        throw std::runtime_error("furuta_rhs: singular mass matrix");
    }
    Eigen::Vector2d acc;
    acc[0] = (M(1, 1) * torque[0] - M(0, 1) * torque[1]) / det;
    acc[1] = (M(0, 0) * torque[1] - M(1, 0) * torque[0]) / det;

    State dx;
    dx[kQ1] = q1d;
    dx[kQ2] = q2d;
    dx[kQ1Dot] = acc[0];
    dx[kQ2Dot] = acc[1];
    return dx;
}

State euler_step(const DiscreteModel& model, const State& x, double voltage) {
    return x + model.dt * furuta_rhs(model.params, x, voltage);
}

State DiscreteModel::step(const State& x, double u) const {
    return euler_step(*this, x, u);
}

Linearization linearize(const DiscreteSystem& system, const State& x, double u,
                        double h) {
    Linearization lin;
    for (int j = 0; j < 4; ++j) {
        State dx = State::Zero();
        dx[j] = h;
        lin.A.col(j) = (system.step(x + dx, u) - system.step(x - dx, u)) / (2.0 * h);
    }
    lin.B = (system.step(x, u + h) - system.step(x, u - h)) / (2.0 * h);
    return lin;
}

Eigen::Vector4d control_jacobian(const DiscreteModel& model, const State& x) {
    const FurutaParams& p = model.params;
    const Eigen::Matrix2d M = mass_matrix(p, x[kQ2]);
    const Eigen::Vector2d B(p.eta_m * p.eta_g * p.Kt * p.Kg / p.Rm, 0.0);
    const double det = M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
    if (!(std::abs(det) > 1e-14)) {
        throw std::runtime_error("control_jacobian: singular mass matrix");
    }
    Eigen::Vector4d j = Eigen::Vector4d::Zero();
    j[kQ1Dot] = model.dt * (M(1, 1) * B[0] - M(0, 1) * B[1]) / det;
    j[kQ2Dot] = model.dt * (M(0, 0) * B[1] - M(1, 0) * B[0]) / det;
    return j;
}

double wrap_angle(double a) {
    const double two_pi = 2.0 * M_PI;
    double w = std::fmod(a, two_pi);
    if (w <= -M_PI) w += two_pi;
    if (w > M_PI) w -= two_pi;
    return w;
}

}  // namespace empc
