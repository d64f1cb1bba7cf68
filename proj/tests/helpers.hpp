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

#ifndef EMPC_TESTS_HELPERS_HPP
#define EMPC_TESTS_HELPERS_HPP

#include <random>
#include <vector>

#include "empc/dynamics.hpp"
#include "empc/mpc.hpp"

namespace empc::test {

// The default hobby-scale parameter set shipped in configs/default.json,
// duplicated here so unit tests do not depend on config parsing.
inline FurutaParams default_params() {
    FurutaParams p;
    p.m1 = 0.100;
    p.m2 = 0.128;
    p.L1 = 0.200;
    p.L2 = 0.335;
    p.l1 = 0.100;
    p.l2 = 0.1675;
    p.I1 = 3.33e-4;
    p.I2 = 1.198e-3;
    p.c1 = 2.4e-3;
    p.c2 = 2.4e-3;
    p.Kg = 70.0;
    p.Kt = 7.68e-3;
    p.Kv = 7.68e-3;
    p.Rm = 2.6;
    p.eta_m = 0.69;
    p.eta_g = 0.90;
    p.g = 9.81;
    return p;
}

inline DiscreteModel default_model() { return DiscreteModel(default_params(), 0.01); }

// Exactly linear test system x+ = A x + B u.
struct LinearSystem final : public DiscreteSystem {
    Eigen::Matrix4d A;
    Eigen::Vector4d B;
    LinearSystem(const Eigen::Matrix4d& a, const Eigen::Vector4d& b) : A(a), B(b) {}
    State step(const State& x, double u) const override { return A * x + B * u; }
};

// Independent finite-horizon LQ oracle: backward Riccati recursion. Returns
// the time-varying gains K_0..K_{N-1} for u_k = -K_k x_k.
inline std::vector<Eigen::RowVector4d> riccati_recursion_gains(
    const Eigen::Matrix4d& A, const Eigen::Vector4d& B, const Eigen::Matrix4d& Q,
    double R, const Eigen::Matrix4d& Qf, int N) {
    std::vector<Eigen::RowVector4d> gains(static_cast<size_t>(N));
    Eigen::Matrix4d P = Qf;
    for (int k = N - 1; k >= 0; --k) {
        const double s = R + B.dot(P * B);
        const Eigen::RowVector4d K = (B.transpose() * P * A) / s;
        gains[static_cast<size_t>(k)] = K;
        P = Q + A.transpose() * P * (A - B * K);
        P = 0.5 * (P + P.transpose()).eval();
    }
    return gains;
}

// Random stabilizable-ish linear system: a contraction plus control coupling.
inline LinearSystem random_linear_system(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::Matrix4d A;
    Eigen::Vector4d B;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) A(r, c) = 0.3 * u(rng);
        A(r, r) += 0.6;
        B[r] = u(rng);
    }
    if (B.norm() < 0.3) B[0] += 1.0;
    return LinearSystem(A, B);
}

inline MpcConfig unconstrained_config(int horizon = 10) {
    MpcConfig cfg;
    cfg.horizon = horizon;
    cfg.bounds.q1 = 1e9;
    cfg.bounds.q1_dot = 1e9;
    cfg.bounds.q2_dot = 1e9;
    cfg.bounds.voltage = 1e9;
    cfg.terminal_mode = TerminalMode::kCostOnly;
    cfg.c_f = 1e18;
    return cfg;
}

}  // namespace empc::test

#endif  // EMPC_TESTS_HELPERS_HPP
