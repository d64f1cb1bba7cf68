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

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "empc/nn.hpp"

using namespace empc;

namespace {

MlpArchitecture small_arch(int layers = 2, int width = 8) {
    MlpArchitecture a;
    a.hidden_layers = layers;
    a.hidden_width = width;
    return a;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("param_count") {
    MlpArchitecture paper;
    paper.hidden_layers = 7;
    paper.hidden_width = 30;
    // 4->30: 150, six 30->30: 5580, 30->1: 31
    CHECK(param_count(paper) == 5761);

    MlpArchitecture chain;
    chain.input_dim = 1;
    chain.output_dim = 1;
    chain.hidden_layers = 1;
    chain.hidden_width = 1;
    CHECK(param_count(chain) == 4);
}

TEST_CASE("zero parameters produce zero output") {
    const MlpArchitecture arch = small_arch();
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(param_count(arch));
    CHECK(forward(arch, theta, Eigen::Vector4d(1.0, -2.0, 0.5, 3.0)) == 0.0);
}

TEST_CASE("hand-computed 2-2-1 tanh composition") {
    MlpArchitecture arch;
    arch.input_dim = 2;
    arch.hidden_layers = 1;
    arch.hidden_width = 2;
    REQUIRE(param_count(arch) == 9);

    // W1 (2x2, column-major), b1 (2), W2 (1x2), b2 (1)
    Eigen::VectorXd theta(9);
    theta << 0.5, -0.3,   // W1 col 0
             0.2, 0.8,    // W1 col 1
             0.1, -0.1,   // b1
             1.5, -2.0,   // W2
             0.25;        // b2
    Eigen::MatrixXd x(2, 1);
    x << 0.4, -0.6;

    const double h1 = std::tanh(0.5 * 0.4 + 0.2 * -0.6 + 0.1);
    const double h2 = std::tanh(-0.3 * 0.4 + 0.8 * -0.6 + -0.1);
    const double expected = 1.5 * h1 - 2.0 * h2 + 0.25;

    CHECK(forward_batch(arch, theta, x)(0, 0) ==
          doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("scaling the output layer scales the output") {
    const MlpArchitecture arch = small_arch();
    MlpParams p = init_params(arch, 42);
    const Eigen::Vector4d x(0.3, -0.1, 0.9, 0.2);
    const double base = forward(arch, p.theta, x);

    // output layer = last width + 1 entries (weights then bias)
    const int out_params = arch.hidden_width + 1;
    p.theta.tail(out_params) *= 2.0;
    CHECK(forward(arch, p.theta, x) == doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("output is bounded by the output-layer weights") {
    const MlpArchitecture arch = small_arch(3, 10);
    std::mt19937_64 seed_gen(1);
    for (int trial = 0; trial < 20; ++trial) {
        const MlpParams p = init_params(arch, seed_gen());
        const int w = arch.hidden_width;
        const Eigen::VectorXd w_out = p.theta.segment(p.theta.size() - w - 1, w);
        const double b_out = p.theta[p.theta.size() - 1];
        const double bound = w_out.cwiseAbs().sum() + std::abs(b_out);
        std::uniform_real_distribution<double> u(-5.0, 5.0);
        std::mt19937_64 rng(trial);
        const Eigen::Vector4d x(u(rng), u(rng), u(rng), u(rng));
        CHECK(std::abs(forward(arch, p.theta, x)) <= bound + 1e-12);
    }
}

TEST_CASE("determinism: same seed, same params, same output") {
    const MlpArchitecture arch = small_arch();
    const MlpParams a = init_params(arch, 123);
    const MlpParams b = init_params(arch, 123);
    REQUIRE(a.theta.size() == b.theta.size());
    CHECK((a.theta - b.theta).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::Vector4d x(0.1, 0.2, 0.3, 0.4);
    CHECK(forward(arch, a.theta, x) == forward(arch, b.theta, x));
}

TEST_CASE("backward matches central finite differences") {
    const MlpArchitecture arch = small_arch(2, 6);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const MlpParams p = init_params(arch, rng());
        const Eigen::Vector4d x(u(rng), u(rng), u(rng), u(rng));
        const double upstream = u(rng) + 1.5;
        const GradientBundle g = backward(arch, p.theta, x, upstream);

        const double h = 1e-6;
        for (int j = 0; j < p.theta.size(); j += 7) {  // spot-check a stride
            Eigen::VectorXd tp = p.theta, tm = p.theta;
            tp[j] += h;
            tm[j] -= h;
            const double fd =
                upstream * (forward(arch, tp, x) - forward(arch, tm, x)) / (2.0 * h);
            const double rel = std::abs(g.d_theta[j] - fd) /
                               std::max(1e-6, std::abs(fd));
            worst = std::max(worst, rel);
        }
        for (int j = 0; j < 4; ++j) {
            Eigen::Vector4d xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            const double fd =
                upstream * (forward(arch, p.theta, xp) - forward(arch, p.theta, xm)) /
                (2.0 * h);
            const double rel = std::abs(g.d_input[j] - fd) /
                               std::max(1e-6, std::abs(fd));
            worst = std::max(worst, rel);
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("zero upstream zeroes all gradients; output bias gradient is upstream") {
    const MlpArchitecture arch = small_arch();
    const MlpParams p = init_params(arch, 4);
    const Eigen::Vector4d x(0.5, 0.5, -0.5, 0.25);

    const GradientBundle zero = backward(arch, p.theta, x, 0.0);
    CHECK(zero.d_theta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.d_input.cwiseAbs().maxCoeff() == 0.0);

    const GradientBundle g = backward(arch, p.theta, x, 2.5);
    CHECK(g.d_theta[g.d_theta.size() - 1] == 2.5);  // output bias slot
}

TEST_CASE("input gradient is stable under tiny parameter perturbations") {
    const MlpArchitecture arch = small_arch(3, 12);
    const MlpParams p = init_params(arch, 77);
    const Eigen::Vector4d x(0.2, -0.4, 1.0, -1.0);
    const GradientBundle g0 = backward(arch, p.theta, x, 1.0);
    MlpParams q = p;
    q.theta.array() += 1e-9;
    const GradientBundle g1 = backward(arch, q.theta, x, 1.0);
    CHECK((g0.d_input - g1.d_input).norm() < 1e-6);
    CHECK(std::isfinite(g0.d_input.norm()));
}

TEST_CASE("model file round trip is bitwise") {
    const MlpArchitecture arch = small_arch(4, 9);
    const MlpParams p = init_params(arch, 2024);
    const std::string path = "test_model_roundtrip.empc";
    save_model(p, path, R"({"note":"unit"})");
    std::string prov;
    const MlpParams q = load_model(path, &prov);
    std::remove(path.c_str());

    CHECK(q.arch.hidden_layers == arch.hidden_layers);
    CHECK(q.arch.hidden_width == arch.hidden_width);
    REQUIRE(q.theta.size() == p.theta.size());
    CHECK((q.theta - p.theta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(prov.find("unit") != std::string::npos);
}

TEST_CASE("architecture validation") {
    MlpArchitecture bad;
    bad.hidden_layers = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(forward(small_arch(), Eigen::VectorXd::Zero(3),
                            Eigen::Vector4d::Zero()),
                    std::invalid_argument);
}

}  // TEST_SUITE
