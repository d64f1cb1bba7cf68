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
#include <random>

#include "empc/train.hpp"
#include "empc/validate.hpp"
#include "helpers.hpp"

using namespace empc;

TEST_SUITE("validate") {

TEST_CASE("optimality indicator boundary is inclusive") {
    CHECK(indicator_optimality(2.0, 2.0, 0.3) == 1);
    CHECK(indicator_optimality(2.0, 2.3, 0.3) == 1);   // exactly eta
    CHECK(indicator_optimality(2.0, 2.31, 0.3) == 0);  // just beyond
}

TEST_CASE("constraint indicator") {
    Eigen::VectorXd c(3);
    c << -0.5, -0.5, -0.5;
    CHECK(indicator_constraint(c, 1e-6) == 1);
    c[1] = 1e-3;
    CHECK(indicator_constraint(c, 1e-6) == 0);
}

TEST_CASE("constraint indicator agrees with the single-step rows") {
    const DiscreteModel model = test::default_model();
    MpcConfig mpc;
    mpc.Qf = Eigen::Matrix4d::Identity();
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const State x(u(rng), 2.0 * u(rng), 5.5 * u(rng), 14.0 * u(rng));
        const double uh = 8.0 * u(rng);
        const Eigen::VectorXd c = single_step_constraint(model, mpc, x, uh);
        const int ind = indicator_constraint(c, 0.0);
        CHECK(ind == (c.maxCoeff() <= 0.0 ? 1 : 0));
    }
}

TEST_CASE("hoeffding bound reproduces the reference arithmetic") {
    // published reference points for the constraint indicator
    CHECK(hoeffding_bound(0.903, 100000, 0.01).lower_bound ==
          doctest::Approx(0.893).epsilon(1e-12));
    CHECK(hoeffding_bound(0.991, 100000, 0.01).lower_bound ==
          doctest::Approx(0.981).epsilon(1e-12));
    // delta for n = 10,000 and epsilon = 0.01 is 1 - e^-2
    CHECK(hoeffding_bound(0.5, 10000, 0.01).delta_h ==
          doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("hoeffding bound equals the closed form on random inputs") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const double i_bar = u(rng);
        const long long n = 1 + static_cast<long long>(u(rng) * 1e6);
        const double eps = 0.001 + 0.2 * u(rng);
        const HoeffdingBound b = hoeffding_bound(i_bar, n, eps);
        CHECK(b.lower_bound == i_bar - eps);
        CHECK(b.delta_h ==
              1.0 - std::exp(-2.0 * static_cast<double>(n) * eps * eps));
    }
    CHECK_THROWS_AS(hoeffding_bound(1.5, 10, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(hoeffding_bound(0.5, 0, 0.01), std::invalid_argument);
}

TEST_CASE("oracle policy validates perfectly") {
    const DiscreteModel model = test::default_model();
    MpcConfig mpc;
    mpc.Qf = Eigen::Matrix4d::Identity();

    MlpArchitecture arch;
    arch.hidden_layers = 1;
    arch.hidden_width = 4;
    const MlpParams p = init_params(arch, 50);

    // labels are the network's own outputs on near-origin states, computed
    // through the same batched path the validator uses
    Dataset d;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (int i = 0; i < 200; ++i) {
        Sample s;
        s.x = State(u(rng), u(rng), u(rng), u(rng));
        s.u_star = 0.0;
        d.samples.push_back(s);
    }
    const Eigen::VectorXd labels =
        forward_batch(arch, p.theta, d.inputs()).row(0).transpose();
    for (int i = 0; i < d.size(); ++i) d.samples[i].u_star = labels[i];

    ValidationConfig vcfg;
    const ValidationReport rep = validate_policy(d, arch, p.theta, model, mpc, vcfg);
    CHECK(rep.i_o_bar == 1.0);
    CHECK(rep.total_violation_rate_pct == 0.0);
    CHECK(rep.opt_err_mean_pct == 0.0);
    CHECK(rep.opt_err_std_pct == 0.0);
    CHECK(rep.constraint_bound.lower_bound ==
          doctest::Approx(1.0 - vcfg.epsilon_h));
}

TEST_CASE("report rates match a hand count on a 10-sample toy set") {
    const DiscreteModel model = test::default_model();
    MpcConfig mpc;
    mpc.Qf = Eigen::Matrix4d::Identity();

    // identity-chain network computing u_hat = q1
    MlpArchitecture arch;
    arch.hidden_layers = 1;
    arch.hidden_width = 4;
    arch.activation = Activation::kIdentity;
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(param_count(arch));
    theta[0] = 1.0;
    theta[20] = 1.0;

    Dataset d;
    int expect_opt = 0;
    int expect_control_viol = 0;
    int expect_state_viol = 0;
    int expect_total = 0;
    for (int i = 0; i < 10; ++i) {
        Sample s;
        const double q1 = i < 4 ? 0.1 * i : (i < 7 ? 7.0 + i : 0.5);
        const double q2dot = i == 9 ? 14.999 : 0.0;
        s.x = State(q1, 0.0, 0.0, q2dot);
        s.u_star = 0.0;
        d.samples.push_back(s);

        const double u_hat = q1;  // what the network computes
        const Eigen::VectorXd c = single_step_constraint(model, mpc, s.x, u_hat);
        expect_opt += std::abs(u_hat - s.u_star) <= 0.3 ? 1 : 0;
        bool sv = false, cv = false;
        for (int r = 0; r < 6; ++r) sv = sv || c[r] > mpc.tol_feas;
        for (int r = 6; r < 8; ++r) cv = cv || c[r] > mpc.tol_feas;
        expect_state_viol += sv;
        expect_control_viol += cv;
        expect_total += (sv || cv);
    }

    const ValidationReport rep =
        validate_policy(d, arch, theta, model, mpc, ValidationConfig{});
    CHECK(rep.i_o_bar == doctest::Approx(expect_opt / 10.0));
    CHECK(rep.state_violation_rate_pct == doctest::Approx(10.0 * expect_state_viol));
    CHECK(rep.control_violation_rate_pct ==
          doctest::Approx(10.0 * expect_control_viol));
    CHECK(rep.total_violation_rate_pct == doctest::Approx(10.0 * expect_total));

    // internal consistency
    CHECK(rep.total_violation_rate_pct >=
          std::max(rep.state_violation_rate_pct, rep.control_violation_rate_pct));
    CHECK(rep.total_violation_rate_pct <=
          rep.state_violation_rate_pct + rep.control_violation_rate_pct);
    CHECK(rep.i_c_bar == doctest::Approx(1.0 - rep.total_violation_rate_pct / 100.0));
}

TEST_CASE("report serializes to json and table") {
    const DiscreteModel model = test::default_model();
    MpcConfig mpc;
    mpc.Qf = Eigen::Matrix4d::Identity();
    MlpArchitecture arch;
    arch.hidden_layers = 1;
    arch.hidden_width = 2;
    const MlpParams p = init_params(arch, 1);
    Dataset d;
    Sample s;
    s.x = State(0.1, 0.1, 0.0, 0.0);
    s.u_star = 0.2;
    d.samples.push_back(s);
    const ValidationReport rep =
        validate_policy(d, arch, p.theta, model, mpc, ValidationConfig{});
    CHECK(rep.to_json().find("i_c_bar") != std::string::npos);
    CHECK(rep.to_table().find("I_c empirical mean") != std::string::npos);
    CHECK_THROWS_AS(
        validate_policy(Dataset{}, arch, p.theta, model, mpc, ValidationConfig{}),
        std::invalid_argument);
}

}  // TEST_SUITE
