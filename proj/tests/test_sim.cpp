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

#include <cstdio>
#include <fstream>

#include "empc/sim.hpp"
#include "helpers.hpp"

using namespace empc;

namespace {

MpcConfig calibrated(const DiscreteModel& model) {
    MpcConfig cfg;
    const TerminalCalibration cal = calibrate_terminal(model, cfg);
    cfg.Qf = cal.Qf;
    cfg.c_f = cal.c_f;
    cfg.gamma_f = cal.gamma_f;
    return cfg;
}

SimPolicy network_policy(unsigned seed) {
    SimPolicy p;
    p.kind = PolicyKind::kNetwork;
    p.name = "net";
    MlpArchitecture arch;
    arch.hidden_layers = 2;
    arch.hidden_width = 8;
    p.net = init_params(arch, seed);
    return p;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("exact MPC from the origin stays at the origin") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State::Zero();
    sim.duration = 0.3;
    sim.terminal_mode = TerminalMode::kHard;

    SimPolicy p;
    p.kind = PolicyKind::kExactMpc;
    const TrajectoryLog log = run_closed_loop(model, cfg, p, sim);
    REQUIRE(log.steps() == 30);
    for (int k = 0; k < log.steps(); ++k) {
        CHECK(log.states[k].cwiseAbs().maxCoeff() == 0.0);
        CHECK(log.u[k] == 0.0);
    }
    CHECK(log.termination == "duration");
    CHECK_FALSE(log.any_fallback);
}

TEST_CASE("network policy log replays the forward pass") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(0.1, 0.3, 0.0, 0.0);
    sim.duration = 0.5;

    const SimPolicy p = network_policy(8);
    const TrajectoryLog log = run_closed_loop(model, cfg, p, sim);
    REQUIRE(log.steps() == 50);
    for (int k = 0; k < log.steps(); ++k) {
        CHECK(log.u[k] == forward(p.net.arch, p.net.theta, log.states[k]));
    }
}

TEST_CASE("one step equals the manual plant composition") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(0.1, 0.3, 0.0, 0.0);
    sim.duration = 0.02;  // two steps

    const SimPolicy p = network_policy(9);
    const TrajectoryLog log = run_closed_loop(model, cfg, p, sim);
    REQUIRE(log.steps() == 2);
    State expected = euler_step(model, log.states[0], log.u[0]);
    expected[kQ2] = wrap_angle(expected[kQ2]);
    CHECK(log.states[1] == expected);
}

TEST_CASE("clamped network clips to the voltage bound") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(0.5, 2.0, 1.0, 3.0);
    sim.duration = 0.5;

    SimPolicy p = network_policy(10);
    p.net.theta *= 50.0;  // force saturating outputs
    p.kind = PolicyKind::kClampedNetwork;
    const TrajectoryLog log = run_closed_loop(model, cfg, p, sim);
    for (double u : log.u) CHECK(std::abs(u) <= cfg.bounds.voltage);
}

TEST_CASE("violation stats") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);

    SUBCASE("feasible log counts zero") {
        TrajectoryLog log;
        log.dt = 0.01;
        for (int k = 0; k < 10; ++k) {
            log.t.push_back(0.01 * k);
            log.states.push_back(State::Zero());
            log.u.push_back(0.0);
            log.violations.push_back(Eigen::Vector4d::Constant(-1.0));
            log.solve_ms.push_back(0.0);
            log.fallback.push_back(0);
        }
        const ViolationStats st = violation_stats({log}, cfg);
        CHECK(st.per_run_counts[0] == 0);
        CHECK(st.max_amplitude_pct == 0.0);
    }

    SUBCASE("a single q1_dot excursion of 6.6 is 10% amplitude") {
        TrajectoryLog log;
        log.dt = 0.01;
        for (int k = 0; k < 5; ++k) {
            log.t.push_back(0.01 * k);
            State x = State::Zero();
            double u = 0.0;
            if (k == 2) x[kQ1Dot] = 6.6;
            log.states.push_back(x);
            log.u.push_back(u);
            log.violations.push_back(
                Eigen::Vector4d(std::abs(x[kQ1]) - 1.0, std::abs(x[kQ1Dot]) - 6.0,
                                std::abs(x[kQ2Dot]) - 15.0, std::abs(u) - 6.0));
            log.solve_ms.push_back(0.0);
            log.fallback.push_back(0);
        }
        const ViolationStats st = violation_stats({log}, cfg);
        CHECK(st.per_run_counts[0] == 1);
        CHECK(st.max_amplitude_pct == doctest::Approx(10.0));
    }

    SUBCASE("mean and std across three hand-built logs") {
        auto make_log = [&](int violations) {
            TrajectoryLog log;
            log.dt = 0.01;
            for (int k = 0; k < 8; ++k) {
                log.t.push_back(0.01 * k);
                log.states.push_back(State::Zero());
                log.u.push_back(0.0);
                Eigen::Vector4d v = Eigen::Vector4d::Constant(-0.5);
                if (k < violations) v[3] = 0.6;  // |u| over by 0.6 -> 10%
                log.violations.push_back(v);
                log.solve_ms.push_back(0.0);
                log.fallback.push_back(0);
            }
            return log;
        };
        const ViolationStats st =
            violation_stats({make_log(1), make_log(3), make_log(5)}, cfg);
        CHECK(st.mean_count == doctest::Approx(3.0));
        CHECK(st.std_count == doctest::Approx(std::sqrt((4.0 + 0.0 + 4.0) / 3.0)));
        CHECK(st.max_amplitude_pct == doctest::Approx(10.0));
    }
}

TEST_CASE("replay determinism of the dynamic content") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(-1.0, M_PI, 0.0, 0.0);
    sim.duration = 1.0;

    const SimPolicy p = network_policy(3);
    const TrajectoryLog a = run_closed_loop(model, cfg, p, sim);
    const TrajectoryLog b = run_closed_loop(model, cfg, p, sim);
    REQUIRE(a.steps() == b.steps());
    for (int k = 0; k < a.steps(); ++k) {
        CHECK(a.states[k] == b.states[k]);
        CHECK(a.u[k] == b.u[k]);
        CHECK(a.violations[k] == b.violations[k]);
    }
}

TEST_CASE("jittered starts are clamped into the box and reproducible") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(-1.0, M_PI, 0.0, 0.0);
    sim.repetitions = 20;
    sim.jitter = 0.02;
    sim.seed = 5;

    const std::vector<State> a = jittered_starts(sim, cfg);
    const std::vector<State> b = jittered_starts(sim, cfg);
    REQUIRE(a.size() == 20);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] == b[i]);
        CHECK(std::abs(a[i][kQ1]) <= cfg.bounds.q1);
        CHECK(a[i][kQ2] == doctest::Approx(M_PI).epsilon(0.03));
    }
    // actually jittered (not all identical)
    bool varied = false;
    for (size_t i = 1; i < a.size(); ++i) varied = varied || a[i] != a[0];
    CHECK(varied);
}

TEST_CASE("comparing a policy against itself gives identical stats") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(0.2, 0.5, 0.0, 0.0);
    sim.duration = 0.5;
    sim.repetitions = 3;
    sim.jitter = 0.02;

    const SimPolicy p = network_policy(12);
    SimPolicy q = p;
    q.name = "net_copy";
    const ComparisonReport rep = compare_policies(model, cfg, sim, {p, q});
    REQUIRE(rep.policies.size() == 2);
    CHECK(rep.policies[0].stats.per_run_counts ==
          rep.policies[1].stats.per_run_counts);
    CHECK(rep.policies[0].stats.max_amplitude_pct ==
          rep.policies[1].stats.max_amplitude_pct);
}

TEST_CASE("speedup ratio is the definitional quotient") {
    ComparisonReport rep;
    PolicyComparison exact;
    exact.name = "exact_mpc";
    exact.mean_step_ms = 2.0;
    PolicyComparison net;
    net.name = "net";
    net.mean_step_ms = 0.01;
    rep.policies = {exact, net};
    CHECK(rep.speedup_vs_exact("net") == doctest::Approx(200.0));
    CHECK(rep.speedup_vs_exact("exact_mpc") == doctest::Approx(1.0));
    CHECK(rep.to_json().find("speedup_vs_exact") != std::string::npos);
    CHECK(rep.to_table().find("net") != std::string::npos);
}

TEST_CASE("trajectory csv has the documented schema") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(0.1, 0.2, 0.0, 0.0);
    sim.duration = 0.1;
    const TrajectoryLog log = run_closed_loop(model, cfg, network_policy(2), sim);

    const std::string path = "test_sim_log.csv";
    log.write_csv(path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "t,q1,q2,q1dot,q2dot,u,viol_q1,viol_q1dot,viol_q2dot,viol_u,solve_ms");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) rows += !line.empty();
    CHECK(rows == log.steps());
    in.close();
    std::remove(path.c_str());
}

TEST_CASE("divergence terminates the run with a reason") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = calibrated(model);
    SimConfig sim;
    sim.x0 = State(0.0, 1.0, 0.0, 14.0);
    sim.duration = 5.0;
    sim.divergence_norm = 15.0;  // artificially low to trip early

    const TrajectoryLog log = run_closed_loop(model, cfg, network_policy(6), sim);
    CHECK(log.termination == "diverged");
    CHECK(log.steps() < 500);
}

}  // TEST_SUITE
