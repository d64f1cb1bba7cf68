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
#include "helpers.hpp"

using namespace empc;

namespace {

MpcConfig plain_config() {
    MpcConfig cfg;
    cfg.Qf = Eigen::Matrix4d::Identity();
    return cfg;
}

// u = k . x as a width-4 identity-activation network with one hidden layer.
MlpArchitecture linear_arch() {
    MlpArchitecture arch;
    arch.hidden_layers = 1;
    arch.hidden_width = 4;
    arch.activation = Activation::kIdentity;
    return arch;
}

Dataset linear_policy_dataset(const Eigen::RowVector4d& k, int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset d;
    for (int i = 0; i < n; ++i) {
        Sample s;
        s.x = State(u(rng), u(rng), u(rng), u(rng));
        s.u_star = (k * s.x)(0);
        s.v_star = 0.0;
        d.samples.push_back(s);
    }
    return d;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("single-step constraint rows") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = plain_config();

    SUBCASE("origin with zero control is strictly interior") {
        const Eigen::VectorXd c = single_step_constraint(model, cfg, State::Zero(), 0.0);
        REQUIRE(c.size() == 8);
        CHECK(c.maxCoeff() < 0.0);
    }
    SUBCASE("control 7 V trips the +v row by exactly 1") {
        const Eigen::VectorXd c = single_step_constraint(model, cfg, State::Zero(), 7.0);
        CHECK(c[6] == doctest::Approx(1.0));   // +v
        CHECK(c[7] == doctest::Approx(-13.0)); // -v
    }
    SUBCASE("random inputs agree with a brute-force row evaluation") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 50; ++trial) {
            const State x(u(rng), 3.0 * u(rng), 6.0 * u(rng), 15.0 * u(rng));
            const double uh = 8.0 * u(rng);
            const Eigen::VectorXd c = single_step_constraint(model, cfg, x, uh);
            const State xn = euler_step(model, x, uh);
            CHECK(c[0] == doctest::Approx(xn[kQ1] - 1.0));
            CHECK(c[1] == doctest::Approx(-xn[kQ1] - 1.0));
            CHECK(c[2] == doctest::Approx(xn[kQ1Dot] - 6.0));
            CHECK(c[3] == doctest::Approx(-xn[kQ1Dot] - 6.0));
            CHECK(c[4] == doctest::Approx(xn[kQ2Dot] - 15.0));
            CHECK(c[5] == doctest::Approx(-xn[kQ2Dot] - 15.0));
            CHECK(c[6] == doctest::Approx(uh - 6.0));
            CHECK(c[7] == doctest::Approx(-uh - 6.0));
        }
    }
}

TEST_CASE("relu aggregation") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = plain_config();

    SUBCASE("feasible batch aggregates to exactly zero") {
        const MlpArchitecture arch = linear_arch();
        const Eigen::VectorXd theta = Eigen::VectorXd::Zero(param_count(arch));
        Dataset d;
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(-0.3, 0.3);
        for (int i = 0; i < 40; ++i) {
            Sample s;
            s.x = State(u(rng), u(rng), u(rng), u(rng));
            s.u_star = 0.0;
            d.samples.push_back(s);
        }
        const Eigen::VectorXd agg = aggregate_constraints(d, model, cfg, arch, theta);
        CHECK(agg.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("hand mean over ReLU values") {
        // identity chain computing u = q1, samples with q1 = 5, 8, 6.5:
        // +v row takes values (-1, 2, 0.5) whose ReLU mean is 5/6
        MlpArchitecture arch = linear_arch();
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(param_count(arch));
        // W1 (4x4 column-major): route q1 into hidden unit 0
        theta[0] = 1.0;
        // W2 (1x4) starts at 4*4+4 = 20
        theta[20] = 1.0;
        Dataset d;
        for (double q1 : {5.0, 8.0, 6.5}) {
            Sample s;
            s.x = State(q1, 0.0, 0.0, 0.0);
            s.u_star = 0.0;
            d.samples.push_back(s);
        }
        const Eigen::VectorXd agg = aggregate_constraints(d, model, cfg, arch, theta);
        CHECK(agg[6] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    }

    SUBCASE("aggregate is zero iff every sample satisfies the row") {
        const MlpArchitecture arch = linear_arch();
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const MlpParams p = init_params(arch, rng());
            Dataset d;
            const int n = 1 + static_cast<int>((u(rng) + 1.0) * 10.0);
            for (int i = 0; i < n; ++i) {
                Sample s;
                s.x = State(u(rng), 3.0 * u(rng), 5.9 * u(rng), 14.0 * u(rng));
                s.u_star = 0.0;
                d.samples.push_back(s);
            }
            const Eigen::VectorXd agg =
                aggregate_constraints(d, model, cfg, arch, p.theta);
            const Eigen::VectorXd u_hat =
                forward_batch(arch, p.theta, d.inputs()).row(0).transpose();
            for (int r = 0; r < agg.size(); ++r) {
                bool all_ok = true;
                for (int i = 0; i < d.size(); ++i) {
                    const Eigen::VectorXd c =
                        single_step_constraint(model, cfg, d.samples[i].x, u_hat[i]);
                    all_ok = all_ok && c[r] <= 0.0;
                }
                CHECK((agg[r] == 0.0) == all_ok);
            }
        }
    }

    SUBCASE("empty batch throws") {
        const MlpArchitecture arch = linear_arch();
        CHECK_THROWS_AS(aggregate_constraints(Dataset{}, model, cfg, arch,
                                              Eigen::VectorXd::Zero(param_count(arch))),
                        std::invalid_argument);
    }
}

TEST_CASE("lagrangian assembly") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = plain_config();
    const MlpArchitecture arch = linear_arch();
    const MlpParams p = init_params(arch, 31);

    Dataset d;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 25; ++i) {
        Sample s;
        s.x = State(u(rng), u(rng), 4.0 * u(rng), 10.0 * u(rng));
        s.u_star = 3.0 * u(rng);
        d.samples.push_back(s);
    }

    const double loss = prediction_loss(d, arch, p.theta);
    const Eigen::VectorXd agg = aggregate_constraints(d, model, cfg, arch, p.theta);

    SUBCASE("zero multipliers reduce to the loss") {
        CHECK(lagrangian(d, model, cfg, arch, p.theta, Eigen::VectorXd::Zero(8)) ==
              doctest::Approx(loss).epsilon(1e-14));
    }
    SUBCASE("unit multipliers add the aggregate sum") {
        CHECK(lagrangian(d, model, cfg, arch, p.theta, Eigen::VectorXd::Ones(8)) ==
              doctest::Approx(loss + agg.sum()).epsilon(1e-12));
    }
    SUBCASE("perfect feasible predictions give zero") {
        Dataset exact;
        for (int i = 0; i < 10; ++i) {
            Sample s;
            s.x = State(0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng), 0.1 * u(rng));
            s.u_star = forward(arch, Eigen::VectorXd::Zero(param_count(arch)), s.x);
            exact.samples.push_back(s);
        }
        CHECK(lagrangian(exact, model, cfg, arch,
                         Eigen::VectorXd::Zero(param_count(arch)),
                         Eigen::VectorXd::Ones(8)) == 0.0);
    }
}

TEST_CASE("lagrangian gradient matches finite differences through the dynamics") {
    const DiscreteModel model = test::default_model();
    const MpcConfig cfg = plain_config();
    MlpArchitecture arch;
    arch.hidden_layers = 2;
    arch.hidden_width = 6;

    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset d;
    for (int i = 0; i < 12; ++i) {
        Sample s;
        // keep states near the bounds so several rows are active
        s.x = State(u(rng), 2.0 * u(rng), 5.0 * u(rng), 13.0 * u(rng));
        s.u_star = 6.0 * u(rng);
        d.samples.push_back(s);
    }

    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        MlpParams p = init_params(arch, 100 + trial);
        p.theta *= 3.0;  // push some outputs toward constraint violation
        Eigen::VectorXd lambda(8);
        for (int r = 0; r < 8; ++r) lambda[r] = std::abs(u(rng));

        Eigen::VectorXd grad;
        lagrangian_with_gradient(d, model, cfg, arch, p.theta, lambda, grad);

        const double h = 1e-6;
        for (int j = 0; j < p.theta.size(); j += 11) {
            Eigen::VectorXd tp = p.theta, tm = p.theta;
            tp[j] += h;
            tm[j] -= h;
            const double fd = (lagrangian(d, model, cfg, arch, tp, lambda) -
                               lagrangian(d, model, cfg, arch, tm, lambda)) /
                              (2.0 * h);
            worst = std::max(worst, std::abs(grad[j] - fd) /
                                        std::max(1e-4, std::abs(fd)));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("normal training fits an exactly realizable linear policy") {
    const Eigen::RowVector4d k(0.8, -1.2, 0.3, 0.05);
    const Dataset d = linear_policy_dataset(k, 60, 77);

    TrainConfig cfg;
    cfg.warmup_epochs = 2500;
    cfg.constraint_epochs = 0;
    cfg.fine_tune_epochs = 0;
    cfg.alpha_theta = 2e-2;
    cfg.seed = 5;

    const TrainResult res = train_normal(d, linear_arch(), cfg);
    CHECK(res.report.epoch_loss.back() < 1e-8);
}

TEST_CASE("training is deterministic given the seed") {
    const Eigen::RowVector4d k(0.5, 0.5, -0.5, 0.1);
    const Dataset d = linear_policy_dataset(k, 40, 3);
    TrainConfig cfg;
    cfg.warmup_epochs = 50;
    cfg.constraint_epochs = 0;
    cfg.fine_tune_epochs = 0;
    cfg.seed = 9;
    const TrainResult a = train_normal(d, linear_arch(), cfg);
    const TrainResult b = train_normal(d, linear_arch(), cfg);
    CHECK((a.params.theta - b.params.theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite loss aborts training with a diagnostic") {
    const Eigen::RowVector4d k(0.5, 0.5, -0.5, 0.1);
    Dataset d = linear_policy_dataset(k, 40, 3);
    d.samples[7].u_star = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.warmup_epochs = 10;
    cfg.constraint_epochs = 0;
    cfg.fine_tune_epochs = 0;
    CHECK_THROWS_WITH_AS(train_normal(d, linear_arch(), cfg),
                         doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("ascent rate schedule") {
    TrainConfig cfg;
    cfg.alpha_lambda_0 = 1.0;
    cfg.decay_eta = 0.1;
    CHECK(lambda_rate(cfg, 10) == doctest::Approx(0.5));
    CHECK(lambda_rate(cfg, 0) == doctest::Approx(1.0));
}

TEST_CASE("constrained training on a feasible problem leaves multipliers at zero") {
    const DiscreteModel model = test::default_model();
    const MpcConfig mpc = plain_config();
    // labels well inside every bound and states near the origin: after
    // warm-up the network output stays feasible, so the aggregate vanishes
    const Eigen::RowVector4d k(0.2, -0.1, 0.05, 0.01);
    Dataset d;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (int i = 0; i < 50; ++i) {
        Sample s;
        s.x = State(u(rng), u(rng), u(rng), u(rng));
        s.u_star = (k * s.x)(0);
        d.samples.push_back(s);
    }
    TrainConfig cfg;
    cfg.warmup_epochs = 300;
    cfg.constraint_epochs = 100;
    cfg.fine_tune_epochs = 10;
    cfg.alpha_theta = 1e-2;
    cfg.seed = 6;

    const TrainResult res = train_constrained(d, linear_arch(), cfg, model, mpc);
    CHECK(res.lagrange.lambda.cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.lagrange.t_outer == 1);
    CHECK(res.lagrange.exit_reason == "threshold");
}

TEST_CASE("multipliers are non-decreasing and increments equal the aggregate") {
    const DiscreteModel model = test::default_model();
    const MpcConfig mpc = plain_config();
    // infeasible labels: |u_star| beyond the voltage bound forces violations
    Dataset d;
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 60; ++i) {
        Sample s;
        s.x = State(u(rng), u(rng), 5.0 * u(rng), 14.0 * u(rng));
        s.u_star = 9.0 * (u(rng) > 0 ? 1.0 : -1.0);
        d.samples.push_back(s);
    }
    TrainConfig cfg;
    cfg.warmup_epochs = 100;
    cfg.constraint_epochs = 60;
    cfg.fine_tune_epochs = 5;
    cfg.alpha_theta = 1e-2;
    cfg.seed = 1;

    const TrainResult res = train_constrained(d, linear_arch(), cfg, model, mpc);
    REQUIRE(res.lagrange.t_outer >= 2);

    Eigen::VectorXd prev = Eigen::VectorXd::Zero(8);
    for (size_t i = 0; i < res.lagrange.lambda_history.size(); ++i) {
        const Eigen::VectorXd& cur = res.lagrange.lambda_history[i];
        CHECK((cur - prev).minCoeff() >= 0.0);  // ascent never decreases a row
        // increment = alpha * aggregate, exactly
        const Eigen::VectorXd expected =
            prev + res.lagrange.alpha_history[i] * res.lagrange.aggregate_history[i];
        CHECK((cur - expected).cwiseAbs().maxCoeff() < 1e-15);
        prev = cur;
    }
    CHECK(res.lagrange.lambda.cwiseAbs().maxCoeff() > 0.0);
}

}  // TEST_SUITE
