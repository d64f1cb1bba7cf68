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

#ifndef EMPC_TRAIN_HPP
#define EMPC_TRAIN_HPP

#include <string>
#include <vector>

#include "empc/dataset.hpp"
#include "empc/dynamics.hpp"
#include "empc/mpc.hpp"
#include "empc/nn.hpp"

namespace empc {

/// Single-step feasibility surrogate for a learned first control: the state
/// box rows evaluated at x+ = f(x, u_hat) stacked with the control rows at
/// (x, u_hat). Row order matches ConstraintSpec. Values <= 0 mean satisfied.
Eigen::VectorXd single_step_constraint(const DiscreteModel& model,
                                       const MpcConfig& mpc, const State& x,
                                       double u_hat);

/// Mean-ReLU aggregation per constraint row over a batch:
/// per row r, (1/N) sum_i max(C_r(x_i, u_hat_i), 0). Exactly zero iff every
/// sample satisfies the row. Throws std::invalid_argument on an empty batch.
Eigen::VectorXd aggregate_constraints(const Dataset& batch,
                                      const DiscreteModel& model,
                                      const MpcConfig& mpc,
                                      const MlpArchitecture& arch,
                                      const Eigen::VectorXd& theta);

/// Mean squared control-prediction error over the batch.
double prediction_loss(const Dataset& batch, const MlpArchitecture& arch,
                       const Eigen::VectorXd& theta);

/// Lagrangian of the constrained learning problem:
/// loss + sum_r lambda_r * aggregate_r.
double lagrangian(const Dataset& batch, const DiscreteModel& model,
                  const MpcConfig& mpc, const MlpArchitecture& arch,
                  const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda);

/// Same value, plus the exact reverse-mode gradient w.r.t. theta (through
/// the network and the dynamics step). Optional outputs receive the loss
/// term and the aggregated constraint vector evaluated at theta.
double lagrangian_with_gradient(const Dataset& batch, const DiscreteModel& model,
                                const MpcConfig& mpc, const MlpArchitecture& arch,
                                const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& lambda,
                                Eigen::VectorXd& grad, double* loss_out = nullptr,
                                Eigen::VectorXd* aggregate_out = nullptr);

struct TrainConfig {
    int warmup_epochs = 1200;     // i_theta: epochs on the plain loss
    int constraint_epochs = 700;  // inner-step budget of the multiplier loop
    int fine_tune_epochs = 100;   // epochs with frozen multipliers
    int inner_steps_initial = 5;  // s
    int inner_step_increment = 1; // d
    double alpha_theta = 3e-3;    // Adam step size
    double alpha_lambda_0 = 0.1;  // initial multiplier ascent rate
    double decay_eta = 0.01;      // ascent-rate decay coefficient
    double stop_threshold = 1e-4; // exit when ||Lambda_t - Lambda_{t-1}||_inf <= this
    int max_outer_iters = 10000;
    unsigned long long seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    int total_epochs() const {
        return warmup_epochs + constraint_epochs + fine_tune_epochs;
    }
    void validate() const;
};

/// Multiplier ascent rate schedule alpha_lambda_0 / (1 + eta * t), with t the
/// number of parameter updates taken so far.
double lambda_rate(const TrainConfig& config, int t);

struct LagrangeState {
    Eigen::VectorXd lambda;
    int t_outer = 0;
    std::vector<double> delta_history;               // ||dLambda||_inf per outer iter
    std::vector<Eigen::VectorXd> lambda_history;     // Lambda after each outer iter
    std::vector<Eigen::VectorXd> aggregate_history;  // ascent increment (= aggregate)
    std::vector<double> alpha_history;               // rate used at each outer iter
    std::string exit_reason;                         // threshold | budget | max_outer
};

struct LossReport {
    std::vector<double> epoch_loss;     // prediction loss per epoch
    std::vector<double> epoch_penalty;  // multiplier penalty per epoch
    int epochs = 0;
    std::string warning;
};

struct TrainResult {
    MlpParams params;
    LagrangeState lagrange;
    LossReport report;
};

/// Plain full-batch training on the prediction loss for the same total epoch
/// budget as the constrained schedule. Deterministic given the seed.
/// Throws std::runtime_error if the loss turns non-finite.
TrainResult train_normal(const Dataset& dataset, const MlpArchitecture& arch,
                         const TrainConfig& config);

/// Constrained training: warm-up descent on the loss, then alternating
/// multiplier ascent (increment = aggregated constraint vector, rate
/// alpha_lambda_0 / (1 + eta * t)) with blocks of inner descent epochs on the
/// Lagrangian, then fine-tuning with frozen multipliers.
TrainResult train_constrained(const Dataset& dataset, const MlpArchitecture& arch,
                              const TrainConfig& config,
                              const DiscreteModel& model, const MpcConfig& mpc);

}  // namespace empc

#endif  // EMPC_TRAIN_HPP
