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

#include "empc/train.hpp"

#include <cmath>
#include <stdexcept>

namespace empc {

Eigen::VectorXd single_step_constraint(const DiscreteModel& model,
                                       const MpcConfig& mpc, const State& x,
                                       double u_hat) {
    const ConstraintSpec spec(mpc.bounds);
    const State x_next = euler_step(model, x, u_hat);
    Eigen::VectorXd c(spec.n_rows());
    for (int r = 0; r < spec.n_state_rows(); ++r) {
        c[r] = spec.eval_row(r, x_next, 0.0);
    }
    for (int r = spec.n_state_rows(); r < spec.n_rows(); ++r) {
        c[r] = spec.eval_row(r, x, u_hat);
    }
    return c;
}

namespace {

// Per-dataset quantities that do not change with theta. The dynamics are
// control-affine, so x+(u) = base_next + ctrl_jac * u exactly; ctrl_jac is
// the analytic control Jacobian of the Euler step.
struct BatchContext {
    Eigen::MatrixXd X;                     // 4 x n inputs
    Eigen::VectorXd y;                     // n labels
    std::vector<State> base_next;          // euler_step(x_i, 0)
    std::vector<Eigen::Vector4d> ctrl_jac; // d euler_step / du at x_i
    ConstraintSpec spec;

    // Loss-only context (plain training never touches the dynamics).
    explicit BatchContext(const Dataset& batch)
        : X(batch.inputs()), y(batch.labels()), spec(BoxBounds{}) {}

    BatchContext(const Dataset& batch, const DiscreteModel& model,
                 const MpcConfig& mpc)
        : X(batch.inputs()), y(batch.labels()), spec(mpc.bounds) {
        base_next.reserve(batch.samples.size());
        ctrl_jac.reserve(batch.samples.size());
        for (const Sample& s : batch.samples) {
            base_next.push_back(euler_step(model, s.x, 0.0));
            ctrl_jac.push_back(control_jacobian(model, s.x));
        }
    }
};

// Evaluates loss, aggregated constraints and (optionally) the per-sample
// upstream scalars for the reverse pass, given network outputs u_hat.
struct LagrangianTerms {
    double loss = 0.0;
    Eigen::VectorXd aggregate;  // n_c
    Eigen::VectorXd upstream;   // d Lagrangian / d u_hat_i (empty unless requested)
};

LagrangianTerms evaluate_terms(const BatchContext& ctx,
                               const Eigen::VectorXd& u_hat,
                               const Eigen::VectorXd& lambda,
                               bool want_upstream) {
    const int n = static_cast<int>(ctx.y.size());
    const int n_rows = ctx.spec.n_rows();
    const bool with_constraints = !ctx.base_next.empty();
    LagrangianTerms terms;
    terms.aggregate = Eigen::VectorXd::Zero(n_rows);
    if (want_upstream) terms.upstream = Eigen::VectorXd::Zero(n);

    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double err = u_hat[i] - ctx.y[i];
        loss += err * err;
        if (want_upstream) terms.upstream[i] = 2.0 * inv_n * err;
        if (!with_constraints) continue;

        const State x_next =
            ctx.base_next[static_cast<size_t>(i)] +
            ctx.ctrl_jac[static_cast<size_t>(i)] * u_hat[i];
        for (int r = 0; r < n_rows; ++r) {
            const ConstraintRow& row = ctx.spec.rows()[static_cast<size_t>(r)];
            double value;
            double d_value_du;
            if (row.kind == ConstraintRow::Kind::kState) {
                value = row.sign * x_next[row.index] - row.bound;
                d_value_du = row.sign * ctx.ctrl_jac[static_cast<size_t>(i)][row.index];
            } else {
                value = row.sign * u_hat[i] - row.bound;
                d_value_du = row.sign;
            }
            if (value > 0.0) {
                terms.aggregate[r] += inv_n * value;
                if (want_upstream && lambda.size() == n_rows) {
                    terms.upstream[i] += lambda[r] * inv_n * d_value_du;
                }
            }
        }
    }
    terms.loss = loss * inv_n;
    return terms;
}

void check_batch(const Dataset& batch) {
    if (batch.samples.empty()) {
        throw std::invalid_argument("empty batch");
    }
}

}  // namespace

Eigen::VectorXd aggregate_constraints(const Dataset& batch,
                                      const DiscreteModel& model,
                                      const MpcConfig& mpc,
                                      const MlpArchitecture& arch,
                                      const Eigen::VectorXd& theta) {
    check_batch(batch);
    const ConstraintSpec spec(mpc.bounds);
    const Eigen::VectorXd u_hat =
        forward_batch(arch, theta, batch.inputs()).row(0).transpose();
    Eigen::VectorXd agg = Eigen::VectorXd::Zero(spec.n_rows());
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (int i = 0; i < batch.size(); ++i) {
        const Eigen::VectorXd c = single_step_constraint(
            model, mpc, batch.samples[static_cast<size_t>(i)].x, u_hat[i]);
        agg += inv_n * c.cwiseMax(0.0);
    }
    return agg;
}

double prediction_loss(const Dataset& batch, const MlpArchitecture& arch,
                       const Eigen::VectorXd& theta) {
    check_batch(batch);
    const Eigen::VectorXd u_hat =
        forward_batch(arch, theta, batch.inputs()).row(0).transpose();
    return (u_hat - batch.labels()).squaredNorm() /
           static_cast<double>(batch.size());
}

double lagrangian(const Dataset& batch, const DiscreteModel& model,
                  const MpcConfig& mpc, const MlpArchitecture& arch,
                  const Eigen::VectorXd& theta, const Eigen::VectorXd& lambda) {
    check_batch(batch);
    return prediction_loss(batch, arch, theta) +
           lambda.dot(aggregate_constraints(batch, model, mpc, arch, theta));
}

double lagrangian_with_gradient(const Dataset& batch, const DiscreteModel& model,
                                const MpcConfig& mpc, const MlpArchitecture& arch,
                                const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& lambda,
                                Eigen::VectorXd& grad, double* loss_out,
                                Eigen::VectorXd* aggregate_out) {
    check_batch(batch);
    const BatchContext ctx(batch, model, mpc);
    ForwardCache cache;
    const Eigen::VectorXd u_hat =
        forward_batch(arch, theta, ctx.X, &cache).row(0).transpose();
    const LagrangianTerms terms = evaluate_terms(ctx, u_hat, lambda, true);
    grad = backward_batch(arch, theta, cache, terms.upstream.transpose());
    if (loss_out) *loss_out = terms.loss;
    if (aggregate_out) *aggregate_out = terms.aggregate;
    return terms.loss + lambda.dot(terms.aggregate);
}

void TrainConfig::validate() const {
    if (warmup_epochs < 0 || constraint_epochs < 0 || fine_tune_epochs < 0) {
        throw std::invalid_argument("training: epoch counts must be >= 0");
    }
    if (inner_steps_initial < 1 || inner_step_increment < 0) {
        throw std::invalid_argument("training: bad inner step schedule");
    }
    if (!(alpha_theta > 0.0) || !(alpha_lambda_0 > 0.0) || !(decay_eta >= 0.0)) {
        throw std::invalid_argument("training: rates must be > 0");
    }
    if (!(stop_threshold > 0.0)) {
        throw std::invalid_argument("training.stop_threshold must be > 0");
    }
    if (max_outer_iters < 1) {
        throw std::invalid_argument("training.max_outer_iters must be >= 1");
    }
}

namespace {

// Full-batch Adam over the flat parameter vector.
class Adam {
public:
    Adam(Eigen::Index n, const TrainConfig& cfg)
        : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)), cfg_(cfg) {}

    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
        ++t_;
        m_ = cfg_.adam_beta1 * m_ + (1.0 - cfg_.adam_beta1) * grad;
        v_ = cfg_.adam_beta2 * v_.array().matrix() +
             (1.0 - cfg_.adam_beta2) * grad.array().square().matrix();
        const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
        const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
        theta.array() -= cfg_.alpha_theta * (m_.array() / bc1) /
                         ((v_.array() / bc2).sqrt() + cfg_.adam_eps);
    }

private:
    Eigen::VectorXd m_, v_;
    TrainConfig cfg_;
    int t_ = 0;
};

struct Trainer {
    const MlpArchitecture& arch;
    const TrainConfig& config;
    const BatchContext ctx;
    Eigen::VectorXd theta;
    Adam adam;
    LossReport report;
    int theta_steps = 0;  // t in the ascent-rate schedule

    Trainer(const Dataset& ds, const MlpArchitecture& a, const TrainConfig& cfg)
        : arch(a), config(cfg), ctx(ds),
          theta(init_params(a, cfg.seed).theta),
          adam(theta.size(), cfg) {}

    Trainer(const Dataset& ds, const MlpArchitecture& a, const TrainConfig& cfg,
            const DiscreteModel& model, const MpcConfig& mpc)
        : arch(a), config(cfg), ctx(ds, model, mpc),
          theta(init_params(a, cfg.seed).theta),
          adam(theta.size(), cfg) {}

    // One full-batch epoch on the Lagrangian; returns the aggregate vector.
    Eigen::VectorXd epoch(const Eigen::VectorXd& lambda) {
        ForwardCache cache;
        const Eigen::VectorXd u_hat =
            forward_batch(arch, theta, ctx.X, &cache).row(0).transpose();
        const LagrangianTerms terms = evaluate_terms(ctx, u_hat, lambda, true);
        if (!std::isfinite(terms.loss)) {
            throw std::runtime_error(
                "training diverged: non-finite loss at epoch " +
                std::to_string(report.epochs));
        }
        const Eigen::VectorXd grad =
            backward_batch(arch, theta, cache, terms.upstream.transpose());
        adam.step(theta, grad);
        ++theta_steps;
        ++report.epochs;
        report.epoch_loss.push_back(terms.loss);
        report.epoch_penalty.push_back(lambda.size() == terms.aggregate.size()
                                           ? lambda.dot(terms.aggregate)
                                           : 0.0);
        return terms.aggregate;
    }

    Eigen::VectorXd current_aggregate(const Eigen::VectorXd& lambda) const {
        const Eigen::VectorXd u_hat =
            forward_batch(arch, theta, ctx.X).row(0).transpose();
        return evaluate_terms(ctx, u_hat, lambda, false).aggregate;
    }
};

}  // namespace

TrainResult train_normal(const Dataset& dataset, const MlpArchitecture& arch,
                         const TrainConfig& config) {
    check_batch(dataset);
    config.validate();
    arch.validate();
    // Same epoch budget as the constrained schedule, multipliers pinned at 0.
    Trainer tr(dataset, arch, config);
    const Eigen::VectorXd lambda = Eigen::VectorXd::Zero(tr.ctx.spec.n_rows());
    for (int e = 0; e < config.total_epochs(); ++e) {
        tr.epoch(lambda);
    }
    TrainResult out;
    out.params = {arch, tr.theta};
    out.lagrange.lambda = lambda;
    out.lagrange.exit_reason = "normal";
    out.report = std::move(tr.report);
    return out;
}

double lambda_rate(const TrainConfig& config, int t) {
    return config.alpha_lambda_0 / (1.0 + config.decay_eta * static_cast<double>(t));
}

TrainResult train_constrained(const Dataset& dataset, const MlpArchitecture& arch,
                              const TrainConfig& config,
                              const DiscreteModel& model, const MpcConfig& mpc) {
    check_batch(dataset);
    config.validate();
    arch.validate();
    Trainer tr(dataset, arch, config, model, mpc);

    LagrangeState lag;
    lag.lambda = Eigen::VectorXd::Zero(tr.ctx.spec.n_rows());

    // Warm up: descent on the plain loss (multipliers are zero).
    for (int e = 0; e < config.warmup_epochs; ++e) {
        tr.epoch(lag.lambda);
    }

    // Constraint phase: multiplier ascent alternating with inner descent.
    int inner_steps = config.inner_steps_initial;
    double alpha_lambda = config.alpha_lambda_0;
    int constraint_epochs_used = 0;
    lag.exit_reason = "budget";
    while (true) {
        if (lag.t_outer >= config.max_outer_iters) {
            lag.exit_reason = "max_outer";
            tr.report.warning = "multiplier loop hit max_outer_iters";
            break;
        }
        const Eigen::VectorXd increment = tr.current_aggregate(lag.lambda);
        lag.lambda += alpha_lambda * increment;
        lag.t_outer += 1;
        const double delta = alpha_lambda * increment.cwiseAbs().maxCoeff();
        lag.delta_history.push_back(delta);
        lag.lambda_history.push_back(lag.lambda);
        lag.aggregate_history.push_back(increment);
        lag.alpha_history.push_back(alpha_lambda);
        if (delta <= config.stop_threshold) {
            lag.exit_reason = "threshold";
            break;
        }
        bool budget_exhausted = false;
        for (int s = 0; s < inner_steps; ++s) {
            if (constraint_epochs_used >= config.constraint_epochs) {
                budget_exhausted = true;
                break;
            }
            tr.epoch(lag.lambda);
            ++constraint_epochs_used;
        }
        if (budget_exhausted) {
            lag.exit_reason = "budget";
            break;
        }
        inner_steps += config.inner_step_increment;
        alpha_lambda = lambda_rate(config, tr.theta_steps);
    }

    // Fine-tune with frozen multipliers.
    for (int e = 0; e < config.fine_tune_epochs; ++e) {
        tr.epoch(lag.lambda);
    }

    TrainResult out;
    out.params = {arch, tr.theta};
    out.lagrange = std::move(lag);
    out.report = std::move(tr.report);
    return out;
}

}  // namespace empc
