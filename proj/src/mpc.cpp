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

#include "empc/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace empc {

void MpcConfig::validate() const {
    if (horizon < 1) throw std::invalid_argument("mpc.N must be >= 1");
    if (!(R > 0.0)) throw std::invalid_argument("mpc.R must be > 0");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es_q(Q);
    if (es_q.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("mpc.Q must be positive definite");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es_qf(Qf);
    if (es_qf.eigenvalues().minCoeff() <= 0.0) {
        throw std::invalid_argument("mpc.Qf must be positive definite");
    }
    if (!(bounds.q1 > 0.0 && bounds.q1_dot > 0.0 && bounds.q2_dot > 0.0 &&
          bounds.voltage > 0.0)) {
        throw std::invalid_argument("mpc bounds must be > 0");
    }
    if (!(c_f > 0.0)) throw std::invalid_argument("mpc.c_f must be > 0");
    if (!(gamma_f > 0.0 && gamma_f < 1.0)) {
        throw std::invalid_argument("mpc.gamma_f must be in (0,1)");
    }
}

double MpcConfig::stage_cost(const State& x, double u) const {
    return x.dot(Q * x) + R * u * u;
}

double MpcConfig::terminal_cost(const State& x) const { return x.dot(Qf * x); }

ConstraintSpec::ConstraintSpec(const BoxBounds& bounds) {
    using Kind = ConstraintRow::Kind;
    rows_.push_back({Kind::kState, kQ1, +1.0, bounds.q1, "+q1"});
    rows_.push_back({Kind::kState, kQ1, -1.0, bounds.q1, "-q1"});
    rows_.push_back({Kind::kState, kQ1Dot, +1.0, bounds.q1_dot, "+q1_dot"});
    rows_.push_back({Kind::kState, kQ1Dot, -1.0, bounds.q1_dot, "-q1_dot"});
    rows_.push_back({Kind::kState, kQ2Dot, +1.0, bounds.q2_dot, "+q2_dot"});
    rows_.push_back({Kind::kState, kQ2Dot, -1.0, bounds.q2_dot, "-q2_dot"});
    n_state_rows_ = static_cast<int>(rows_.size());
    rows_.push_back({Kind::kControl, 0, +1.0, bounds.voltage, "+v"});
    rows_.push_back({Kind::kControl, 0, -1.0, bounds.voltage, "-v"});
}

double ConstraintSpec::eval_row(int r, const State& x, double u) const {
    const ConstraintRow& row = rows_[static_cast<size_t>(r)];
    const double z = row.kind == ConstraintRow::Kind::kState ? x[row.index] : u;
    return row.sign * z - row.bound;
}

Eigen::VectorXd ConstraintSpec::eval_all(const State& x, double u) const {
    Eigen::VectorXd v(n_rows());
    for (int r = 0; r < n_rows(); ++r) v[r] = eval_row(r, x, u);
    return v;
}

Eigen::VectorXd ConstraintSpec::eval_state_rows(const State& x) const {
    Eigen::VectorXd v(n_state_rows_);
    for (int r = 0; r < n_state_rows_; ++r) v[r] = eval_row(r, x, 0.0);
    return v;
}

bool ConstraintSpec::state_in_box(const State& x, double tol) const {
    return eval_state_rows(x).maxCoeff() <= tol;
}

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::kOptimal: return "optimal";
        case SolveStatus::kMaxIter: return "max_iter";
        case SolveStatus::kInfeasible: return "infeasible";
    }
    return "unknown";
}

std::string MpcSolution::to_json() const {
    nlohmann::json j;
    j["status"] = to_string(status);
    j["value"] = value;
    j["iterations"] = iterations;
    j["solve_time_ms"] = solve_time_ms;
    j["max_violation"] = max_violation;
    j["u_seq"] = std::vector<double>(u_seq.data(), u_seq.data() + u_seq.size());
    std::vector<std::vector<double>> xs;
    for (const State& x : states) {
        xs.push_back({x[0], x[1], x[2], x[3]});
    }
    j["predicted_states"] = xs;
    return j.dump(2);
}

Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           double tol, int max_iter) {
    const auto riccati_map = [&](const Eigen::MatrixXd& P) -> Eigen::MatrixXd {
        const Eigen::MatrixXd BtP = B.transpose() * P;
        const Eigen::MatrixXd S = R + BtP * B;
        const Eigen::MatrixXd K = S.ldlt().solve(BtP * A);
        return Q + A.transpose() * P * A - A.transpose() * P * B * K;
    };
    Eigen::MatrixXd P = Q;
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd next = riccati_map(P);
        next = 0.5 * (next + next.transpose().eval());
        residual = (next - P).cwiseAbs().maxCoeff();
        P = next;
        if (residual <= tol) {
            return P;
        }
    }
    throw std::runtime_error("solve_dare: no convergence, last residual " +
                             std::to_string(residual));
}

Eigen::RowVector4d lqr_gain(const Eigen::Matrix4d& A, const Eigen::Vector4d& B,
                            const Eigen::Matrix4d& P, double R) {
    const double s = R + B.dot(P * B);
    return (B.transpose() * P * A) / s;
}

std::vector<State> rollout(const DiscreteSystem& system, const State& x,
                           const Eigen::VectorXd& u_seq) {
    std::vector<State> states;
    states.reserve(static_cast<size_t>(u_seq.size()) + 1);
    states.push_back(x);
    for (Eigen::Index k = 0; k < u_seq.size(); ++k) {
        states.push_back(system.step(states.back(), u_seq[k]));
    }
    return states;
}

FeasibilityCheck check_feasibility(const MpcConfig& config,
                                   const std::vector<State>& states,
                                   const Eigen::VectorXd& u_seq) {
    if (states.size() != static_cast<size_t>(u_seq.size()) + 1) {
        throw std::invalid_argument(
            "check_feasibility: states must be one longer than controls");
    }
    const ConstraintSpec spec(config.bounds);
    const bool hard = config.terminal_mode == TerminalMode::kHard;
    Eigen::VectorXd viol =
        Eigen::VectorXd::Constant(spec.n_rows() + (hard ? 1 : 0),
                                  -std::numeric_limits<double>::infinity());
    const size_t n = states.size() - 1;  // index of x_N
    // state rows on x_1 .. x_{N-1}; x_N is covered by the terminal row
    for (size_t k = 1; k < n; ++k) {
        for (int r = 0; r < spec.n_state_rows(); ++r) {
            viol[r] = std::max(viol[r], spec.eval_row(r, states[k], 0.0));
        }
    }
    for (Eigen::Index k = 0; k < u_seq.size(); ++k) {
        for (int r = spec.n_state_rows(); r < spec.n_rows(); ++r) {
            viol[r] = std::max(viol[r], spec.eval_row(r, State::Zero(), u_seq[k]));
        }
    }
    if (hard) {
        viol[spec.n_rows()] = config.terminal_cost(states[n]) - config.c_f;
    }
    FeasibilityCheck out;
    out.row_violations = viol;
    out.feasible = viol.maxCoeff() <= config.tol_feas;
    return out;
}

namespace {

// Affine inequality row a'd + b <= 0 in the step variable d, remembering
// which trajectory quantity it linearizes so the true residual can be
// re-evaluated after a trial step.
struct QpRow {
    Eigen::VectorXd a;
    double b;
    enum class Type { kState, kControl, kTerminal };
    Type type;
    int k;         // horizon index
    int spec_row;  // ConstraintSpec row for kState/kControl
};

// Convex QP  min 1/2 d'Hd + g'd  s.t. rows <= 0, solved by an augmented
// Lagrangian outer loop with a semismooth Newton inner loop (the AL function
// is C^1 convex piecewise quadratic). Multipliers persist across SQP
// iterations through `lambda`, indexed by the caller's full row numbering;
// rows that cannot activate within the trust radius are skipped.
struct QpOutcome {
    Eigen::VectorXd d;
    bool converged = false;
    bool penalty_capped = false;
    double violation = 0.0;
};

QpOutcome solve_qp_al(const Eigen::MatrixXd& H, const Eigen::VectorXd& g,
                      const std::vector<QpRow>& rows, Eigen::VectorXd& lambda,
                      double trust_radius) {
    const Eigen::Index n = g.size();
    const double feas_tol = 1e-10;
    const double mu_max = 1e10;
    double mu = 1e4;

    // A row with b_i << 0 stays inactive for every ||d||_inf <= trust_radius.
    std::vector<int> live;
    for (size_t i = 0; i < rows.size(); ++i) {
        const double reach = rows[i].a.cwiseAbs().sum() * trust_radius;
        if (rows[i].b + reach > -1e-9 || lambda[static_cast<Eigen::Index>(i)] > 0.0) {
            live.push_back(static_cast<int>(i));
        }
    }

    QpOutcome out;
    out.d = Eigen::VectorXd::Zero(n);
    const int m = static_cast<int>(live.size());
    Eigen::VectorXd c(m);
    double prev_viol = std::numeric_limits<double>::infinity();

    for (int outer = 0; outer < 14; ++outer) {
        // inner Newton on the AL function
        for (int inner = 0; inner < 25; ++inner) {
            Eigen::VectorXd grad = H * out.d + g;
            Eigen::MatrixXd hess = H;
            for (int i = 0; i < m; ++i) {
                const QpRow& row = rows[static_cast<size_t>(live[static_cast<size_t>(i)])];
                c[i] = row.a.dot(out.d) + row.b;
                const double t = lambda[live[static_cast<size_t>(i)]] + mu * c[i];
                if (t > 0.0) {
                    grad += t * row.a;
                    hess.selfadjointView<Eigen::Lower>().rankUpdate(row.a, mu);
                }
            }
            hess.triangularView<Eigen::StrictlyUpper>() =
                hess.transpose().triangularView<Eigen::StrictlyUpper>();
            hess.diagonal().array() += 1e-12;
            const Eigen::VectorXd step = hess.ldlt().solve(-grad);
            out.d += step;
            if (step.cwiseAbs().maxCoeff() < 1e-13) break;
        }
        double viol = 0.0;
        for (int i = 0; i < m; ++i) {
            const QpRow& row = rows[static_cast<size_t>(live[static_cast<size_t>(i)])];
            c[i] = row.a.dot(out.d) + row.b;
            lambda[live[static_cast<size_t>(i)]] =
                std::max(0.0, lambda[live[static_cast<size_t>(i)]] + mu * c[i]);
            viol = std::max(viol, c[i]);
        }
        viol = std::max(viol, 0.0);
        out.violation = viol;
        if (viol <= feas_tol) {
            out.converged = true;
            break;
        }
        if (viol > 0.25 * prev_viol) {
            if (mu >= mu_max) {
                out.penalty_capped = true;
                break;
            }
            mu = std::min(mu * 10.0, mu_max);
        }
        prev_viol = viol;
    }
    // Trust region: the linearized model is only valid locally.
    for (Eigen::Index j = 0; j < n; ++j) {
        out.d[j] = std::clamp(out.d[j], -trust_radius, trust_radius);
    }
    return out;
}

double trajectory_cost(const MpcConfig& config, const std::vector<State>& states,
                       const Eigen::VectorXd& u) {
    double cost = 0.0;
    for (Eigen::Index k = 0; k < u.size(); ++k) {
        cost += config.stage_cost(states[static_cast<size_t>(k)], u[k]);
    }
    cost += config.terminal_cost(states.back());
    return cost;
}

// Worst true-constraint violation of a rollout (state, control and, in hard
// mode, terminal rows).
double trajectory_violation(const MpcConfig& config, const ConstraintSpec& spec,
                            const std::vector<State>& states,
                            const Eigen::VectorXd& u) {
    double viol = 0.0;
    const size_t n = states.size() - 1;
    for (size_t k = 1; k < n; ++k) {
        viol = std::max(viol, spec.eval_state_rows(states[k]).maxCoeff());
    }
    for (Eigen::Index k = 0; k < u.size(); ++k) {
        viol = std::max(viol, std::abs(u[k]) - config.bounds.voltage);
    }
    if (config.terminal_mode == TerminalMode::kHard) {
        viol = std::max(viol, config.terminal_cost(states[n]) - config.c_f);
    }
    return std::max(viol, 0.0);
}

// Rollout that stops at the first non-finite state (an overshooting trial
// sequence can blow up the explicit integrator); returns false in that case.
bool try_rollout(const DiscreteSystem& system, const State& x,
                 const Eigen::VectorXd& u_seq, std::vector<State>& states) {
    states.clear();
    states.reserve(static_cast<size_t>(u_seq.size()) + 1);
    states.push_back(x);
    for (Eigen::Index k = 0; k < u_seq.size(); ++k) {
        if (!states.back().allFinite() || !std::isfinite(u_seq[k])) return false;
        states.push_back(system.step(states.back(), u_seq[k]));
    }
    return states.back().allFinite();
}

double merit(const MpcConfig& config, const ConstraintSpec& spec,
             const std::vector<State>& states, const Eigen::VectorXd& u,
             double rho) {
    double phi = trajectory_cost(config, states, u);
    const size_t n = states.size() - 1;
    for (size_t k = 1; k < n; ++k) {
        const Eigen::VectorXd rows = spec.eval_state_rows(states[k]);
        for (Eigen::Index r = 0; r < rows.size(); ++r) {
            phi += rho * std::max(0.0, rows[r]);
        }
    }
    for (Eigen::Index k = 0; k < u.size(); ++k) {
        phi += rho * std::max(0.0, std::abs(u[k]) - config.bounds.voltage);
    }
    if (config.terminal_mode == TerminalMode::kHard) {
        phi += rho * std::max(0.0, config.terminal_cost(states[n]) - config.c_f);
    }
    return phi;
}

}  // namespace

MpcSolution solve_mpc(const DiscreteSystem& system, const MpcConfig& config,
                      const State& x,
                      const std::optional<Eigen::VectorXd>& warm_start) {
    const auto t_start = std::chrono::steady_clock::now();
    const int N = config.horizon;
    const ConstraintSpec spec(config.bounds);

    MpcSolution sol;
    sol.u_seq = Eigen::VectorXd::Zero(N);

    auto finish = [&](SolveStatus status) {
        sol.status = status;
        sol.states = rollout(system, x, sol.u_seq);
        sol.value = trajectory_cost(config, sol.states, sol.u_seq);
        sol.max_violation = trajectory_violation(config, spec, sol.states, sol.u_seq);
        sol.solve_time_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                      t_start)
                .count();
        return sol;
    };

    // x_0 = x must itself lie in the state box.
    if (!spec.state_in_box(x, config.tol_feas)) {
        return finish(SolveStatus::kInfeasible);
    }

    if (warm_start) {
        if (warm_start->size() != N) {
            throw std::invalid_argument("solve_mpc: warm start length mismatch");
        }
        sol.u_seq = warm_start->cwiseMax(-config.bounds.voltage)
                        .cwiseMin(config.bounds.voltage);
    }

    const bool hard = config.terminal_mode == TerminalMode::kHard;
    const int n_rows = (N - 1) * spec.n_state_rows() +
                       N * spec.n_control_rows() + (hard ? 1 : 0);
    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(n_rows);

    std::vector<State> states = rollout(system, x, sol.u_seq);
    bool qp_penalty_capped = false;
    bool stalled = false;
    bool step_converged = false;

    for (int iter = 0; iter < config.max_sqp_iter; ++iter) {
        sol.iterations = iter + 1;

        // Sensitivities S_k = d x_k / d U along the current rollout.
        std::vector<Eigen::MatrixXd> S(static_cast<size_t>(N) + 1,
                                       Eigen::MatrixXd::Zero(4, N));
        for (int k = 0; k < N; ++k) {
            const Linearization lin =
                linearize(system, states[static_cast<size_t>(k)], sol.u_seq[k]);
            S[static_cast<size_t>(k) + 1] = lin.A * S[static_cast<size_t>(k)];
            S[static_cast<size_t>(k) + 1].col(k) += lin.B;
        }

        // Quadratic model of the cost in the step d (exact given the
        // linearized dynamics, since all costs are quadratic).
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(N);
        H.diagonal().array() += 2.0 * config.R;
        g += 2.0 * config.R * sol.u_seq;
        for (int k = 1; k < N; ++k) {
            const Eigen::MatrixXd& Sk = S[static_cast<size_t>(k)];
            H += 2.0 * Sk.transpose() * config.Q * Sk;
            g += 2.0 * Sk.transpose() * config.Q * states[static_cast<size_t>(k)];
        }
        const Eigen::MatrixXd& SN = S[static_cast<size_t>(N)];
        H += 2.0 * SN.transpose() * config.Qf * SN;
        g += 2.0 * SN.transpose() * config.Qf * states[static_cast<size_t>(N)];

        // Linearized constraint rows.
        std::vector<QpRow> rows;
        rows.reserve(static_cast<size_t>(n_rows));
        for (int k = 1; k < N; ++k) {
            for (int r = 0; r < spec.n_state_rows(); ++r) {
                const ConstraintRow& cr = spec.rows()[static_cast<size_t>(r)];
                QpRow row;
                row.a = cr.sign * S[static_cast<size_t>(k)].row(cr.index).transpose();
                row.b = cr.sign * states[static_cast<size_t>(k)][cr.index] - cr.bound;
                row.type = QpRow::Type::kState;
                row.k = k;
                row.spec_row = r;
                rows.push_back(std::move(row));
            }
        }
        for (int k = 0; k < N; ++k) {
            for (int r = spec.n_state_rows(); r < spec.n_rows(); ++r) {
                const ConstraintRow& cr = spec.rows()[static_cast<size_t>(r)];
                QpRow row;
                row.a = Eigen::VectorXd::Zero(N);
                row.a[k] = cr.sign;
                row.b = cr.sign * sol.u_seq[k] - cr.bound;
                row.type = QpRow::Type::kControl;
                row.k = k;
                row.spec_row = r;
                rows.push_back(std::move(row));
            }
        }
        if (hard) {
            QpRow row;
            row.a = 2.0 * SN.transpose() * config.Qf * states[static_cast<size_t>(N)];
            row.b = config.terminal_cost(states[static_cast<size_t>(N)]) - config.c_f;
            row.type = QpRow::Type::kTerminal;
            row.k = N;
            row.spec_row = -1;
            rows.push_back(std::move(row));
        }

        const auto true_row_value = [&](const QpRow& row,
                                        const std::vector<State>& st,
                                        const Eigen::VectorXd& u) -> double {
            switch (row.type) {
                case QpRow::Type::kState:
                    return spec.eval_row(row.spec_row, st[static_cast<size_t>(row.k)], 0.0);
                case QpRow::Type::kControl:
                    return spec.eval_row(row.spec_row, State::Zero(), u[row.k]);
                case QpRow::Type::kTerminal:
                    return config.terminal_cost(st.back()) - config.c_f;
            }
            return 0.0;
        };

        const QpOutcome qp =
            solve_qp_al(H, g, rows, lambda, 2.0 * config.bounds.voltage);
        qp_penalty_capped = qp.penalty_capped;

        if (qp.d.cwiseAbs().maxCoeff() <= config.tol_step) {
            step_converged = true;
            break;
        }

        // l1 merit line search on the true rollout, with a second-order
        // correction on the active rows when the full step overshoots their
        // curvature (the terminal level set is quadratic).
        const double rho = std::max(10.0, 2.0 * lambda.cwiseAbs().maxCoeff());
        const double phi0 = merit(config, spec, states, sol.u_seq, rho);
        bool accepted = false;

        Eigen::VectorXd u_try = sol.u_seq + qp.d;
        std::vector<State> states_try;
        if (try_rollout(system, x, u_try, states_try) &&
            merit(config, spec, states_try, u_try, rho) < phi0 - 1e-14) {
            accepted = true;
        } else {
            std::vector<int> active;
            for (int i = 0; i < n_rows; ++i) {
                if (lambda[i] > 1e-12) active.push_back(i);
            }
            if (!active.empty() && !states_try.empty() &&
                states_try.size() == static_cast<size_t>(N) + 1) {
                const int m = static_cast<int>(active.size());
                Eigen::MatrixXd A(m, N);
                Eigen::VectorXd r(m);
                for (int i = 0; i < m; ++i) {
                    const QpRow& row = rows[static_cast<size_t>(active[static_cast<size_t>(i)])];
                    A.row(i) = row.a.transpose();
                    r[i] = true_row_value(row, states_try, u_try);
                }
                Eigen::MatrixXd AAt = A * A.transpose();
                AAt.diagonal().array() += 1e-10;
                const Eigen::VectorXd d_soc = -A.transpose() * AAt.ldlt().solve(r);
                const Eigen::VectorXd u_soc = u_try + d_soc;
                std::vector<State> states_soc;
                if (try_rollout(system, x, u_soc, states_soc) &&
                    merit(config, spec, states_soc, u_soc, rho) < phi0 - 1e-14) {
                    u_try = u_soc;
                    states_try = std::move(states_soc);
                    accepted = true;
                }
            }
        }
        if (!accepted) {
            double alpha = 0.5;
            for (int ls = 0; ls < 11; ++ls) {
                u_try = sol.u_seq + alpha * qp.d;
                if (try_rollout(system, x, u_try, states_try) &&
                    merit(config, spec, states_try, u_try, rho) < phi0 - 1e-14) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if (accepted) {
            sol.u_seq = u_try;
            states = states_try;
        } else {
            stalled = true;
            break;
        }
    }

    const double viol = trajectory_violation(config, spec, states, sol.u_seq);
    if (viol <= config.tol_feas && (step_converged || stalled)) {
        return finish(SolveStatus::kOptimal);
    }
    if (viol > config.infeas_cut && (qp_penalty_capped || stalled || step_converged)) {
        return finish(SolveStatus::kInfeasible);
    }
    return finish(SolveStatus::kMaxIter);
}

MpcSolution solve_mpc_multistart(const DiscreteSystem& system,
                                 const MpcConfig& config, const State& x) {
    const int N = config.horizon;
    const double v = 0.8 * config.bounds.voltage;

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(Eigen::VectorXd::Zero(N));
    starts.push_back(Eigen::VectorXd::Constant(N, v));
    starts.push_back(Eigen::VectorXd::Constant(N, -v));
    Eigen::VectorXd ramp(N);
    for (int k = 0; k < N; ++k) ramp[k] = k < N / 2 ? v : -v;
    starts.push_back(ramp);
    starts.push_back(-ramp);
    {
        const Linearization lin = linearize(system, State::Zero(), 0.0);
        const Eigen::RowVector4d K = lqr_gain(lin.A, lin.B, config.Qf, config.R);
        Eigen::VectorXd lqr = Eigen::VectorXd::Zero(N);
        State xs = x;
        for (int k = 0; k < N; ++k) {
            lqr[k] = std::clamp(-(K * xs)(0), -config.bounds.voltage,
                                config.bounds.voltage);
            xs = system.step(xs, lqr[k]);
            if (!xs.allFinite()) break;
        }
        starts.push_back(lqr);
    }

    MpcSolution best;
    bool have = false;
    for (const Eigen::VectorXd& s : starts) {
        MpcSolution sol = solve_mpc(system, config, x, s);
        if (!have) {
            best = std::move(sol);
            have = true;
            continue;
        }
        const bool best_opt = best.status == SolveStatus::kOptimal;
        const bool sol_opt = sol.status == SolveStatus::kOptimal;
        if ((sol_opt && !best_opt) || (sol_opt == best_opt && sol.value < best.value)) {
            best = std::move(sol);
        }
    }
    return best;
}

PolicyResult mpc_policy(const DiscreteSystem& system, const MpcConfig& config,
                        const State& x,
                        const std::optional<Eigen::VectorXd>& warm_start) {
    PolicyResult res;
    res.solution = solve_mpc(system, config, x, warm_start);
    res.u = res.solution.u_seq.size() > 0 ? res.solution.u_seq[0] : 0.0;
    return res;
}

Eigen::VectorXd shifted_warm_start(const MpcSolution& previous,
                                   const Eigen::RowVector4d& K,
                                   double control_bound) {
    const Eigen::Index N = previous.u_seq.size();
    Eigen::VectorXd shifted(N);
    if (N == 0) return shifted;
    shifted.head(N - 1) = previous.u_seq.tail(N - 1);
    const State& x_last = previous.states.back();
    shifted[N - 1] =
        std::clamp(-(K * x_last)(0), -control_bound, control_bound);
    return shifted;
}

TerminalCalibration calibrate_terminal(const DiscreteModel& model,
                                       const MpcConfig& config,
                                       int n_directions, unsigned seed) {
    TerminalCalibration cal;
    const Linearization lin = linearize(model, State::Zero(), 0.0);
    Eigen::MatrixXd R(1, 1);
    R(0, 0) = config.R;
    cal.Qf = solve_dare(lin.A, lin.B, config.Q, R);
    cal.K = lqr_gain(lin.A, lin.B, cal.Qf, config.R);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::Vector4d> dirs;
    dirs.reserve(static_cast<size_t>(n_directions));
    for (int i = 0; i < n_directions; ++i) {
        Eigen::Vector4d d;
        do {
            for (int j = 0; j < 4; ++j) d[j] = gauss(rng);
        } while (d.norm() < 1e-9);
        dirs.push_back(d.normalized());
    }
    // Axis directions are always probed; they touch the box first.
    for (int j = 0; j < 4; ++j) {
        dirs.push_back(Eigen::Vector4d::Unit(j));
        dirs.push_back(-Eigen::Vector4d::Unit(j));
    }

    const ConstraintSpec spec(config.bounds);
    const auto boundary_point = [&](const Eigen::Vector4d& d, double c) -> State {
        return std::sqrt(c / d.dot(cal.Qf * d)) * d;
    };
    // The DARE cost decreases by exactly the stage cost along the LQR loop of
    // the linearized system; on the nonlinear model a cubic correction eats
    // into that. Demand strict contraction plus a quarter of the stage cost,
    // which bounds the usable level well inside the region where the
    // linearization is trustworthy.
    const double decrease_fraction = 0.25;
    const auto level_ok = [&](double c) -> bool {
        for (const Eigen::Vector4d& d : dirs) {
            const State xb = boundary_point(d, c);
            if (!spec.state_in_box(xb, 0.0)) return false;
            const double u = -(cal.K * xb)(0);
            if (std::abs(u) > config.bounds.voltage) return false;
            const State xn = model.step(xb, u);
            const double vf = xb.dot(cal.Qf * xb);
            const double vf_next = xn.dot(cal.Qf * xn);
            if (vf_next > (1.0 - 1e-3) * vf) return false;
            if (vf_next - vf > -decrease_fraction * config.stage_cost(xb, u)) {
                return false;
            }
        }
        return true;
    };

    double lo = 0.0;
    double hi = 1e-6;
    while (level_ok(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) break;
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (level_ok(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    cal.c_f = lo;
    if (!(cal.c_f > 0.0)) {
        throw std::runtime_error(
            "calibrate_terminal: no positive terminal level found");
    }

    double gamma = 0.0;
    for (const Eigen::Vector4d& d : dirs) {
        const State xb = boundary_point(d, cal.c_f);
        const double u = std::clamp(-(cal.K * xb)(0), -config.bounds.voltage,
                                    config.bounds.voltage);
        const State xn = model.step(xb, u);
        gamma = std::max(gamma, xn.dot(cal.Qf * xn) / xb.dot(cal.Qf * xb));
    }
    cal.gamma_f = gamma;
    return cal;
}

}  // namespace empc
