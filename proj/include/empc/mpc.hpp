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

#ifndef EMPC_MPC_HPP
#define EMPC_MPC_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "empc/dynamics.hpp"

namespace empc {

/// How the end of the prediction horizon is treated.
/// kHard enforces V_f(x_N) <= c_f as a constraint; kCostOnly drops the
/// constraint and relies on the terminal cost alone (used for swing-up,
/// where the hard terminal set is unreachable within the horizon).
enum class TerminalMode { kHard, kCostOnly };

/// Box bounds on states and control. q2 is unbounded.
struct BoxBounds {
    double q1 = 1.0;       // |q1| <= q1
    double q1_dot = 6.0;   // |q1_dot| <= q1_dot
    double q2_dot = 15.0;  // |q2_dot| <= q2_dot
    double voltage = 6.0;  // |v| <= voltage
};

struct MpcConfig {
    int horizon = 10;  // N
    Eigen::Matrix4d Q = Eigen::Vector4d(8.0, 3.0, 0.2, 0.1).asDiagonal();
    double R = 0.1;
    Eigen::Matrix4d Qf = Eigen::Matrix4d::Identity();  // terminal weight, from DARE
    BoxBounds bounds;
    double c_f = 1.0;      // terminal level, V_f(x_N) <= c_f
    double gamma_f = 0.9;  // terminal contraction factor, in (0,1)
    TerminalMode terminal_mode = TerminalMode::kHard;

    // Solver tolerances. Constraint rows count as satisfied up to tol_feas;
    // status Infeasible is declared only above infeas_cut so numerical slack
    // is not mistaken for true infeasibility.
    double tol_feas = 1e-6;
    double infeas_cut = 1e-4;
    double tol_step = 1e-9;   // converged when the SQP step falls below this
    int max_sqp_iter = 200;

    void validate() const;  // throws std::invalid_argument on bad invariants

    double stage_cost(const State& x, double u) const;
    double terminal_cost(const State& x) const;
};

/// One affine constraint row g(z) = sign * z[index] - bound <= 0.
struct ConstraintRow {
    enum class Kind { kState, kControl };
    Kind kind;
    int index;     // state component (kState) or 0 (kControl)
    double sign;   // +1 or -1
    double bound;
    std::string name;
};

/// Row-wise box constraints in the fixed order used everywhere:
/// state rows [+q1, -q1, +q1_dot, -q1_dot, +q2_dot, -q2_dot], then control
/// rows [+v, -v]. Values <= 0 mean satisfied.
class ConstraintSpec {
public:
    explicit ConstraintSpec(const BoxBounds& bounds);

    const std::vector<ConstraintRow>& rows() const { return rows_; }
    int n_rows() const { return static_cast<int>(rows_.size()); }
    int n_state_rows() const { return n_state_rows_; }
    int n_control_rows() const { return n_rows() - n_state_rows_; }

    double eval_row(int r, const State& x, double u) const;
    /// Stacked evaluation of all rows at one (state, control) pair.
    Eigen::VectorXd eval_all(const State& x, double u) const;
    /// State rows only, at a state.
    Eigen::VectorXd eval_state_rows(const State& x) const;

    bool state_in_box(const State& x, double tol) const;

private:
    std::vector<ConstraintRow> rows_;
    int n_state_rows_ = 0;
};

enum class SolveStatus { kOptimal, kMaxIter, kInfeasible };

const char* to_string(SolveStatus s);

struct MpcSolution {
    Eigen::VectorXd u_seq;             // optimal control sequence U*, length N
    double value = 0.0;                // V*_N
    std::vector<State> states;         // predicted x_0 .. x_N
    SolveStatus status = SolveStatus::kMaxIter;
    int iterations = 0;
    double solve_time_ms = 0.0;
    double max_violation = 0.0;        // residual constraint violation

    std::string to_json() const;
};

/// Solve the discrete algebraic Riccati equation by fixed-point iteration
/// with a symmetrization step each sweep. Returns P with
/// ||P - (A'PA - A'PB (R + B'PB)^-1 B'PA + Q)||_inf <= tol.
/// Throws std::runtime_error (carrying the last residual) on non-convergence.
Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           double tol = 1e-9, int max_iter = 100000);

/// LQR feedback gain K = (R + B'PB)^-1 B'PA for the DARE solution P;
/// the terminal controller is u_f(x) = -K x.
Eigen::RowVector4d lqr_gain(const Eigen::Matrix4d& A, const Eigen::Vector4d& B,
                            const Eigen::Matrix4d& P, double R);

/// Iterate system.step along a control sequence; returns x_0 .. x_N.
std::vector<State> rollout(const DiscreteSystem& system, const State& x,
                           const Eigen::VectorXd& u_seq);

/// Evaluate every constraint row over a predicted trajectory:
/// state rows on x_1..x_{N-1}, control rows on u_0..u_{N-1}, and (in kHard
/// mode) the terminal condition V_f(x_N) - c_f as a trailing row. Returns
/// per-row maxima over the horizon; feasible iff all <= tol_feas.
struct FeasibilityCheck {
    bool feasible = false;
    Eigen::VectorXd row_violations;  // state rows, control rows [, terminal]
};
FeasibilityCheck check_feasibility(const MpcConfig& config,
                                   const std::vector<State>& states,
                                   const Eigen::VectorXd& u_seq);

/// Exact MPC oracle: minimize sum of stage costs plus terminal cost subject
/// to dynamics, box constraints and (mode-dependent) the terminal level set,
/// by SQP over the single-shooting control sequence. Each SQP step
/// linearizes the dynamics along the current rollout, solves the resulting
/// QP with an augmented-Lagrangian inner loop and line-searches on an l1
/// merit of the true cost. Pass the previous shifted sequence as warm start
/// for receding-horizon use.
MpcSolution solve_mpc(const DiscreteSystem& system, const MpcConfig& config,
                      const State& x,
                      const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

/// Deterministic multi-start solve for oracle-quality labels: tries the zero
/// sequence, saturated and half-horizon bang profiles and the clamped-LQR
/// rollout, and keeps the best converged solution by value. The cost
/// landscape is multimodal away from the origin and a single local solve can
/// land in a poor basin.
MpcSolution solve_mpc_multistart(const DiscreteSystem& system,
                                 const MpcConfig& config, const State& x);

/// Receding-horizon control: the first element of the optimal sequence.
struct PolicyResult {
    double u = 0.0;
    MpcSolution solution;
};
PolicyResult mpc_policy(const DiscreteSystem& system, const MpcConfig& config,
                        const State& x,
                        const std::optional<Eigen::VectorXd>& warm_start = std::nullopt);

/// Shifted warm-start candidate [u*_1, ..., u*_{N-1}, u_f(x_{N-1})] with the
/// clamped LQR terminal controller appended.
Eigen::VectorXd shifted_warm_start(const MpcSolution& previous,
                                   const Eigen::RowVector4d& K,
                                   double control_bound);

/// Calibration of the terminal ingredients: c_f is found by bisection as the
/// largest level of V_f on which sampled boundary points stay inside the
/// state box, the clamped LQR controller respects the control bound, maps
/// into the level set and contracts V_f. gamma_f is the largest observed
/// contraction ratio V_f(f(x, u_f)) / V_f(x) on the calibrated boundary.
struct TerminalCalibration {
    Eigen::Matrix4d Qf;
    Eigen::RowVector4d K;
    double c_f = 0.0;
    double gamma_f = 0.0;
};
TerminalCalibration calibrate_terminal(const DiscreteModel& model,
                                       const MpcConfig& config,
                                       int n_directions = 256,
                                       unsigned seed = 0);

}  // namespace empc

#endif  // EMPC_MPC_HPP
