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

#ifndef EMPC_SIM_HPP
#define EMPC_SIM_HPP

#include <optional>
#include <string>
#include <vector>

#include "empc/mpc.hpp"
#include "empc/nn.hpp"

namespace empc {

enum class PolicyKind { kExactMpc, kNetwork, kClampedNetwork };

PolicyKind policy_kind_from_string(const std::string& s);
const char* to_string(PolicyKind k);

/// A runnable controller for the closed loop. Network kinds evaluate the
/// stored parameters; kClampedNetwork additionally clips the output to the
/// voltage bound.
struct SimPolicy {
    std::string name;
    PolicyKind kind = PolicyKind::kExactMpc;
    MlpParams net;  // used by the network kinds
};

struct SimConfig {
    State x0 = State(-1.0, M_PI, 0.0, 0.0);
    double duration = 5.0;  // seconds
    int repetitions = 1;
    double jitter = 0.0;  // per-component relative x0 jitter, e.g. 0.02
    unsigned long long seed = 0;
    TerminalMode terminal_mode = TerminalMode::kCostOnly;  // exact-MPC runs
    double settle_norm = 0.05;  // settled when ||x|| stays below this ...
    double settle_hold = 1.0;   // ... for this long (s)
    double divergence_norm = 1e3;
    int n_workers = 1;

    void validate() const;
};

/// Per-step record of one closed-loop run. Violations are per bound kind
/// (q1, q1_dot, q2_dot, v), the signed distance above the bound.
struct TrajectoryLog {
    std::string policy;
    std::string termination;  // "duration" or "diverged"
    double dt = 0.0;
    std::vector<double> t;
    std::vector<State> states;
    std::vector<double> u;
    std::vector<Eigen::Vector4d> violations;
    std::vector<double> solve_ms;
    std::vector<uint8_t> fallback;  // exact MPC held previous control here
    bool any_fallback = false;

    int steps() const { return static_cast<int>(t.size()); }
    /// First time the state norm stays below `norm` for `hold` seconds.
    std::optional<double> settle_time(double norm, double hold) const;
    void write_csv(const std::string& path) const;
};

/// Step the plant under the selected policy, recording state, control,
/// constraint values and per-step policy compute time. The exact-MPC policy
/// warm-starts from the shifted previous solution and holds the previous
/// control (flagged) on an infeasible solve. q2 is wrapped to (-pi, pi] at
/// the simulation boundary each step.
TrajectoryLog run_closed_loop(const DiscreteModel& model, const MpcConfig& mpc,
                              const SimPolicy& policy, const SimConfig& sim,
                              const State& x0_override);

/// As above, from sim.x0.
TrajectoryLog run_closed_loop(const DiscreteModel& model, const MpcConfig& mpc,
                              const SimPolicy& policy, const SimConfig& sim);

struct ViolationStats {
    std::vector<int> per_run_counts;  // steps with any violated row, per run
    double mean_count = 0.0;
    double std_count = 0.0;
    double max_amplitude_pct = 0.0;  // worst violation as % of its bound
    int total_steps = 0;
};

/// Violation statistics across repeated runs of one policy.
ViolationStats violation_stats(const std::vector<TrajectoryLog>& logs,
                               const MpcConfig& mpc);

struct PolicyComparison {
    std::string name;
    ViolationStats stats;
    double mean_step_ms = 0.0;
    std::optional<double> mean_settle_time_s;
    int n_settled = 0;
    int n_runs = 0;
};

struct ComparisonReport {
    std::vector<PolicyComparison> policies;
    /// exact-MPC mean step time / this policy's mean step time.
    double speedup_vs_exact(const std::string& name) const;
    std::string to_json() const;
    std::string to_table() const;
};

/// Run every policy from the same jittered initial conditions and summarize
/// violations, settling and per-step compute time.
ComparisonReport compare_policies(const DiscreteModel& model, const MpcConfig& mpc,
                                  const SimConfig& sim,
                                  const std::vector<SimPolicy>& policies,
                                  std::vector<std::vector<TrajectoryLog>>* logs_out = nullptr);

/// The jittered initial states used by compare_policies / repeated runs:
/// component-wise relative jitter, then clamped into the state box.
std::vector<State> jittered_starts(const SimConfig& sim, const MpcConfig& mpc);

}  // namespace empc

#endif  // EMPC_SIM_HPP
