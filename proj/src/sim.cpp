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

#include "empc/sim.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "empc/threading.hpp"

namespace empc {

PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "exact_mpc") return PolicyKind::kExactMpc;
    if (s == "network") return PolicyKind::kNetwork;
    if (s == "clamped_network") return PolicyKind::kClampedNetwork;
    throw std::invalid_argument("unknown policy kind: " + s);
}

const char* to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::kExactMpc: return "exact_mpc";
        case PolicyKind::kNetwork: return "network";
        case PolicyKind::kClampedNetwork: return "clamped_network";
    }
    return "unknown";
}

void SimConfig::validate() const {
    if (!(duration > 0.0)) throw std::invalid_argument("simulation.duration must be > 0");
    if (repetitions < 1) throw std::invalid_argument("simulation.repetitions must be >= 1");
    if (jitter < 0.0) throw std::invalid_argument("simulation.jitter must be >= 0");
    if (!(settle_hold > 0.0) || !(settle_norm > 0.0)) {
        throw std::invalid_argument("simulation settle parameters must be > 0");
    }
}

std::optional<double> TrajectoryLog::settle_time(double norm, double hold) const {
    const int hold_steps = static_cast<int>(std::ceil(hold / dt));
    int run_start = -1;
    int run_len = 0;
    for (int k = 0; k < steps(); ++k) {
        if (states[static_cast<size_t>(k)].norm() < norm) {
            if (run_len == 0) run_start = k;
            ++run_len;
            if (run_len >= hold_steps) return t[static_cast<size_t>(run_start)];
        } else {
            run_len = 0;
        }
    }
    return std::nullopt;
}

void TrajectoryLog::write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory: " + path);
    out << "t,q1,q2,q1dot,q2dot,u,viol_q1,viol_q1dot,viol_q2dot,viol_u,solve_ms\n";
    char buf[512];
    for (int k = 0; k < steps(); ++k) {
        const State& x = states[static_cast<size_t>(k)];
        const Eigen::Vector4d& v = violations[static_cast<size_t>(k)];
        std::snprintf(buf, sizeof(buf),
                      "%.6f,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f\n",
                      t[static_cast<size_t>(k)], x[0], x[1], x[2], x[3],
                      u[static_cast<size_t>(k)], v[0], v[1], v[2], v[3],
                      solve_ms[static_cast<size_t>(k)]);
        out << buf;
    }
    if (!out) throw std::runtime_error("short write on trajectory: " + path);
}

namespace {

Eigen::Vector4d step_violations(const BoxBounds& b, const State& x, double u) {
    return Eigen::Vector4d(std::abs(x[kQ1]) - b.q1,
                           std::abs(x[kQ1Dot]) - b.q1_dot,
                           std::abs(x[kQ2Dot]) - b.q2_dot,
                           std::abs(u) - b.voltage);
}

}  // namespace

TrajectoryLog run_closed_loop(const DiscreteModel& model, const MpcConfig& mpc_in,
                              const SimPolicy& policy, const SimConfig& sim,
                              const State& x0_override) {
    sim.validate();
    MpcConfig mpc = mpc_in;
    mpc.terminal_mode = sim.terminal_mode;

    const int n_steps = static_cast<int>(std::llround(sim.duration / model.dt));
    TrajectoryLog log;
    log.policy = policy.name.empty() ? to_string(policy.kind) : policy.name;
    log.dt = model.dt;
    log.termination = "duration";
    log.t.reserve(static_cast<size_t>(n_steps));

    const Linearization lin = linearize(model, State::Zero(), 0.0);
    const Eigen::RowVector4d K = lqr_gain(lin.A, lin.B, mpc.Qf, mpc.R);

    State x = x0_override;
    x[kQ2] = wrap_angle(x[kQ2]);
    std::optional<Eigen::VectorXd> warm;
    double previous_u = 0.0;

    for (int k = 0; k < n_steps; ++k) {
        double u = 0.0;
        bool fallback = false;
        const auto t0 = std::chrono::steady_clock::now();
        switch (policy.kind) {
            case PolicyKind::kExactMpc: {
                MpcSolution sol = solve_mpc(model, mpc, x, warm);
                if (sol.status == SolveStatus::kInfeasible) {
                    sol = solve_mpc_multistart(model, mpc, x);
                }
                if (sol.status == SolveStatus::kInfeasible) {
                    u = previous_u;  // hold and keep running, flagged below
                    fallback = true;
                    warm.reset();
                } else {
                    u = sol.u_seq[0];
                    warm = shifted_warm_start(sol, K, mpc.bounds.voltage);
                }
                break;
            }
            case PolicyKind::kNetwork:
                u = forward(policy.net.arch, policy.net.theta, x);
                break;
            case PolicyKind::kClampedNetwork:
                u = std::clamp(forward(policy.net.arch, policy.net.theta, x),
                               -mpc.bounds.voltage, mpc.bounds.voltage);
                break;
        }
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();

        log.t.push_back(static_cast<double>(k) * model.dt);
        log.states.push_back(x);
        log.u.push_back(u);
        log.violations.push_back(step_violations(mpc.bounds, x, u));
        log.solve_ms.push_back(ms);
        log.fallback.push_back(fallback ? 1 : 0);
        log.any_fallback = log.any_fallback || fallback;
        previous_u = u;

        x = euler_step(model, x, u);
        x[kQ2] = wrap_angle(x[kQ2]);
        if (x.norm() > sim.divergence_norm) {
            log.termination = "diverged";
            break;
        }
    }
    return log;
}

TrajectoryLog run_closed_loop(const DiscreteModel& model, const MpcConfig& mpc,
                              const SimPolicy& policy, const SimConfig& sim) {
    return run_closed_loop(model, mpc, policy, sim, sim.x0);
}

std::vector<State> jittered_starts(const SimConfig& sim, const MpcConfig& mpc) {
    std::vector<State> starts(static_cast<size_t>(sim.repetitions));
    std::mt19937_64 rng(sim.seed);
    std::uniform_real_distribution<double> u(-sim.jitter, sim.jitter);
    for (State& x : starts) {
        x = sim.x0;
        if (sim.jitter > 0.0) {
            for (int j = 0; j < 4; ++j) x[j] *= 1.0 + u(rng);
        }
        x[kQ1] = std::clamp(x[kQ1], -mpc.bounds.q1, mpc.bounds.q1);
        x[kQ1Dot] = std::clamp(x[kQ1Dot], -mpc.bounds.q1_dot, mpc.bounds.q1_dot);
        x[kQ2Dot] = std::clamp(x[kQ2Dot], -mpc.bounds.q2_dot, mpc.bounds.q2_dot);
    }
    return starts;
}

ViolationStats violation_stats(const std::vector<TrajectoryLog>& logs,
                               const MpcConfig& mpc) {
    ViolationStats st;
    const Eigen::Vector4d bounds(mpc.bounds.q1, mpc.bounds.q1_dot,
                                 mpc.bounds.q2_dot, mpc.bounds.voltage);
    for (const TrajectoryLog& log : logs) {
        int count = 0;
        for (const Eigen::Vector4d& v : log.violations) {
            if (v.maxCoeff() > 0.0) ++count;
            for (int r = 0; r < 4; ++r) {
                if (v[r] > 0.0) {
                    st.max_amplitude_pct =
                        std::max(st.max_amplitude_pct, 100.0 * v[r] / bounds[r]);
                }
            }
        }
        st.per_run_counts.push_back(count);
        st.total_steps += log.steps();
    }
    if (!st.per_run_counts.empty()) {
        double sum = 0.0;
        for (int c : st.per_run_counts) sum += c;
        st.mean_count = sum / static_cast<double>(st.per_run_counts.size());
        double var = 0.0;
        for (int c : st.per_run_counts) {
            var += (c - st.mean_count) * (c - st.mean_count);
        }
        st.std_count =
            std::sqrt(var / static_cast<double>(st.per_run_counts.size()));
    }
    return st;
}

ComparisonReport compare_policies(const DiscreteModel& model, const MpcConfig& mpc,
                                  const SimConfig& sim,
                                  const std::vector<SimPolicy>& policies,
                                  std::vector<std::vector<TrajectoryLog>>* logs_out) {
    const std::vector<State> starts = jittered_starts(sim, mpc);
    ComparisonReport report;
    if (logs_out) logs_out->clear();
    for (const SimPolicy& policy : policies) {
        std::vector<TrajectoryLog> logs(starts.size());
        parallel_for(sim.n_workers, static_cast<int>(starts.size()), [&](int i) {
            logs[static_cast<size_t>(i)] =
                run_closed_loop(model, mpc, policy, sim, starts[static_cast<size_t>(i)]);
        });

        PolicyComparison pc;
        pc.name = policy.name.empty() ? to_string(policy.kind) : policy.name;
        pc.n_runs = static_cast<int>(logs.size());
        pc.stats = violation_stats(logs, mpc);
        double ms_sum = 0.0;
        long long ms_n = 0;
        double settle_sum = 0.0;
        for (const TrajectoryLog& log : logs) {
            for (double ms : log.solve_ms) {
                ms_sum += ms;
                ++ms_n;
            }
            if (const auto ts = log.settle_time(sim.settle_norm, sim.settle_hold)) {
                settle_sum += *ts;
                pc.n_settled += 1;
            }
        }
        pc.mean_step_ms = ms_n > 0 ? ms_sum / static_cast<double>(ms_n) : 0.0;
        if (pc.n_settled > 0) {
            pc.mean_settle_time_s = settle_sum / pc.n_settled;
        }
        report.policies.push_back(std::move(pc));
        if (logs_out) logs_out->push_back(std::move(logs));
    }
    return report;
}

double ComparisonReport::speedup_vs_exact(const std::string& name) const {
    const PolicyComparison* exact = nullptr;
    const PolicyComparison* target = nullptr;
    for (const PolicyComparison& pc : policies) {
        if (pc.name == name) target = &pc;
        if (pc.name == to_string(PolicyKind::kExactMpc) ||
            pc.name.find("exact") != std::string::npos) {
            if (!exact) exact = &pc;
        }
    }
    if (!exact || !target || target->mean_step_ms <= 0.0) return 0.0;
    return exact->mean_step_ms / target->mean_step_ms;
}

std::string ComparisonReport::to_json() const {
    nlohmann::json j;
    j["policies"] = nlohmann::json::array();
    for (const PolicyComparison& pc : policies) {
        nlohmann::json p;
        p["name"] = pc.name;
        p["n_runs"] = pc.n_runs;
        p["violation_mean_count"] = pc.stats.mean_count;
        p["violation_std_count"] = pc.stats.std_count;
        p["violation_max_amplitude_pct"] = pc.stats.max_amplitude_pct;
        p["per_run_counts"] = pc.stats.per_run_counts;
        p["mean_step_ms"] = pc.mean_step_ms;
        p["speedup_vs_exact"] = speedup_vs_exact(pc.name);
        if (pc.mean_settle_time_s) {
            p["mean_settle_time_s"] = *pc.mean_settle_time_s;
        } else {
            p["mean_settle_time_s"] = nullptr;
        }
        p["n_settled"] = pc.n_settled;
        j["policies"].push_back(p);
    }
    return j.dump(2);
}

std::string ComparisonReport::to_table() const {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-24s %10s %10s %12s %12s %10s\n", "policy",
                  "viol mean", "viol std", "max amp (%)", "step (ms)", "speedup");
    os << line;
    os << std::string(82, '-') << "\n";
    for (const PolicyComparison& pc : policies) {
        std::snprintf(line, sizeof(line), "%-24s %10.2f %10.2f %12.2f %12.4f %10.1f\n",
                      pc.name.c_str(), pc.stats.mean_count, pc.stats.std_count,
                      pc.stats.max_amplitude_pct, pc.mean_step_ms,
                      speedup_vs_exact(pc.name));
        os << line;
    }
    return os.str();
}

}  // namespace empc
