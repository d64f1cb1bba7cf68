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

#ifndef EMPC_DATASET_HPP
#define EMPC_DATASET_HPP

#include <string>
#include <vector>

#include "empc/dynamics.hpp"
#include "empc/mpc.hpp"

namespace empc {

/// One labeled point: a visited state, the exact-MPC first control at that
/// state, and the optimal value. Emitted only from Optimal solves.
struct Sample {
    State x;
    double u_star;
    double v_star;
};

struct Dataset {
    std::vector<Sample> samples;

    int size() const { return static_cast<int>(samples.size()); }
    /// Inputs as a 4 x n matrix (samples in columns) and label vector.
    Eigen::MatrixXd inputs() const;
    Eigen::VectorXd labels() const;
};

struct GenConfig {
    int n_samples = 20000;
    // Initial-state sampling box. Defaults to the constraint box itself with
    // q2 free over (-pi, pi]; infeasible draws are filtered by the solver.
    double q1_range = 1.0;
    double q2_range = M_PI;
    double q1_dot_range = 6.0;
    double q2_dot_range = 15.0;
    int traj_max_len = 50;
    unsigned long long seed = 0;
    double acceptance_floor = 0.10;
    TerminalMode terminal_mode = TerminalMode::kCostOnly;
    int n_workers = 1;

    void validate(const MpcConfig& mpc) const;
};

struct GenReport {
    long long solves_attempted = 0;
    long long solves_accepted = 0;
    double acceptance_rate = 0.0;
    int trajectories = 0;
    double wall_ms = 0.0;
};

/// Draw random initial states and lengths, run the exact MPC closed loop,
/// and record (x, u*, V*) at every visited state with an Optimal solve.
/// Deterministic given the seed, independent of n_workers (trajectory specs
/// are drawn up-front from one stream; workers only solve).
/// Throws std::runtime_error with diagnostics if the solver acceptance rate
/// falls below the configured floor.
Dataset generate_dataset(const DiscreteModel& model, const MpcConfig& mpc,
                         const GenConfig& gen, GenReport* report = nullptr);

/// CSV with header q1,q2,q1dot,q2dot,u_star,v_star at 17 significant digits.
void save_dataset(const Dataset& dataset, const std::string& path);
/// Throws std::runtime_error carrying the 1-based line number on malformed rows.
Dataset load_dataset(const std::string& path);

}  // namespace empc

#endif  // EMPC_DATASET_HPP
