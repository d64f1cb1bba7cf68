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

#include "empc/dataset.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "empc/threading.hpp"

namespace empc {

Eigen::MatrixXd Dataset::inputs() const {
    Eigen::MatrixXd X(4, size());
    for (int i = 0; i < size(); ++i) X.col(i) = samples[static_cast<size_t>(i)].x;
    return X;
}

Eigen::VectorXd Dataset::labels() const {
    Eigen::VectorXd y(size());
    for (int i = 0; i < size(); ++i) y[i] = samples[static_cast<size_t>(i)].u_star;
    return y;
}

void GenConfig::validate(const MpcConfig& mpc) const {
    if (n_samples < 0) throw std::invalid_argument("generation.n_samples < 0");
    if (traj_max_len < 1) throw std::invalid_argument("generation.traj_max_len < 1");
    if (!(acceptance_floor >= 0.0 && acceptance_floor < 1.0)) {
        throw std::invalid_argument("generation.acceptance_floor out of [0,1)");
    }
    if (q1_range > mpc.bounds.q1 || q1_dot_range > mpc.bounds.q1_dot ||
        q2_dot_range > mpc.bounds.q2_dot) {
        throw std::invalid_argument(
            "generation sampling box exceeds the state constraint box");
    }
    if (!(q2_range > 0.0 && q2_range <= M_PI)) {
        throw std::invalid_argument("generation.q2_range must be in (0, pi]");
    }
}

namespace {

struct TrajectorySpec {
    State x0;
    int length;
};

struct TrajectoryResult {
    std::vector<Sample> samples;
    long long attempted = 0;
};

// Receding-horizon operation: a deterministic multi-start solve opens the
// trajectory (the cost landscape is multimodal away from the origin), then
// each step warm-starts from the shifted previous plan, which keeps the loop
// from flip-flopping between symmetric swing plans and lets it stabilize.
// q2 is wrapped at every step boundary exactly as the simulator does; the
// dynamics are 2*pi-periodic in q2, so the plant evolution is unchanged and
// recorded states match what a deployed policy would see.
TrajectoryResult run_trajectory(const DiscreteModel& model, const MpcConfig& mpc,
                                const TrajectorySpec& spec,
                                const Eigen::RowVector4d& K) {
    TrajectoryResult out;
    State x = spec.x0;
    std::optional<Eigen::VectorXd> warm;
    for (int k = 0; k < spec.length; ++k) {
        out.attempted += 1;
        MpcSolution sol = warm ? solve_mpc(model, mpc, x, warm)
                               : solve_mpc_multistart(model, mpc, x);
        if (warm && sol.status != SolveStatus::kOptimal) {
            sol = solve_mpc_multistart(model, mpc, x);
        }
        if (sol.status != SolveStatus::kOptimal) break;
        Sample s;
        s.x = x;
        s.u_star = sol.u_seq[0];
        s.v_star = sol.value;
        out.samples.push_back(s);
        x = euler_step(model, x, sol.u_seq[0]);
        x[kQ2] = wrap_angle(x[kQ2]);
        warm = shifted_warm_start(sol, K, mpc.bounds.voltage);
    }
    return out;
}

}  // namespace

Dataset generate_dataset(const DiscreteModel& model, const MpcConfig& mpc_in,
                         const GenConfig& gen, GenReport* report) {
    const auto t_start = std::chrono::steady_clock::now();
    gen.validate(mpc_in);

    MpcConfig mpc = mpc_in;
    mpc.terminal_mode = gen.terminal_mode;

    // Terminal LQR gain for the receding-horizon warm-start shift.
    const Linearization lin = linearize(model, State::Zero(), 0.0);
    const Eigen::RowVector4d K = lqr_gain(lin.A, lin.B, mpc.Qf, mpc.R);

    std::mt19937_64 rng(gen.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    Dataset dataset;
    GenReport rep;
    const int block = std::max(4 * std::max(gen.n_workers, 1), 16);

    while (dataset.size() < gen.n_samples) {
        // Specs come from the master stream regardless of worker count, so
        // output is a function of the seed alone.
        std::vector<TrajectorySpec> specs(static_cast<size_t>(block));
        for (TrajectorySpec& s : specs) {
            s.x0[kQ1] = gen.q1_range * unit(rng);
            s.x0[kQ2] = wrap_angle(gen.q2_range * unit(rng));
            s.x0[kQ1Dot] = gen.q1_dot_range * unit(rng);
            s.x0[kQ2Dot] = gen.q2_dot_range * unit(rng);
            s.length = 1 + static_cast<int>((unit(rng) + 1.0) * 0.5 *
                                            static_cast<double>(gen.traj_max_len));
            s.length = std::min(s.length, gen.traj_max_len);
        }
        std::vector<TrajectoryResult> results(specs.size());
        parallel_for(gen.n_workers, static_cast<int>(specs.size()), [&](int i) {
            results[static_cast<size_t>(i)] =
                run_trajectory(model, mpc, specs[static_cast<size_t>(i)], K);
        });
        for (const TrajectoryResult& r : results) {
            rep.trajectories += 1;
            rep.solves_attempted += r.attempted;
            rep.solves_accepted += static_cast<long long>(r.samples.size());
            for (const Sample& s : r.samples) {
                if (dataset.size() >= gen.n_samples) break;
                dataset.samples.push_back(s);
            }
        }
        if (rep.solves_attempted >= 200) {
            const double rate = static_cast<double>(rep.solves_accepted) /
                                static_cast<double>(rep.solves_attempted);
            if (rate < gen.acceptance_floor) {
                std::ostringstream msg;
                msg << "generate_dataset: acceptance rate " << rate
                    << " fell below floor " << gen.acceptance_floor << " after "
                    << rep.solves_attempted
                    << " solves; the sampling box likely exceeds the solvable "
                       "region for this horizon/terminal mode";
                throw std::runtime_error(msg.str());
            }
        }
    }

    rep.acceptance_rate =
        rep.solves_attempted > 0
            ? static_cast<double>(rep.solves_accepted) /
                  static_cast<double>(rep.solves_attempted)
            : 0.0;
    rep.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    if (report) *report = rep;
    return dataset;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset: " + path);
    out << "q1,q2,q1dot,q2dot,u_star,v_star\n";
    char buf[256];
    for (const Sample& s : dataset.samples) {
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.x[0], s.x[1],
                      s.x[2], s.x[3], s.u_star, s.v_star);
        out << buf;
    }
    if (!out) throw std::runtime_error("short write on dataset: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "q1,q2,q1dot,q2dot,u_star,v_star") {
        throw std::runtime_error("dataset " + path + ": bad or missing header");
    }
    Dataset dataset;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        double fields[6];
        const char* p = line.c_str();
        for (int f = 0; f < 6; ++f) {
            char* end = nullptr;
            fields[f] = std::strtod(p, &end);
            if (end == p) {
                throw std::runtime_error("dataset " + path + ": parse error at line " +
                                         std::to_string(line_no));
            }
            p = end;
            if (f < 5) {
                if (*p != ',') {
                    throw std::runtime_error("dataset " + path +
                                             ": expected 6 fields at line " +
                                             std::to_string(line_no));
                }
                ++p;
            }
        }
        if (*p != '\0' && *p != '\r') {
            throw std::runtime_error("dataset " + path +
                                     ": trailing garbage at line " +
                                     std::to_string(line_no));
        }
        Sample s;
        s.x << fields[0], fields[1], fields[2], fields[3];
        s.u_star = fields[4];
        s.v_star = fields[5];
        dataset.samples.push_back(s);
    }
    return dataset;
}

}  // namespace empc
