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

#include "empc/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace empc {

namespace {

using nlohmann::json;

double require_number(const json& section, const std::string& section_name,
                      const std::string& key) {
    if (!section.contains(key)) {
        throw std::invalid_argument("config: missing required field " +
                                    section_name + "." + key);
    }
    if (!section[key].is_number()) {
        throw std::invalid_argument("config: " + section_name + "." + key +
                                    " must be a number");
    }
    return section[key].get<double>();
}

template <typename T>
T get_or(const json& section, const std::string& key, T fallback) {
    if (!section.contains(key) || section[key].is_null()) return fallback;
    return section[key].get<T>();
}

TerminalMode terminal_mode_from_string(const std::string& s) {
    if (s == "hard") return TerminalMode::kHard;
    if (s == "cost_only") return TerminalMode::kCostOnly;
    throw std::invalid_argument("config: unknown terminal_mode '" + s + "'");
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json root;
    try {
        root = json::parse(in, nullptr, /*allow_exceptions=*/true,
                           /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + path + ": " + e.what());
    }

    PipelineConfig cfg;
    cfg.source_path = path;

    if (!root.contains("physics")) {
        throw std::invalid_argument("config: missing required section physics");
    }
    const json& ph = root["physics"];
    FurutaParams& p = cfg.physics;
    p.m1 = require_number(ph, "physics", "m1");
    p.m2 = require_number(ph, "physics", "m2");
    p.L1 = require_number(ph, "physics", "L1");
    p.L2 = require_number(ph, "physics", "L2");
    p.l1 = require_number(ph, "physics", "l1");
    p.l2 = require_number(ph, "physics", "l2");
    p.I1 = require_number(ph, "physics", "I1");
    p.I2 = require_number(ph, "physics", "I2");
    p.c1 = require_number(ph, "physics", "c1");
    p.c2 = require_number(ph, "physics", "c2");
    p.Kg = require_number(ph, "physics", "Kg");
    p.Kt = require_number(ph, "physics", "Kt");
    p.Kv = require_number(ph, "physics", "Kv");
    p.Rm = require_number(ph, "physics", "Rm");
    p.eta_m = require_number(ph, "physics", "eta_m");
    p.eta_g = require_number(ph, "physics", "eta_g");
    p.g = require_number(ph, "physics", "g");
    p.validate();

    const json mpc = root.value("mpc", json::object());
    cfg.dt = get_or(mpc, "dt", 0.01);
    if (!(cfg.dt > 0.0)) throw std::invalid_argument("config: mpc.dt must be > 0");
    cfg.mpc.horizon = get_or(mpc, "N", 10);
    if (mpc.contains("Q")) {
        const auto q = mpc["Q"].get<std::vector<double>>();
        if (q.size() != 4) {
            throw std::invalid_argument("config: mpc.Q must have 4 diagonal entries");
        }
        cfg.mpc.Q = Eigen::Vector4d(q[0], q[1], q[2], q[3]).asDiagonal();
    }
    cfg.mpc.R = get_or(mpc, "R", 0.1);
    cfg.mpc.bounds.q1 = get_or(mpc, "q1_bound", 1.0);
    cfg.mpc.bounds.q1_dot = get_or(mpc, "q1_dot_bound", 6.0);
    cfg.mpc.bounds.q2_dot = get_or(mpc, "q2_dot_bound", 15.0);
    cfg.mpc.bounds.voltage = get_or(mpc, "voltage_bound", 6.0);
    cfg.mpc.tol_feas = get_or(mpc, "tol_feas", 1e-6);
    cfg.mpc.infeas_cut = get_or(mpc, "infeas_cut", 1e-4);
    cfg.mpc.tol_step = get_or(mpc, "tol_step", 1e-9);
    cfg.mpc.max_sqp_iter = get_or(mpc, "max_sqp_iter", 200);
    cfg.mpc.terminal_mode =
        terminal_mode_from_string(get_or<std::string>(mpc, "terminal_mode", "hard"));
    if (mpc.contains("c_f") && !mpc["c_f"].is_null()) {
        cfg.mpc.c_f = mpc["c_f"].get<double>();
        cfg.mpc.gamma_f = get_or(mpc, "gamma_f", 0.9);
        if (!mpc.contains("Qf")) {
            throw std::invalid_argument(
                "config: explicit mpc.c_f requires explicit mpc.Qf (16 entries, row-major)");
        }
        const auto qf = mpc["Qf"].get<std::vector<double>>();
        if (qf.size() != 16) {
            throw std::invalid_argument("config: mpc.Qf must have 16 entries");
        }
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) cfg.mpc.Qf(r, c) = qf[static_cast<size_t>(4 * r + c)];
        }
        cfg.terminal_given = true;
    }

    const json gen = root.value("generation", json::object());
    cfg.generation.n_samples = get_or(gen, "n_train", 20000);
    cfg.n_test_samples = get_or(gen, "n_test", 2000);
    cfg.generation.q1_range = get_or(gen, "q1_range", cfg.mpc.bounds.q1);
    cfg.generation.q2_range = get_or(gen, "q2_range", M_PI);
    cfg.generation.q1_dot_range = get_or(gen, "q1_dot_range", cfg.mpc.bounds.q1_dot);
    cfg.generation.q2_dot_range = get_or(gen, "q2_dot_range", cfg.mpc.bounds.q2_dot);
    cfg.generation.traj_max_len = get_or(gen, "traj_max_len", 50);
    cfg.generation.seed = get_or(gen, "seed", 0ULL);
    cfg.generation.acceptance_floor = get_or(gen, "acceptance_floor", 0.10);
    cfg.generation.terminal_mode = terminal_mode_from_string(
        get_or<std::string>(gen, "terminal_mode", "cost_only"));

    const json arch = root.value("architecture", json::object());
    cfg.architecture.input_dim = get_or(arch, "input_dim", 4);
    cfg.architecture.output_dim = get_or(arch, "output_dim", 1);
    cfg.architecture.hidden_layers = get_or(arch, "hidden_layers", 7);
    cfg.architecture.hidden_width = get_or(arch, "hidden_width", 30);
    cfg.architecture.activation =
        activation_from_string(get_or<std::string>(arch, "activation", "tanh"));
    cfg.architecture.validate();

    const json tr = root.value("training", json::object());
    cfg.training.warmup_epochs = get_or(tr, "warmup_epochs", 1200);
    cfg.training.constraint_epochs = get_or(tr, "constraint_epochs", 700);
    cfg.training.fine_tune_epochs = get_or(tr, "fine_tune_epochs", 100);
    cfg.training.inner_steps_initial = get_or(tr, "inner_steps_initial", 5);
    cfg.training.inner_step_increment = get_or(tr, "inner_step_increment", 1);
    cfg.training.alpha_theta = get_or(tr, "alpha_theta", 3e-3);
    cfg.training.alpha_lambda_0 = get_or(tr, "alpha_lambda_0", 0.1);
    cfg.training.decay_eta = get_or(tr, "decay_eta", 0.01);
    cfg.training.stop_threshold = get_or(tr, "stop_threshold", 1e-4);
    cfg.training.max_outer_iters = get_or(tr, "max_outer_iters", 10000);
    cfg.training.seed = get_or(tr, "seed", 0ULL);
    cfg.training.validate();

    const json val = root.value("validation", json::object());
    cfg.validation.opt_tolerance = get_or(val, "opt_tolerance", 0.3);
    cfg.validation.epsilon_h = get_or(val, "epsilon_h", 0.01);
    cfg.validation.validate();

    const json cert = root.value("certification", json::object());
    cfg.certification.n_lipschitz_samples = get_or(cert, "n_lipschitz_samples", 2000);
    cfg.certification.lipschitz_radius = get_or(cert, "lipschitz_radius", 1e-3);
    cfg.certification.n_value_samples = get_or(cert, "n_value_samples", 1500);
    cfg.certification.n_boundary_samples = get_or(cert, "n_boundary_samples", 128);
    cfg.certification.gamma_star = get_or(cert, "gamma_star", -1.0);
    cfg.certification.c_level_box_scale = get_or(cert, "c_level_box_scale", 0.5);
    cfg.certification.seed = get_or(cert, "seed", 0ULL);
    cfg.certification.validate();

    const json sim = root.value("simulation", json::object());
    if (sim.contains("x0")) {
        const auto x0 = sim["x0"].get<std::vector<double>>();
        if (x0.size() != 4) throw std::invalid_argument("config: simulation.x0 must have 4 entries");
        cfg.simulation.x0 = State(x0[0], x0[1], x0[2], x0[3]);
    }
    cfg.simulation.duration = get_or(sim, "duration", 5.0);
    cfg.simulation.repetitions = get_or(sim, "repetitions", 30);
    cfg.simulation.jitter = get_or(sim, "jitter", 0.02);
    cfg.simulation.seed = get_or(sim, "seed", 0ULL);
    cfg.simulation.terminal_mode = terminal_mode_from_string(
        get_or<std::string>(sim, "terminal_mode", "cost_only"));
    cfg.simulation.settle_norm = get_or(sim, "settle_norm", 0.05);
    cfg.simulation.settle_hold = get_or(sim, "settle_hold", 1.0);
    cfg.simulation.validate();

    cfg.raw_json = root.dump();
    return cfg;
}

DiscreteModel make_model(const PipelineConfig& config) {
    return DiscreteModel(config.physics, config.dt);
}

MpcConfig resolve_mpc(const PipelineConfig& config, const DiscreteModel& model) {
    MpcConfig mpc = config.mpc;
    if (!config.terminal_given) {
        const TerminalCalibration cal = calibrate_terminal(model, mpc);
        mpc.Qf = cal.Qf;
        mpc.c_f = cal.c_f;
        mpc.gamma_f = cal.gamma_f;
    }
    mpc.validate();
    return mpc;
}

std::string content_hash(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const std::string& path) {
    return content_hash(read_text_file(path));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
    if (!out) throw std::runtime_error("short write: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace empc
