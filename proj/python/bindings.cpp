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

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "empc/certify.hpp"
#include "empc/config.hpp"
#include "empc/dataset.hpp"
#include "empc/sim.hpp"
#include "empc/train.hpp"
#include "empc/validate.hpp"

namespace py = pybind11;
using namespace empc;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Learned explicit MPC toolkit for the rotary pendulum";

    py::class_<FurutaParams>(m, "FurutaParams")
        .def(py::init<>())
        .def_readwrite("m1", &FurutaParams::m1)
        .def_readwrite("m2", &FurutaParams::m2)
        .def_readwrite("L1", &FurutaParams::L1)
        .def_readwrite("L2", &FurutaParams::L2)
        .def_readwrite("l1", &FurutaParams::l1)
        .def_readwrite("l2", &FurutaParams::l2)
        .def_readwrite("I1", &FurutaParams::I1)
        .def_readwrite("I2", &FurutaParams::I2)
        .def_readwrite("c1", &FurutaParams::c1)
        .def_readwrite("c2", &FurutaParams::c2)
        .def_readwrite("Kg", &FurutaParams::Kg)
        .def_readwrite("Kt", &FurutaParams::Kt)
        .def_readwrite("Kv", &FurutaParams::Kv)
        .def_readwrite("Rm", &FurutaParams::Rm)
        .def_readwrite("eta_m", &FurutaParams::eta_m)
        .def_readwrite("eta_g", &FurutaParams::eta_g)
        .def_readwrite("g", &FurutaParams::g)
        .def("validate", &FurutaParams::validate);

    py::class_<DiscreteModel>(m, "DiscreteModel")
        .def(py::init<const FurutaParams&, double>(), py::arg("params"),
             py::arg("dt"))
        .def_readwrite("params", &DiscreteModel::params)
        .def_readwrite("dt", &DiscreteModel::dt)
        .def("step", &DiscreteModel::step, py::arg("x"), py::arg("u"));

    m.def("furuta_rhs", &furuta_rhs, py::arg("params"), py::arg("x"),
          py::arg("voltage"));
    m.def("euler_step", &euler_step, py::arg("model"), py::arg("x"),
          py::arg("voltage"));
    m.def("mass_matrix", &mass_matrix, py::arg("params"), py::arg("q2"));
    m.def(
        "linearize",
        [](const DiscreteModel& model, const State& x, double u, double h) {
            const Linearization lin = linearize(model, x, u, h);
            return py::make_tuple(lin.A, lin.B);
        },
        py::arg("model"), py::arg("x"), py::arg("u"), py::arg("h") = 1e-6);
    m.def("wrap_angle", &wrap_angle, py::arg("angle"));

    py::enum_<TerminalMode>(m, "TerminalMode")
        .value("HARD", TerminalMode::kHard)
        .value("COST_ONLY", TerminalMode::kCostOnly);

    py::class_<BoxBounds>(m, "BoxBounds")
        .def(py::init<>())
        .def_readwrite("q1", &BoxBounds::q1)
        .def_readwrite("q1_dot", &BoxBounds::q1_dot)
        .def_readwrite("q2_dot", &BoxBounds::q2_dot)
        .def_readwrite("voltage", &BoxBounds::voltage);

    py::class_<MpcConfig>(m, "MpcConfig")
        .def(py::init<>())
        .def_readwrite("horizon", &MpcConfig::horizon)
        .def_readwrite("Q", &MpcConfig::Q)
        .def_readwrite("R", &MpcConfig::R)
        .def_readwrite("Qf", &MpcConfig::Qf)
        .def_readwrite("bounds", &MpcConfig::bounds)
        .def_readwrite("c_f", &MpcConfig::c_f)
        .def_readwrite("gamma_f", &MpcConfig::gamma_f)
        .def_readwrite("terminal_mode", &MpcConfig::terminal_mode)
        .def_readwrite("tol_feas", &MpcConfig::tol_feas)
        .def_readwrite("max_sqp_iter", &MpcConfig::max_sqp_iter);

    py::enum_<SolveStatus>(m, "SolveStatus")
        .value("OPTIMAL", SolveStatus::kOptimal)
        .value("MAX_ITER", SolveStatus::kMaxIter)
        .value("INFEASIBLE", SolveStatus::kInfeasible);

    py::class_<MpcSolution>(m, "MpcSolution")
        .def_readonly("u_seq", &MpcSolution::u_seq)
        .def_readonly("value", &MpcSolution::value)
        .def_readonly("states", &MpcSolution::states)
        .def_readonly("status", &MpcSolution::status)
        .def_readonly("iterations", &MpcSolution::iterations)
        .def_readonly("solve_time_ms", &MpcSolution::solve_time_ms)
        .def("to_json", &MpcSolution::to_json);

    m.def("solve_dare", &solve_dare, py::arg("A"), py::arg("B"), py::arg("Q"),
          py::arg("R"), py::arg("tol") = 1e-9, py::arg("max_iter") = 100000);
    m.def(
        "solve_mpc",
        [](const DiscreteModel& model, const MpcConfig& config, const State& x) {
            return solve_mpc(model, config, x);
        },
        py::arg("model"), py::arg("config"), py::arg("x"));
    m.def(
        "mpc_policy",
        [](const DiscreteModel& model, const MpcConfig& config, const State& x) {
            const PolicyResult res = mpc_policy(model, config, x);
            return py::make_tuple(res.u, res.solution);
        },
        py::arg("model"), py::arg("config"), py::arg("x"));
    m.def(
        "calibrate_terminal",
        [](const DiscreteModel& model, const MpcConfig& config, int n, unsigned seed) {
            const TerminalCalibration cal = calibrate_terminal(model, config, n, seed);
            py::dict d;
            d["Qf"] = cal.Qf;
            d["K"] = cal.K;
            d["c_f"] = cal.c_f;
            d["gamma_f"] = cal.gamma_f;
            return d;
        },
        py::arg("model"), py::arg("config"), py::arg("n_directions") = 256,
        py::arg("seed") = 0);

    py::enum_<Activation>(m, "Activation")
        .value("TANH", Activation::kTanh)
        .value("IDENTITY", Activation::kIdentity);

    py::class_<MlpArchitecture>(m, "MlpArchitecture")
        .def(py::init<>())
        .def_readwrite("input_dim", &MlpArchitecture::input_dim)
        .def_readwrite("output_dim", &MlpArchitecture::output_dim)
        .def_readwrite("hidden_layers", &MlpArchitecture::hidden_layers)
        .def_readwrite("hidden_width", &MlpArchitecture::hidden_width)
        .def_readwrite("activation", &MlpArchitecture::activation);

    py::class_<MlpParams>(m, "MlpParams")
        .def_readwrite("arch", &MlpParams::arch)
        .def_readwrite("theta", &MlpParams::theta);

    m.def("param_count", &param_count, py::arg("arch"));
    m.def("init_params", &init_params, py::arg("arch"), py::arg("seed"));
    m.def("forward", &forward, py::arg("arch"), py::arg("theta"), py::arg("x"));
    m.def(
        "forward_batch",
        [](const MlpArchitecture& arch, const Eigen::VectorXd& theta,
           const Eigen::MatrixXd& inputs) {
            return forward_batch(arch, theta, inputs);
        },
        py::arg("arch"), py::arg("theta"), py::arg("inputs"));
    m.def(
        "backward",
        [](const MlpArchitecture& arch, const Eigen::VectorXd& theta,
           const Eigen::Vector4d& x, double upstream) {
            const GradientBundle g = backward(arch, theta, x, upstream);
            return py::make_tuple(g.d_theta, g.d_input);
        },
        py::arg("arch"), py::arg("theta"), py::arg("x"), py::arg("upstream"));
    m.def("save_model", &save_model, py::arg("params"), py::arg("path"),
          py::arg("provenance_json") = "{}");
    m.def(
        "load_model",
        [](const std::string& path) { return load_model(path); },
        py::arg("path"));

    py::class_<Sample>(m, "Sample")
        .def(py::init<>())
        .def_readwrite("x", &Sample::x)
        .def_readwrite("u_star", &Sample::u_star)
        .def_readwrite("v_star", &Sample::v_star);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<>())
        .def_readwrite("samples", &Dataset::samples)
        .def("size", &Dataset::size)
        .def("inputs", &Dataset::inputs)
        .def("labels", &Dataset::labels);

    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));

    m.def("single_step_constraint", &single_step_constraint, py::arg("model"),
          py::arg("mpc"), py::arg("x"), py::arg("u_hat"));
    m.def("aggregate_constraints", &aggregate_constraints, py::arg("batch"),
          py::arg("model"), py::arg("mpc"), py::arg("arch"), py::arg("theta"));

    m.def("indicator_optimality", &indicator_optimality, py::arg("u_star"),
          py::arg("u_hat"), py::arg("eta_opt"));
    m.def("indicator_constraint", &indicator_constraint,
          py::arg("constraint_values"), py::arg("tol"));
    m.def(
        "hoeffding_bound",
        [](double i_bar, long long n, double epsilon_h) {
            const HoeffdingBound b = hoeffding_bound(i_bar, n, epsilon_h);
            return py::make_tuple(b.lower_bound, b.delta_h);
        },
        py::arg("i_bar"), py::arg("n"), py::arg("epsilon_h"));

    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def_readonly("physics", &PipelineConfig::physics)
        .def_readonly("dt", &PipelineConfig::dt)
        .def_readonly("mpc", &PipelineConfig::mpc)
        .def_readonly("architecture", &PipelineConfig::architecture);

    m.def("load_config", &load_config, py::arg("path"));
    m.def("make_model", &make_model, py::arg("config"));
    m.def("resolve_mpc", &resolve_mpc, py::arg("config"), py::arg("model"));
}
