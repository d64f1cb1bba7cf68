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

#include "empc/validate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "empc/train.hpp"

namespace empc {

void ValidationConfig::validate() const {
    if (!(opt_tolerance > 0.0)) {
        throw std::invalid_argument("validation.opt_tolerance must be > 0");
    }
    if (!(epsilon_h > 0.0 && epsilon_h < 1.0)) {
        throw std::invalid_argument("validation.epsilon_h must be in (0,1)");
    }
}

int indicator_optimality(double u_star, double u_hat, double eta_opt) {
    return std::abs(u_star - u_hat) <= eta_opt ? 1 : 0;
}

int indicator_constraint(const Eigen::VectorXd& constraint_values, double tol) {
    return constraint_values.maxCoeff() <= tol ? 1 : 0;
}

HoeffdingBound hoeffding_bound(double i_bar, long long n, double epsilon_h) {
    if (!(i_bar >= 0.0 && i_bar <= 1.0)) {
        throw std::invalid_argument("hoeffding_bound: i_bar must be in [0,1]");
    }
    if (n < 1) throw std::invalid_argument("hoeffding_bound: n must be >= 1");
    HoeffdingBound b;
    b.lower_bound = i_bar - epsilon_h;
    b.delta_h = 1.0 - std::exp(-2.0 * static_cast<double>(n) * epsilon_h * epsilon_h);
    return b;
}

ValidationReport validate_policy(const Dataset& dataset,
                                 const MlpArchitecture& arch,
                                 const Eigen::VectorXd& theta,
                                 const DiscreteModel& model,
                                 const MpcConfig& mpc,
                                 const ValidationConfig& vconfig) {
    if (dataset.samples.empty()) {
        throw std::invalid_argument("validate_policy: empty dataset");
    }
    vconfig.validate();
    const int n = dataset.size();
    const ConstraintSpec spec(mpc.bounds);
    const Eigen::VectorXd u_hat =
        forward_batch(arch, theta, dataset.inputs()).row(0).transpose();

    ValidationReport rep;
    rep.n_samples = n;
    rep.eta_opt = vconfig.opt_tolerance;
    rep.epsilon_h = vconfig.epsilon_h;
    rep.per_row_violation_rate_pct = Eigen::VectorXd::Zero(spec.n_rows());

    double err_sum = 0.0;
    double err_sq_sum = 0.0;
    long long opt_hits = 0;
    long long con_hits = 0;
    long long state_viol = 0;
    long long control_viol = 0;
    long long total_viol = 0;

    for (int i = 0; i < n; ++i) {
        const Sample& s = dataset.samples[static_cast<size_t>(i)];
        const double err_pct =
            (u_hat[i] - s.u_star) / mpc.bounds.voltage * 100.0;
        err_sum += err_pct;
        err_sq_sum += err_pct * err_pct;
        opt_hits += indicator_optimality(s.u_star, u_hat[i], vconfig.opt_tolerance);

        const Eigen::VectorXd c =
            single_step_constraint(model, mpc, s.x, u_hat[i]);
        con_hits += indicator_constraint(c, mpc.tol_feas);
        bool any_state = false;
        bool any_control = false;
        for (int r = 0; r < spec.n_rows(); ++r) {
            if (c[r] > mpc.tol_feas) {
                rep.per_row_violation_rate_pct[r] += 1.0;
                if (r < spec.n_state_rows()) any_state = true;
                else any_control = true;
            }
        }
        state_viol += any_state;
        control_viol += any_control;
        total_viol += (any_state || any_control);
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    rep.opt_err_mean_pct = err_sum * inv_n;
    rep.opt_err_std_pct = std::sqrt(
        std::max(0.0, err_sq_sum * inv_n - rep.opt_err_mean_pct * rep.opt_err_mean_pct));
    rep.state_violation_rate_pct = 100.0 * static_cast<double>(state_viol) * inv_n;
    rep.control_violation_rate_pct =
        100.0 * static_cast<double>(control_viol) * inv_n;
    rep.total_violation_rate_pct = 100.0 * static_cast<double>(total_viol) * inv_n;
    rep.per_row_violation_rate_pct *= 100.0 * inv_n;
    rep.i_o_bar = static_cast<double>(opt_hits) * inv_n;
    rep.i_c_bar = static_cast<double>(con_hits) * inv_n;
    rep.optimality_bound = hoeffding_bound(rep.i_o_bar, n, vconfig.epsilon_h);
    rep.constraint_bound = hoeffding_bound(rep.i_c_bar, n, vconfig.epsilon_h);
    return rep;
}

std::string ValidationReport::to_json() const {
    nlohmann::json j;
    j["n_samples"] = n_samples;
    j["eta_opt"] = eta_opt;
    j["epsilon_h"] = epsilon_h;
    j["optimality_error_mean_pct"] = opt_err_mean_pct;
    j["optimality_error_std_pct"] = opt_err_std_pct;
    j["state_violation_rate_pct"] = state_violation_rate_pct;
    j["control_violation_rate_pct"] = control_violation_rate_pct;
    j["total_violation_rate_pct"] = total_violation_rate_pct;
    j["per_row_violation_rate_pct"] = std::vector<double>(
        per_row_violation_rate_pct.data(),
        per_row_violation_rate_pct.data() + per_row_violation_rate_pct.size());
    j["i_o_bar"] = i_o_bar;
    j["i_c_bar"] = i_c_bar;
    j["optimality_bound"] = {{"lower_bound", optimality_bound.lower_bound},
                             {"delta_h", optimality_bound.delta_h}};
    j["constraint_bound"] = {{"lower_bound", constraint_bound.lower_bound},
                             {"delta_h", constraint_bound.delta_h}};
    return j.dump(2);
}

std::string ValidationReport::to_table() const {
    std::ostringstream os;
    char line[128];
    os << "Policy statistics (" << n_samples << " samples)\n";
    os << "-------------------------------------------\n";
    std::snprintf(line, sizeof(line), "%-34s %8.2f\n",
                  "Optimality error mean (%)", opt_err_mean_pct);
    os << line;
    std::snprintf(line, sizeof(line), "%-34s %8.2f\n",
                  "Optimality error STD (%)", opt_err_std_pct);
    os << line;
    std::snprintf(line, sizeof(line), "%-34s %8.2f\n",
                  "State constraint violation (%)", state_violation_rate_pct);
    os << line;
    std::snprintf(line, sizeof(line), "%-34s %8.2f\n",
                  "Control constraint violation (%)", control_violation_rate_pct);
    os << line;
    std::snprintf(line, sizeof(line), "%-34s %8.2f\n",
                  "Total constraint violation (%)", total_violation_rate_pct);
    os << line;
    std::snprintf(line, sizeof(line), "%-34s %8.4f (> %.4f w.p. %.4g)\n",
                  "I_o empirical mean", i_o_bar, optimality_bound.lower_bound,
                  optimality_bound.delta_h);
    os << line;
    std::snprintf(line, sizeof(line), "%-34s %8.4f (> %.4f w.p. %.4g)\n",
                  "I_c empirical mean", i_c_bar, constraint_bound.lower_bound,
                  constraint_bound.delta_h);
    os << line;
    return os.str();
}

}  // namespace empc
