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

#ifndef EMPC_VALIDATE_HPP
#define EMPC_VALIDATE_HPP

#include <string>

#include "empc/dataset.hpp"
#include "empc/nn.hpp"

namespace empc {

struct ValidationConfig {
    double opt_tolerance = 0.3;  // near-optimality margin, voltage units
    double epsilon_h = 0.01;     // confidence-bound slack
    void validate() const;
};

/// 1 iff |u_star - u_hat| <= eta_opt (boundary inclusive).
int indicator_optimality(double u_star, double u_hat, double eta_opt);

/// 1 iff every constraint row is <= tol.
int indicator_constraint(const Eigen::VectorXd& constraint_values, double tol);

struct HoeffdingBound {
    double lower_bound;  // empirical mean minus epsilon
    double delta_h;      // 1 - exp(-2 n epsilon^2)
};

/// Probabilistic lower bound on the true indicator probability from its
/// empirical mean: with confidence delta_h, Pr(I = 1) > I_bar - epsilon_h.
HoeffdingBound hoeffding_bound(double i_bar, long long n, double epsilon_h);

struct ValidationReport {
    int n_samples = 0;
    double eta_opt = 0.0;
    double epsilon_h = 0.0;
    // Optimality error statistics as percent of the max voltage.
    double opt_err_mean_pct = 0.0;
    double opt_err_std_pct = 0.0;
    // Violation rates in percent of samples.
    double state_violation_rate_pct = 0.0;
    double control_violation_rate_pct = 0.0;
    double total_violation_rate_pct = 0.0;
    Eigen::VectorXd per_row_violation_rate_pct;
    double i_o_bar = 0.0;
    double i_c_bar = 0.0;
    HoeffdingBound optimality_bound{0.0, 0.0};
    HoeffdingBound constraint_bound{0.0, 0.0};

    std::string to_json() const;
    std::string to_table() const;
};

/// Per-sample optimality and single-step feasibility statistics of a learned
/// policy against its labels. Throws std::invalid_argument on an empty
/// dataset.
ValidationReport validate_policy(const Dataset& dataset,
                                 const MlpArchitecture& arch,
                                 const Eigen::VectorXd& theta,
                                 const DiscreteModel& model,
                                 const MpcConfig& mpc,
                                 const ValidationConfig& vconfig);

}  // namespace empc

#endif  // EMPC_VALIDATE_HPP
