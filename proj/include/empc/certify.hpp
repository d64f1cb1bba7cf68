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

#ifndef EMPC_CERTIFY_HPP
#define EMPC_CERTIFY_HPP

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "empc/dataset.hpp"
#include "empc/mpc.hpp"
#include "empc/nn.hpp"

namespace empc {

/// A state-feedback control law.
using Policy = std::function<double(const State&)>;

struct CertificateConfig {
    int n_lipschitz_samples = 2000;
    double lipschitz_radius = 1e-3;
    int n_value_samples = 1500;
    int n_boundary_samples = 128;
    // Must exceed the estimated contraction rate gamma_hat; <= 0 requests
    // automatic selection at (gamma_hat + 1) / 2.
    double gamma_star = -1.0;
    // Value-geometry samples are drawn from the constraint box shrunk by this
    // factor (q2 gets it relative to pi/2), mixing feasible and infeasible
    // draws.
    double c_level_box_scale = 0.5;
    unsigned long long seed = 0;
    int n_workers = 1;

    void validate() const;
};

/// Statistical lower-bound estimate of a Lipschitz constant: the max of
/// ||fn(z) - fn(z + delta)|| / ||delta|| over n sampled base points and
/// perturbations with ||delta|| <= radius.
double estimate_lipschitz(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const std::function<Eigen::VectorXd(std::mt19937_64&)>& sampler, int n,
    double radius, unsigned long long seed);

/// Max absolute deviation of the learned policy from the labels.
double estimate_policy_error(const Dataset& dataset, const MlpArchitecture& arch,
                             const Eigen::VectorXd& theta);

/// Sampled value-function geometry. c1/c2 bracket V* by quadratics; gamma is
/// the implied contraction rate 1 - c1/c2; b is the largest V* observed on
/// the terminal-set boundary; c is the largest V*-level whose sampled
/// sublevel set contains only solver-feasible states (infeasible draws are
/// placed in the ordering by their control-box-only relaxed value, a lower
/// bound on their extended cost).
struct ValueGeometry {
    double c1_hat = 0.0;
    double c2_hat = 0.0;
    double gamma_hat = 0.0;
    double b_hat = 0.0;
    double c_hat = 0.0;
    int n_feasible = 0;
    int n_infeasible = 0;
    bool b_within_c = false;  // consistency flag (terminal set inside R_c)
};

ValueGeometry estimate_value_geometry(
    const DiscreteSystem& system, const MpcConfig& config,
    const std::function<State(std::mt19937_64&)>& sampler, int n_samples,
    int n_boundary, unsigned long long seed, int n_workers = 1);

struct CertificateEstimates {
    double l_f_hat = 0.0;     // dynamics Lipschitz
    double alpha_hat = 0.0;   // horizon-cost Lipschitz
    double alpha_f_hat = 0.0; // terminal-cost-after-rollout Lipschitz
    double e_hat = 0.0;       // max policy deviation
    ValueGeometry geometry;
    double c_f = 0.0;
    double gamma_f = 0.0;
    int n_lipschitz_samples = 0;
    int n_policy_samples = 0;
};

struct LemmaCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // rhs - lhs
    bool pass = false;
};

struct CertificateReport {
    CertificateEstimates estimates;
    double gamma_star = 0.0;
    LemmaCheck feasibility;        // alpha_f l_f e <= (1 - gamma_f) c_f
    LemmaCheck invariance_c;       // alpha l_f e <= (1 - gamma) c
    LemmaCheck invariance_b;       // alpha l_f e <= (1 - gamma) b
    LemmaCheck descent;            // alpha l_f e <= (gamma_star - gamma) b
    bool stability_pass = false;   // feasibility && descent
    std::string rigor = "sampled-estimate";

    bool all_pass() const {
        return feasibility.pass && invariance_c.pass && invariance_b.pass &&
               descent.pass;
    }
    std::string to_json() const;
};

/// Evaluate the robustness-condition inequalities on the sampled estimates.
/// Throws std::invalid_argument if gamma_star <= gamma_hat.
CertificateReport check_certificates(const CertificateEstimates& est,
                                     double gamma_star);

struct DescentCheckResult {
    bool descent_ok = true;     // V*(x+) <= gamma_star V*(x) outside R_b
    bool stayed_in_rc = true;   // trajectory never left the estimated R_c
    int steps_checked = 0;
    std::vector<double> values; // V* along the trajectory
};

/// Roll the policy forward and re-solve V* at each visited state, verifying
/// the exponential-descent condition outside the estimated R_b and
/// containment in the estimated R_c.
std::vector<DescentCheckResult> empirical_descent_check(
    const DiscreteSystem& system, const Policy& policy, const MpcConfig& config,
    const std::vector<State>& starts, int steps, double gamma_star, double b_hat,
    double c_hat, double tol = 1e-6);

/// End-to-end certification of a policy against a validation dataset:
/// estimates every constant, picks gamma_star (auto mode), and evaluates the
/// checks.
CertificateReport run_certification(const DiscreteModel& model,
                                    const MpcConfig& config,
                                    const Dataset& validation_set,
                                    const MlpArchitecture& arch,
                                    const Eigen::VectorXd& theta,
                                    const CertificateConfig& cert);

/// Same, with an arbitrary policy evaluated sample-wise for e_hat (used for
/// oracle and corrupted-policy checks).
CertificateReport run_certification_policy(const DiscreteModel& model,
                                           const MpcConfig& config,
                                           const Dataset& validation_set,
                                           const Policy& policy,
                                           const CertificateConfig& cert);

}  // namespace empc

#endif  // EMPC_CERTIFY_HPP
