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

#include "empc/certify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "empc/threading.hpp"

namespace empc {

void CertificateConfig::validate() const {
    if (n_lipschitz_samples < 100 || n_value_samples < 100) {
        throw std::invalid_argument("certification sample counts must be >= 100");
    }
    if (!(lipschitz_radius > 0.0)) {
        throw std::invalid_argument("certification.lipschitz_radius must be > 0");
    }
    if (gamma_star > 0.0 && !(gamma_star < 1.0)) {
        throw std::invalid_argument("certification.gamma_star must be in (0,1)");
    }
    if (!(c_level_box_scale > 0.0 && c_level_box_scale <= 1.0)) {
        throw std::invalid_argument("certification.c_level_box_scale out of (0,1]");
    }
}

double estimate_lipschitz(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
    const std::function<Eigen::VectorXd(std::mt19937_64&)>& sampler, int n,
    double radius, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> mag(0.0, 1.0);
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd z = sampler(rng);
        Eigen::VectorXd delta(z.size());
        do {
            for (Eigen::Index j = 0; j < delta.size(); ++j) delta[j] = gauss(rng);
        } while (delta.norm() < 1e-12);
        delta *= radius * std::max(mag(rng), 1e-3) / delta.norm();
        const double dist = delta.norm();
        const double ratio = (fn(z) - fn(z + delta)).norm() / dist;
        best = std::max(best, ratio);
    }
    return best;
}

double estimate_policy_error(const Dataset& dataset, const MlpArchitecture& arch,
                             const Eigen::VectorXd& theta) {
    if (dataset.samples.empty()) {
        throw std::invalid_argument("estimate_policy_error: empty dataset");
    }
    const Eigen::VectorXd u_hat =
        forward_batch(arch, theta, dataset.inputs()).row(0).transpose();
    return (u_hat - dataset.labels()).cwiseAbs().maxCoeff();
}

ValueGeometry estimate_value_geometry(
    const DiscreteSystem& system, const MpcConfig& config,
    const std::function<State(std::mt19937_64&)>& sampler, int n_samples,
    int n_boundary, unsigned long long seed, int n_workers) {
    // Pre-draw the sample states from one stream for worker-count invariance.
    std::mt19937_64 rng(seed);
    std::vector<State> points(static_cast<size_t>(n_samples));
    for (State& x : points) x = sampler(rng);

    struct PointResult {
        bool feasible = false;
        double value = 0.0;          // V* when feasible
        double relaxed_value = 0.0;  // control-box-only cost, always defined
        double norm_sq = 0.0;
    };
    std::vector<PointResult> results(points.size());

    MpcConfig relaxed = config;
    relaxed.terminal_mode = TerminalMode::kCostOnly;
    relaxed.bounds.q1 = 1e12;
    relaxed.bounds.q1_dot = 1e12;
    relaxed.bounds.q2_dot = 1e12;

    parallel_for(n_workers, n_samples, [&](int i) {
        const State& x = points[static_cast<size_t>(i)];
        PointResult& r = results[static_cast<size_t>(i)];
        r.norm_sq = x.squaredNorm();
        const MpcSolution sol = solve_mpc_multistart(system, config, x);
        r.feasible = sol.status == SolveStatus::kOptimal;
        r.value = sol.value;
        if (!r.feasible) {
            const MpcSolution rsol = solve_mpc_multistart(system, relaxed, x);
            r.relaxed_value = rsol.value;
        }
    });

    ValueGeometry geo;
    geo.c1_hat = std::numeric_limits<double>::infinity();
    geo.c2_hat = 0.0;
    double min_infeasible_relaxed = std::numeric_limits<double>::infinity();
    double max_feasible_value = 0.0;
    for (const PointResult& r : results) {
        if (r.feasible) {
            geo.n_feasible += 1;
            if (r.norm_sq > 1e-16) {
                geo.c1_hat = std::min(geo.c1_hat, r.value / r.norm_sq);
                geo.c2_hat = std::max(geo.c2_hat, r.value / r.norm_sq);
            }
            max_feasible_value = std::max(max_feasible_value, r.value);
        } else {
            geo.n_infeasible += 1;
            min_infeasible_relaxed = std::min(min_infeasible_relaxed, r.relaxed_value);
        }
    }
    if (geo.n_feasible < 10) {
        throw std::runtime_error(
            "estimate_value_geometry: fewer than 10 feasible samples");
    }
    geo.gamma_hat = 1.0 - geo.c1_hat / geo.c2_hat;

    // Largest sampled level whose sublevel set contains only feasible states.
    geo.c_hat = std::min(max_feasible_value, min_infeasible_relaxed);

    // Largest V* over sampled terminal-set boundary points (V_f = c_f).
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<State> boundary(static_cast<size_t>(n_boundary));
    for (State& xb : boundary) {
        Eigen::Vector4d d;
        do {
            for (int j = 0; j < 4; ++j) d[j] = gauss(rng);
        } while (d.norm() < 1e-9);
        xb = std::sqrt(config.c_f / d.dot(config.Qf * d)) * d;
    }
    std::vector<double> bvals(boundary.size(), 0.0);
    std::vector<uint8_t> bok(boundary.size(), 0);
    parallel_for(n_workers, n_boundary, [&](int i) {
        const MpcSolution sol =
            solve_mpc_multistart(system, config, boundary[static_cast<size_t>(i)]);
        bok[static_cast<size_t>(i)] = sol.status == SolveStatus::kOptimal;
        bvals[static_cast<size_t>(i)] = sol.value;
    });
    geo.b_hat = 0.0;
    for (size_t i = 0; i < boundary.size(); ++i) {
        if (bok[i]) geo.b_hat = std::max(geo.b_hat, bvals[i]);
    }
    if (geo.b_hat <= 0.0) {
        throw std::runtime_error(
            "estimate_value_geometry: no feasible terminal-boundary samples");
    }
    geo.b_within_c = geo.b_hat <= geo.c_hat;
    return geo;
}

namespace {

LemmaCheck make_check(const std::string& name, double lhs, double rhs) {
    LemmaCheck c;
    c.name = name;
    c.lhs = lhs;
    c.rhs = rhs;
    c.margin = rhs - lhs;
    c.pass = c.margin >= 0.0;
    return c;
}

}  // namespace

CertificateReport check_certificates(const CertificateEstimates& est,
                                     double gamma_star) {
    if (!(gamma_star > est.geometry.gamma_hat && gamma_star < 1.0)) {
        throw std::invalid_argument(
            "check_certificates: gamma_star must lie in (gamma_hat, 1)");
    }
    CertificateReport rep;
    rep.estimates = est;
    rep.gamma_star = gamma_star;
    const double err = est.l_f_hat * est.e_hat;
    rep.feasibility = make_check("terminal_feasibility", est.alpha_f_hat * err,
                                 (1.0 - est.gamma_f) * est.c_f);
    rep.invariance_c = make_check("invariance_c", est.alpha_hat * err,
                                  (1.0 - est.geometry.gamma_hat) * est.geometry.c_hat);
    rep.invariance_b = make_check("invariance_b", est.alpha_hat * err,
                                  (1.0 - est.geometry.gamma_hat) * est.geometry.b_hat);
    rep.descent = make_check("exponential_descent", est.alpha_hat * err,
                             (gamma_star - est.geometry.gamma_hat) * est.geometry.b_hat);
    rep.stability_pass = rep.feasibility.pass && rep.descent.pass;
    return rep;
}

std::vector<DescentCheckResult> empirical_descent_check(
    const DiscreteSystem& system, const Policy& policy, const MpcConfig& config,
    const std::vector<State>& starts, int steps, double gamma_star, double b_hat,
    double c_hat, double tol) {
    std::vector<DescentCheckResult> out(starts.size());
    for (size_t i = 0; i < starts.size(); ++i) {
        DescentCheckResult& res = out[i];
        State x = starts[i];
        MpcSolution sol = solve_mpc_multistart(system, config, x);
        if (sol.status != SolveStatus::kOptimal) {
            res.stayed_in_rc = false;
            continue;
        }
        res.values.push_back(sol.value);
        for (int k = 0; k < steps; ++k) {
            const double u = policy(x);
            const State x_next = system.step(x, u);
            const MpcSolution next_sol = solve_mpc_multistart(system, config, x_next);
            if (next_sol.status != SolveStatus::kOptimal) {
                res.stayed_in_rc = false;
                break;
            }
            res.values.push_back(next_sol.value);
            if (next_sol.value > c_hat + tol) res.stayed_in_rc = false;
            if (sol.value > b_hat) {
                // Outside R_b the value must contract at rate gamma_star.
                if (next_sol.value > gamma_star * sol.value + tol) {
                    res.descent_ok = false;
                }
            }
            res.steps_checked += 1;
            x = x_next;
            sol = next_sol;
        }
    }
    return out;
}

namespace {

CertificateReport certify_impl(const DiscreteModel& model, const MpcConfig& config,
                               const Dataset& validation_set, double e_hat,
                               int n_policy_samples, const CertificateConfig& cert) {
    cert.validate();
    const int N = config.horizon;
    const BoxBounds& b = config.bounds;

    CertificateEstimates est;
    est.e_hat = e_hat;
    est.c_f = config.c_f;
    est.gamma_f = config.gamma_f;
    est.n_lipschitz_samples = cert.n_lipschitz_samples;
    est.n_policy_samples = n_policy_samples;

    const double s = cert.c_level_box_scale;
    auto sample_state = [&](std::mt19937_64& rng, double scale) -> State {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        State x;
        x[kQ1] = scale * b.q1 * u(rng);
        x[kQ2] = scale * 0.5 * M_PI * u(rng);
        x[kQ1Dot] = scale * b.q1_dot * u(rng);
        x[kQ2Dot] = scale * b.q2_dot * u(rng);
        return x;
    };

    // Dynamics Lipschitz over (x, u) in the constraint box.
    est.l_f_hat = estimate_lipschitz(
        [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            return model.step(z.head<4>(), z[4]);
        },
        [&](std::mt19937_64& rng) -> Eigen::VectorXd {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            Eigen::VectorXd z(5);
            z.head<4>() = sample_state(rng, 1.0);
            z[4] = b.voltage * u(rng);
            return z;
        },
        cert.n_lipschitz_samples, cert.lipschitz_radius, cert.seed + 1);

    // Open-loop horizon cost and terminal-cost-after-rollout over (x, U).
    auto sample_xu = [&](std::mt19937_64& rng) -> Eigen::VectorXd {
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Eigen::VectorXd z(4 + N);
        z.head<4>() = sample_state(rng, s);
        for (int k = 0; k < N; ++k) z[4 + k] = b.voltage * u(rng);
        return z;
    };
    est.alpha_hat = estimate_lipschitz(
        [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            const std::vector<State> xs = rollout(model, z.head<4>(), z.tail(N));
            double cost = 0.0;
            for (int k = 0; k < N; ++k) {
                cost += config.stage_cost(xs[static_cast<size_t>(k)], z[4 + k]);
            }
            cost += config.terminal_cost(xs.back());
            return Eigen::VectorXd::Constant(1, cost);
        },
        sample_xu, cert.n_lipschitz_samples, cert.lipschitz_radius, cert.seed + 2);
    est.alpha_f_hat = estimate_lipschitz(
        [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
            const std::vector<State> xs = rollout(model, z.head<4>(), z.tail(N));
            return Eigen::VectorXd::Constant(1, config.terminal_cost(xs.back()));
        },
        sample_xu, cert.n_lipschitz_samples, cert.lipschitz_radius, cert.seed + 3);

    est.geometry = estimate_value_geometry(
        model, config,
        [&](std::mt19937_64& rng) -> State { return sample_state(rng, s); },
        cert.n_value_samples, cert.n_boundary_samples, cert.seed + 4,
        cert.n_workers);

    double gamma_star = cert.gamma_star;
    if (gamma_star <= 0.0) {
        gamma_star = 0.5 * (est.geometry.gamma_hat + 1.0);
    }
    (void)validation_set;
    return check_certificates(est, gamma_star);
}

}  // namespace

CertificateReport run_certification(const DiscreteModel& model,
                                    const MpcConfig& config,
                                    const Dataset& validation_set,
                                    const MlpArchitecture& arch,
                                    const Eigen::VectorXd& theta,
                                    const CertificateConfig& cert) {
    const double e_hat = estimate_policy_error(validation_set, arch, theta);
    return certify_impl(model, config, validation_set, e_hat,
                        validation_set.size(), cert);
}

CertificateReport run_certification_policy(const DiscreteModel& model,
                                           const MpcConfig& config,
                                           const Dataset& validation_set,
                                           const Policy& policy,
                                           const CertificateConfig& cert) {
    if (validation_set.samples.empty()) {
        throw std::invalid_argument("run_certification_policy: empty dataset");
    }
    double e_hat = 0.0;
    for (const Sample& s : validation_set.samples) {
        e_hat = std::max(e_hat, std::abs(policy(s.x) - s.u_star));
    }
    return certify_impl(model, config, validation_set, e_hat,
                        validation_set.size(), cert);
}

std::string CertificateReport::to_json() const {
    nlohmann::json j;
    j["rigor"] = rigor;
    j["gamma_star"] = gamma_star;
    j["estimates"] = {
        {"l_f_hat", estimates.l_f_hat},
        {"alpha_hat", estimates.alpha_hat},
        {"alpha_f_hat", estimates.alpha_f_hat},
        {"e_hat", estimates.e_hat},
        {"c1_hat", estimates.geometry.c1_hat},
        {"c2_hat", estimates.geometry.c2_hat},
        {"gamma_hat", estimates.geometry.gamma_hat},
        {"b_hat", estimates.geometry.b_hat},
        {"c_hat", estimates.geometry.c_hat},
        {"b_within_c", estimates.geometry.b_within_c},
        {"c_f", estimates.c_f},
        {"gamma_f", estimates.gamma_f},
        {"n_lipschitz_samples", estimates.n_lipschitz_samples},
        {"n_value_feasible", estimates.geometry.n_feasible},
        {"n_value_infeasible", estimates.geometry.n_infeasible},
        {"n_policy_samples", estimates.n_policy_samples},
    };
    auto check_json = [](const LemmaCheck& c) {
        return nlohmann::json{{"name", c.name},
                              {"lhs", c.lhs},
                              {"rhs", c.rhs},
                              {"margin", c.margin},
                              {"pass", c.pass}};
    };
    j["checks"] = {check_json(feasibility), check_json(invariance_c),
                   check_json(invariance_b), check_json(descent)};
    j["stability_pass"] = stability_pass;
    j["all_pass"] = all_pass();
    return j.dump(2);
}

}  // namespace empc
