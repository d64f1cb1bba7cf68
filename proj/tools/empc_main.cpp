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

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "empc/certify.hpp"
#include "empc/config.hpp"
#include "empc/dataset.hpp"
#include "empc/sim.hpp"
#include "empc/train.hpp"
#include "empc/validate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitCertFailed = 3;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<unsigned long long> seed;
    int threads = 1;
};

json manifest_stub(const empc::PipelineConfig& cfg, const GlobalOpts& g) {
    json m;
    m["config_path"] = cfg.source_path;
    m["config_hash"] = empc::content_hash(cfg.raw_json);
    m["threads"] = g.threads;
    return m;
}

empc::PipelineConfig load_or_exit(const GlobalOpts& g) {
    if (!fs::exists(g.config_path)) {
        std::cerr << "error: config file not found: " << g.config_path << "\n";
        std::exit(kExitUsage);
    }
    empc::PipelineConfig cfg = empc::load_config(g.config_path);
    if (g.seed) {
        cfg.generation.seed = *g.seed;
        cfg.training.seed = *g.seed;
        cfg.certification.seed = *g.seed;
        cfg.simulation.seed = *g.seed;
    }
    cfg.generation.n_workers = g.threads;
    cfg.certification.n_workers = g.threads;
    cfg.simulation.n_workers = g.threads;
    return cfg;
}

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) {
        std::cerr << "error: missing " << what << ": " << path << "\n";
        std::exit(kExitUsage);
    }
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

int cmd_gen(const GlobalOpts& g) {
    const empc::PipelineConfig cfg = load_or_exit(g);
    const empc::DiscreteModel model = empc::make_model(cfg);
    const empc::MpcConfig mpc = empc::resolve_mpc(cfg, model);

    empc::GenReport train_rep;
    empc::GenConfig gen = cfg.generation;
    const empc::Dataset train_set =
        empc::generate_dataset(model, mpc, gen, &train_rep);
    gen.n_samples = cfg.n_test_samples;
    gen.seed = cfg.generation.seed + 1;  // held-out set from a disjoint stream
    empc::GenReport test_rep;
    const empc::Dataset test_set = empc::generate_dataset(model, mpc, gen, &test_rep);

    const std::string train_path = out_path(g, "train.csv");
    const std::string test_path = out_path(g, "test.csv");
    empc::save_dataset(train_set, train_path);
    empc::save_dataset(test_set, test_path);

    json m = manifest_stub(cfg, g);
    m["seed"] = cfg.generation.seed;
    m["train"] = {{"path", train_path},
                  {"samples", train_set.size()},
                  {"acceptance_rate", train_rep.acceptance_rate},
                  {"solves", train_rep.solves_attempted},
                  {"trajectories", train_rep.trajectories},
                  {"wall_ms", train_rep.wall_ms},
                  {"hash", empc::file_hash(train_path)}};
    m["test"] = {{"path", test_path},
                 {"samples", test_set.size()},
                 {"acceptance_rate", test_rep.acceptance_rate},
                 {"solves", test_rep.solves_attempted},
                 {"trajectories", test_rep.trajectories},
                 {"wall_ms", test_rep.wall_ms},
                 {"hash", empc::file_hash(test_path)}};
    m["mpc"] = {{"c_f", mpc.c_f}, {"gamma_f", mpc.gamma_f}};
    empc::write_text_file(out_path(g, "gen_manifest.json"), m.dump(2) + "\n");
    std::cout << "wrote " << train_path << " (" << train_set.size() << " samples), "
              << test_path << " (" << test_set.size() << " samples)\n";
    return kExitOk;
}

int cmd_train(const GlobalOpts& g, const std::string& mode) {
    const empc::PipelineConfig cfg = load_or_exit(g);
    const std::string train_path = out_path(g, "train.csv");
    require_file(train_path, "training dataset (run gen first)");
    const empc::Dataset dataset = empc::load_dataset(train_path);

    const empc::DiscreteModel model = empc::make_model(cfg);
    const empc::MpcConfig mpc = empc::resolve_mpc(cfg, model);

    empc::TrainResult result;
    if (mode == "normal") {
        result = empc::train_normal(dataset, cfg.architecture, cfg.training);
    } else {
        result = empc::train_constrained(dataset, cfg.architecture, cfg.training,
                                         model, mpc);
    }

    json m = manifest_stub(cfg, g);
    m["mode"] = mode;
    m["seed"] = cfg.training.seed;
    m["epochs"] = result.report.epochs;
    m["final_loss"] = result.report.epoch_loss.empty()
                          ? 0.0
                          : result.report.epoch_loss.back();
    m["epoch_loss"] = result.report.epoch_loss;
    m["epoch_penalty"] = result.report.epoch_penalty;
    m["hyperparameters"] = {
        {"warmup_epochs", cfg.training.warmup_epochs},
        {"constraint_epochs", cfg.training.constraint_epochs},
        {"fine_tune_epochs", cfg.training.fine_tune_epochs},
        {"inner_steps_initial", cfg.training.inner_steps_initial},
        {"inner_step_increment", cfg.training.inner_step_increment},
        {"alpha_theta", cfg.training.alpha_theta},
        {"alpha_lambda_0", cfg.training.alpha_lambda_0},
        {"decay_eta", cfg.training.decay_eta},
        {"stop_threshold", cfg.training.stop_threshold},
    };
    if (mode == "constrained") {
        m["lambda"] = std::vector<double>(
            result.lagrange.lambda.data(),
            result.lagrange.lambda.data() + result.lagrange.lambda.size());
        m["lambda_history"] = json::array();
        for (const Eigen::VectorXd& l : result.lagrange.lambda_history) {
            m["lambda_history"].push_back(
                std::vector<double>(l.data(), l.data() + l.size()));
        }
        m["delta_history"] = result.lagrange.delta_history;
        m["outer_iterations"] = result.lagrange.t_outer;
        m["exit_reason"] = result.lagrange.exit_reason;
    }
    if (!result.report.warning.empty()) m["warning"] = result.report.warning;

    const std::string model_path = out_path(g, "model_" + mode + ".empc");
    empc::save_model(result.params, model_path, m.dump());
    m["model_path"] = model_path;
    m["model_hash"] = empc::file_hash(model_path);
    empc::write_text_file(out_path(g, "train_manifest_" + mode + ".json"),
                          m.dump(2) + "\n");
    std::cout << "wrote " << model_path << " (final loss "
              << m["final_loss"].get<double>() << ")\n";
    return kExitOk;
}

int cmd_validate(const GlobalOpts& g, const std::string& model_file,
                 const std::string& dataset_file) {
    const empc::PipelineConfig cfg = load_or_exit(g);
    const std::string mpath =
        model_file.empty() ? out_path(g, "model_constrained.empc") : model_file;
    const std::string dpath =
        dataset_file.empty() ? out_path(g, "test.csv") : dataset_file;
    require_file(mpath, "model file");
    require_file(dpath, "dataset");

    const empc::MlpParams params = empc::load_model(mpath);
    const empc::Dataset dataset = empc::load_dataset(dpath);
    const empc::DiscreteModel model = empc::make_model(cfg);
    const empc::MpcConfig mpc = empc::resolve_mpc(cfg, model);

    const empc::ValidationReport rep = empc::validate_policy(
        dataset, params.arch, params.theta, model, mpc, cfg.validation);
    empc::write_text_file(out_path(g, "validation.json"), rep.to_json() + "\n");
    empc::write_text_file(out_path(g, "validation.txt"), rep.to_table());
    std::cout << rep.to_table();
    return kExitOk;
}

int cmd_certify(const GlobalOpts& g, const std::string& model_file,
                const std::string& dataset_file) {
    const empc::PipelineConfig cfg = load_or_exit(g);
    const std::string mpath =
        model_file.empty() ? out_path(g, "model_constrained.empc") : model_file;
    const std::string dpath =
        dataset_file.empty() ? out_path(g, "test.csv") : dataset_file;
    require_file(mpath, "model file");
    require_file(dpath, "dataset");

    const empc::MlpParams params = empc::load_model(mpath);
    const empc::Dataset dataset = empc::load_dataset(dpath);
    const empc::DiscreteModel model = empc::make_model(cfg);
    empc::MpcConfig mpc = empc::resolve_mpc(cfg, model);
    mpc.terminal_mode = empc::TerminalMode::kHard;

    const empc::CertificateReport rep = empc::run_certification(
        model, mpc, dataset, params.arch, params.theta, cfg.certification);
    empc::write_text_file(out_path(g, "certificate.json"), rep.to_json() + "\n");
    std::cout << rep.to_json() << "\n";
    if (!rep.all_pass()) {
        std::cerr << "certificate checks failed\n";
        return kExitCertFailed;
    }
    return kExitOk;
}

empc::SimPolicy make_policy(const GlobalOpts& g, const std::string& kind_str,
                            const std::string& model_file) {
    empc::SimPolicy policy;
    policy.kind = empc::policy_kind_from_string(kind_str);
    policy.name = kind_str;
    if (policy.kind != empc::PolicyKind::kExactMpc) {
        std::string mpath = model_file;
        if (mpath.empty()) mpath = out_path(g, "model_constrained.empc");
        require_file(mpath, "model file");
        policy.net = empc::load_model(mpath);
        policy.name += ":" + fs::path(mpath).stem().string();
    }
    return policy;
}

int cmd_simulate(const GlobalOpts& g, const std::string& kind_str,
                 const std::string& model_file) {
    const empc::PipelineConfig cfg = load_or_exit(g);
    const empc::DiscreteModel model = empc::make_model(cfg);
    const empc::MpcConfig mpc = empc::resolve_mpc(cfg, model);
    const empc::SimPolicy policy = make_policy(g, kind_str, model_file);

    const empc::TrajectoryLog log =
        empc::run_closed_loop(model, mpc, policy, cfg.simulation);
    const std::string csv_path = out_path(g, "trajectory.csv");
    log.write_csv(csv_path);

    const empc::ViolationStats st = empc::violation_stats({log}, mpc);
    json m = manifest_stub(cfg, g);
    m["policy"] = log.policy;
    m["termination"] = log.termination;
    m["steps"] = log.steps();
    m["violation_steps"] = st.per_run_counts.at(0);
    m["max_violation_amplitude_pct"] = st.max_amplitude_pct;
    m["any_mpc_fallback"] = log.any_fallback;
    m["trajectory_csv"] = csv_path;
    m["trajectory_hash"] = empc::file_hash(csv_path);
    empc::write_text_file(out_path(g, "sim_summary.json"), m.dump(2) + "\n");
    std::cout << "wrote " << csv_path << " (" << log.steps() << " steps, "
              << st.per_run_counts.at(0) << " violation steps)\n";
    return kExitOk;
}

int cmd_compare(const GlobalOpts& g, const std::string& normal_file,
                const std::string& constrained_file) {
    const empc::PipelineConfig cfg = load_or_exit(g);
    const empc::DiscreteModel model = empc::make_model(cfg);
    const empc::MpcConfig mpc = empc::resolve_mpc(cfg, model);

    std::vector<empc::SimPolicy> policies;
    policies.push_back(make_policy(g, "exact_mpc", ""));
    {
        std::string path = normal_file.empty() ? out_path(g, "model_normal.empc")
                                               : normal_file;
        require_file(path, "normal model file");
        empc::SimPolicy p;
        p.kind = empc::PolicyKind::kNetwork;
        p.net = empc::load_model(path);
        p.name = "network:normal";
        policies.push_back(std::move(p));
    }
    {
        std::string path = constrained_file.empty()
                               ? out_path(g, "model_constrained.empc")
                               : constrained_file;
        require_file(path, "constrained model file");
        empc::SimPolicy p;
        p.kind = empc::PolicyKind::kNetwork;
        p.net = empc::load_model(path);
        p.name = "network:constrained";
        policies.push_back(std::move(p));
    }

    const empc::ComparisonReport rep =
        empc::compare_policies(model, mpc, cfg.simulation, policies);
    empc::write_text_file(out_path(g, "comparison.json"), rep.to_json() + "\n");
    empc::write_text_file(out_path(g, "comparison.txt"), rep.to_table());
    std::cout << rep.to_table();
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learned explicit MPC toolkit for the rotary pendulum"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_path, "pipeline configuration file")
        ->required();
    app.add_option("--out-dir", g.out_dir, "artifact output directory");
    unsigned long long seed_value = 0;
    CLI::Option* seed_opt =
        app.add_option("--seed", seed_value, "override every stage seed");
    app.add_option("--threads", g.threads, "worker thread cap");

    auto* gen = app.add_subcommand("gen", "generate train/test datasets");
    std::string mode = "normal";
    auto* train = app.add_subcommand("train", "train a policy network");
    train->add_option("--mode", mode, "normal | constrained")
        ->check(CLI::IsMember({"normal", "constrained"}));

    std::string model_file, dataset_file, normal_file, constrained_file;
    std::string policy_kind = "exact_mpc";
    auto* validate = app.add_subcommand("validate", "statistical policy validation");
    validate->add_option("--model", model_file, "model file");
    validate->add_option("--dataset", dataset_file, "dataset CSV");
    auto* certify = app.add_subcommand("certify", "robustness certificate estimates");
    certify->add_option("--model", model_file, "model file");
    certify->add_option("--dataset", dataset_file, "dataset CSV");
    auto* simulate = app.add_subcommand("simulate", "closed-loop simulation");
    simulate->add_option("--policy", policy_kind,
                         "exact_mpc | network | clamped_network");
    simulate->add_option("--model", model_file, "model file for network policies");
    auto* compare = app.add_subcommand("compare", "compare policies in closed loop");
    compare->add_option("--normal", normal_file, "normally trained model file");
    compare->add_option("--constrained", constrained_file,
                        "constraint-trained model file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;

    try {
        if (gen->parsed()) return cmd_gen(g);
        if (train->parsed()) return cmd_train(g, mode);
        if (validate->parsed()) return cmd_validate(g, model_file, dataset_file);
        if (certify->parsed()) return cmd_certify(g, model_file, dataset_file);
        if (simulate->parsed()) return cmd_simulate(g, policy_kind, model_file);
        if (compare->parsed()) return cmd_compare(g, normal_file, constrained_file);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
