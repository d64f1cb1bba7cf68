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

#ifndef EMPC_CONFIG_HPP
#define EMPC_CONFIG_HPP

#include <cstdint>
#include <string>

#include "empc/certify.hpp"
#include "empc/dataset.hpp"
#include "empc/dynamics.hpp"
#include "empc/mpc.hpp"
#include "empc/nn.hpp"
#include "empc/sim.hpp"
#include "empc/train.hpp"
#include "empc/validate.hpp"

namespace empc {

/// All pipeline stages configured from one JSON file (// comments allowed).
/// The physics section is strictly required, field by field; the other
/// sections start from documented defaults.
struct PipelineConfig {
    FurutaParams physics{};
    double dt = 0.01;
    MpcConfig mpc;
    bool terminal_given = false;  // c_f / gamma_f / Qf explicitly configured
    GenConfig generation;
    int n_test_samples = 2000;
    MlpArchitecture architecture;
    TrainConfig training;
    ValidationConfig validation;
    CertificateConfig certification;
    SimConfig simulation;

    std::string source_path;
    std::string raw_json;  // canonical dump of the parsed config
};

PipelineConfig load_config(const std::string& path);

DiscreteModel make_model(const PipelineConfig& config);

/// The MPC configuration with terminal ingredients resolved: when the config
/// does not pin Qf / c_f / gamma_f, they are calibrated from the linearized
/// dynamics (DARE cost, bisected safe level, sampled contraction).
MpcConfig resolve_mpc(const PipelineConfig& config, const DiscreteModel& model);

/// FNV-1a content hash, hex encoded; used to stamp manifests.
std::string content_hash(const std::string& bytes);
std::string file_hash(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace empc

#endif  // EMPC_CONFIG_HPP
