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

#ifndef EMPC_NN_HPP
#define EMPC_NN_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace empc {

// kIdentity exists for test fixtures with exactly representable targets;
// production policies use tanh.
enum class Activation { kTanh, kIdentity };

Activation activation_from_string(const std::string& s);
const char* to_string(Activation a);

struct MlpArchitecture {
    int input_dim = 4;
    int output_dim = 1;
    int hidden_layers = 7;  // number of hidden layers
    int hidden_width = 30;  // nodes per hidden layer
    Activation activation = Activation::kTanh;

    void validate() const;
    // [input_dim, hidden_width x hidden_layers, output_dim]
    std::vector<int> layer_sizes() const;
};

/// Total learnable parameters: sum over layers of fan_in*fan_out + fan_out.
int param_count(const MlpArchitecture& arch);

/// Flat parameter vector, layer-major, weights (column-major fan_out x fan_in)
/// then bias per layer.
struct MlpParams {
    MlpArchitecture arch;
    Eigen::VectorXd theta;
};

/// Scaled-uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// deterministic given the seed.
MlpParams init_params(const MlpArchitecture& arch, unsigned long long seed);

/// Cached per-layer activations of one batched forward pass, consumed by the
/// corresponding backward pass.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;  // input, then each hidden output
    Eigen::MatrixXd output;                    // output_dim x n
};

/// Batched network evaluation. Columns of `inputs` are samples.
Eigen::MatrixXd forward_batch(const MlpArchitecture& arch,
                              const Eigen::VectorXd& theta,
                              const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);

/// Scalar-output convenience wrapper for a single sample.
double forward(const MlpArchitecture& arch, const Eigen::VectorXd& theta,
               const Eigen::Vector4d& x);

struct GradientBundle {
    Eigen::VectorXd d_theta;
    Eigen::Vector4d d_input;
};

/// Reverse-mode derivatives of `upstream . output` summed over the batch.
/// `upstream` is output_dim x n. d_inputs (input_dim x n, optional) receives
/// per-sample input gradients.
Eigen::VectorXd backward_batch(const MlpArchitecture& arch,
                               const Eigen::VectorXd& theta,
                               const ForwardCache& cache,
                               const Eigen::MatrixXd& upstream,
                               Eigen::MatrixXd* d_inputs = nullptr);

/// Single-sample reverse mode: derivatives of upstream * output w.r.t. theta
/// and the input.
GradientBundle backward(const MlpArchitecture& arch, const Eigen::VectorXd& theta,
                        const Eigen::Vector4d& x, double upstream);

/// Model file: one-line JSON header (versioned format tag, architecture,
/// seed/provenance) followed by the raw little-endian float64 parameter
/// array.
void save_model(const MlpParams& params, const std::string& path,
                const std::string& provenance_json = "{}");
MlpParams load_model(const std::string& path,
                     std::string* provenance_json = nullptr);

}  // namespace empc

#endif  // EMPC_NN_HPP
