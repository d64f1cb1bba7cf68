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

#include "empc/nn.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace empc {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian");

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::kTanh;
    if (s == "identity") return Activation::kIdentity;
    throw std::invalid_argument("unknown activation: " + s);
}

const char* to_string(Activation a) {
    return a == Activation::kTanh ? "tanh" : "identity";
}

void MlpArchitecture::validate() const {
    if (input_dim < 1 || output_dim < 1) {
        throw std::invalid_argument("architecture: dims must be >= 1");
    }
    if (hidden_layers < 1 || hidden_width < 1) {
        throw std::invalid_argument(
            "architecture: hidden_layers and hidden_width must be >= 1");
    }
}

std::vector<int> MlpArchitecture::layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_width);
    sizes.push_back(output_dim);
    return sizes;
}

int param_count(const MlpArchitecture& arch) {
    const std::vector<int> sizes = arch.layer_sizes();
    int count = 0;
    for (size_t i = 0; i + 1 < sizes.size(); ++i) {
        count += sizes[i] * sizes[i + 1] + sizes[i + 1];
    }
    return count;
}

namespace {

struct LayerView {
    Eigen::Map<const Eigen::MatrixXd> W;
    Eigen::Map<const Eigen::VectorXd> b;
};

struct LayerViewMut {
    Eigen::Map<Eigen::MatrixXd> W;
    Eigen::Map<Eigen::VectorXd> b;
};

LayerView layer_view(const Eigen::VectorXd& theta, int offset, int fan_in,
                     int fan_out) {
    return {Eigen::Map<const Eigen::MatrixXd>(theta.data() + offset, fan_out, fan_in),
            Eigen::Map<const Eigen::VectorXd>(theta.data() + offset + fan_in * fan_out,
                                              fan_out)};
}

LayerViewMut layer_view_mut(Eigen::VectorXd& theta, int offset, int fan_in,
                            int fan_out) {
    return {Eigen::Map<Eigen::MatrixXd>(theta.data() + offset, fan_out, fan_in),
            Eigen::Map<Eigen::VectorXd>(theta.data() + offset + fan_in * fan_out,
                                        fan_out)};
}

void check_theta(const MlpArchitecture& arch, const Eigen::VectorXd& theta) {
    if (theta.size() != param_count(arch)) {
        throw std::invalid_argument("theta length does not match architecture");
    }
}

}  // namespace

MlpParams init_params(const MlpArchitecture& arch, unsigned long long seed) {
    arch.validate();
    MlpParams p;
    p.arch = arch;
    p.theta.resize(param_count(arch));
    std::mt19937_64 rng(seed);
    const std::vector<int> sizes = arch.layer_sizes();
    int offset = 0;
    for (size_t i = 0; i + 1 < sizes.size(); ++i) {
        const int fan_in = sizes[i];
        const int fan_out = sizes[i + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-scale, scale);
        for (int k = 0; k < fan_in * fan_out + fan_out; ++k) {
            p.theta[offset + k] = dist(rng);
        }
        offset += fan_in * fan_out + fan_out;
    }
    return p;
}

Eigen::MatrixXd forward_batch(const MlpArchitecture& arch,
                              const Eigen::VectorXd& theta,
                              const Eigen::MatrixXd& inputs,
                              ForwardCache* cache) {
    check_theta(arch, theta);
    if (inputs.rows() != arch.input_dim) {
        throw std::invalid_argument("forward: input dimension mismatch");
    }
    const std::vector<int> sizes = arch.layer_sizes();
    const int n_layers = static_cast<int>(sizes.size()) - 1;

    if (cache) {
        cache->activations.clear();
        cache->activations.push_back(inputs);
    }
    Eigen::MatrixXd a = inputs;
    int offset = 0;
    for (int i = 0; i < n_layers; ++i) {
        const int fan_in = sizes[static_cast<size_t>(i)];
        const int fan_out = sizes[static_cast<size_t>(i) + 1];
        const LayerView layer = layer_view(theta, offset, fan_in, fan_out);
        offset += fan_in * fan_out + fan_out;
        Eigen::MatrixXd z = layer.W * a;
        z.colwise() += layer.b;
        if (i + 1 < n_layers && arch.activation == Activation::kTanh) {
            a = z.array().tanh().matrix();
        } else {
            a = std::move(z);  // output layer is affine; identity hidden units
        }
        if (cache && i + 1 < n_layers) cache->activations.push_back(a);
    }
    if (cache) cache->output = a;
    return a;
}

double forward(const MlpArchitecture& arch, const Eigen::VectorXd& theta,
               const Eigen::Vector4d& x) {
    return forward_batch(arch, theta, x)(0, 0);
}

Eigen::VectorXd backward_batch(const MlpArchitecture& arch,
                               const Eigen::VectorXd& theta,
                               const ForwardCache& cache,
                               const Eigen::MatrixXd& upstream,
                               Eigen::MatrixXd* d_inputs) {
    check_theta(arch, theta);
    const std::vector<int> sizes = arch.layer_sizes();
    const int n_layers = static_cast<int>(sizes.size()) - 1;
    if (static_cast<int>(cache.activations.size()) != n_layers) {
        throw std::invalid_argument("backward: stale forward cache");
    }

    std::vector<int> offsets(static_cast<size_t>(n_layers));
    int offset = 0;
    for (int i = 0; i < n_layers; ++i) {
        offsets[static_cast<size_t>(i)] = offset;
        offset += sizes[static_cast<size_t>(i)] * sizes[static_cast<size_t>(i) + 1] +
                  sizes[static_cast<size_t>(i) + 1];
    }

    Eigen::VectorXd d_theta = Eigen::VectorXd::Zero(theta.size());
    Eigen::MatrixXd grad = upstream;  // gradient at layer output pre-activation
    for (int i = n_layers - 1; i >= 0; --i) {
        const int fan_in = sizes[static_cast<size_t>(i)];
        const int fan_out = sizes[static_cast<size_t>(i) + 1];
        const LayerView layer =
            layer_view(theta, offsets[static_cast<size_t>(i)], fan_in, fan_out);
        LayerViewMut d_layer =
            layer_view_mut(d_theta, offsets[static_cast<size_t>(i)], fan_in, fan_out);
        const Eigen::MatrixXd& a_prev = cache.activations[static_cast<size_t>(i)];
        d_layer.W = grad * a_prev.transpose();
        d_layer.b = grad.rowwise().sum();
        if (i == 0 && !d_inputs) break;
        Eigen::MatrixXd grad_prev = layer.W.transpose() * grad;
        if (i > 0 && arch.activation == Activation::kTanh) {
            // a_prev holds tanh(z); d tanh = 1 - tanh^2
            grad_prev.array() *= 1.0 - a_prev.array().square();
        }
        grad = std::move(grad_prev);
    }
    if (d_inputs) *d_inputs = grad;
    return d_theta;
}

GradientBundle backward(const MlpArchitecture& arch, const Eigen::VectorXd& theta,
                        const Eigen::Vector4d& x, double upstream) {
    ForwardCache cache;
    forward_batch(arch, theta, x, &cache);
    Eigen::MatrixXd up(1, 1);
    up(0, 0) = upstream;
    Eigen::MatrixXd d_in;
    GradientBundle g;
    g.d_theta = backward_batch(arch, theta, cache, up, &d_in);
    g.d_input = d_in.col(0);
    return g;
}

void save_model(const MlpParams& params, const std::string& path,
                const std::string& provenance_json) {
    nlohmann::json header;
    header["format"] = "empc-mlp-v1";
    header["input_dim"] = params.arch.input_dim;
    header["output_dim"] = params.arch.output_dim;
    header["hidden_layers"] = params.arch.hidden_layers;
    header["hidden_width"] = params.arch.hidden_width;
    header["activation"] = to_string(params.arch.activation);
    header["param_count"] = param_count(params.arch);
    header["provenance"] = nlohmann::json::parse(provenance_json);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << header.dump() << '\n';
    out.write(reinterpret_cast<const char*>(params.theta.data()),
              static_cast<std::streamsize>(sizeof(double)) * params.theta.size());
    if (!out) throw std::runtime_error("short write on model file: " + path);
}

MlpParams load_model(const std::string& path, std::string* provenance_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::string line;
    std::getline(in, line);
    nlohmann::json header = nlohmann::json::parse(line);
    if (header.at("format").get<std::string>() != "empc-mlp-v1") {
        throw std::runtime_error("unsupported model format in " + path);
    }
    MlpParams p;
    p.arch.input_dim = header.at("input_dim").get<int>();
    p.arch.output_dim = header.at("output_dim").get<int>();
    p.arch.hidden_layers = header.at("hidden_layers").get<int>();
    p.arch.hidden_width = header.at("hidden_width").get<int>();
    p.arch.activation =
        activation_from_string(header.at("activation").get<std::string>());
    const int count = header.at("param_count").get<int>();
    if (count != param_count(p.arch)) {
        throw std::runtime_error("model header param_count mismatch in " + path);
    }
    p.theta.resize(count);
    in.read(reinterpret_cast<char*>(p.theta.data()),
            static_cast<std::streamsize>(sizeof(double)) * count);
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double)) * count) {
        throw std::runtime_error("truncated model file: " + path);
    }
    if (provenance_json) {
        *provenance_json = header.at("provenance").dump();
    }
    return p;
}

}  // namespace empc
