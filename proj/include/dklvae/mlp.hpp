#pragma once

#include <span>
#include <string>
#include <vector>

#include "dklvae/tensor.hpp"

namespace dklvae {

enum class Activation { identity, tanh, softplus, sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct LayerSpec {
    std::size_t input_dim = 0;
    std::size_t output_dim = 0;
    Activation activation = Activation::identity;

    bool operator==(const LayerSpec&) const = default;
};

/// Fully connected network with a flat parameter store.
///
/// Layer l owns a contiguous block of params: the weight matrix
/// (input_dim x output_dim, row-major) followed by its bias (output_dim).
/// A layer maps a batch x as act(x * W + b).
struct MlpModel {
    std::vector<LayerSpec> layers;
    std::vector<double> params;

    std::size_t input_dim() const { return layers.front().input_dim; }
    std::size_t output_dim() const { return layers.back().output_dim; }
    /// Offset of layer l's weight block in params.
    std::size_t layer_offset(std::size_t l) const;
};

/// Sum of in*out + out over the layers.
std::size_t parameter_count(std::span<const LayerSpec> layers);

/// Throws ErrorKind::config if the spec is empty, has a zero dimension, or
/// the layer dimensions do not chain.
void validate_layers(std::span<const LayerSpec> layers);

/// Weights ~ U(-sqrt(3/in), sqrt(3/in)) (variance 1/in), biases zero.
/// Layers are filled in order, weights row-major, from a single stream.
MlpModel init_mlp(std::span<const LayerSpec> layers, Rng& rng);

/// Cached activations of one forward pass. inputs[l] is the input of layer l
/// (inputs[0] is x); outputs[l] is the post-activation output of layer l.
struct ForwardTrace {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre_activations;
    std::vector<Matrix> outputs;
};

struct ForwardResult {
    Matrix y;
    ForwardTrace trace;
};

ForwardResult forward(const MlpModel& model, const Matrix& x);

/// Forward pass without keeping the trace.
Matrix predict(const MlpModel& model, const Matrix& x);

struct BackwardResult {
    std::vector<double> dparams;
    Matrix dx;
};

/// Reverse-mode gradients of a scalar whose gradient w.r.t. the network
/// output is dy. Parameter gradients share the layout of MlpModel::params.
BackwardResult backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& dy);

double softplus(double x);
double sigmoid(double x);

struct AdamState {
    std::size_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update of params in place; increments state.step.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr);

}  // namespace dklvae
