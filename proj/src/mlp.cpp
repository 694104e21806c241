#include "dklvae/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dklvae {

namespace {

using ConstWeights = Eigen::Map<const Matrix>;
using ConstBias = Eigen::Map<const Eigen::RowVectorXd>;

void apply_activation(Activation act, const Matrix& pre, Matrix& out) {
    switch (act) {
        case Activation::identity:
            out = pre;
            break;
        case Activation::tanh:
            out = pre.unaryExpr([](double v) { return std::tanh(v); });
            break;
        case Activation::softplus:
            out = pre.unaryExpr([](double v) { return softplus(v); });
            break;
        case Activation::sigmoid:
            out = pre.unaryExpr([](double v) { return sigmoid(v); });
            break;
    }
}

// pre = in * w + b, accumulated over the input index in ascending order for
// every row. Eigen's blocked products sum leftover rows in a different order,
// which would make a datum's output depend on its position in the batch.
void affine_rows(const Matrix& in, ConstWeights w, ConstBias b, Matrix& pre) {
    pre.setZero(in.rows(), w.cols());
    constexpr Eigen::Index kBlock = 256;
    for (Eigen::Index k0 = 0; k0 < in.cols(); k0 += kBlock) {
        const Eigen::Index k1 = std::min(in.cols(), k0 + kBlock);
        for (Eigen::Index i = 0; i < in.rows(); ++i) {
            auto out = pre.row(i);
            for (Eigen::Index k = k0; k < k1; ++k) {
                const double v = in(i, k);
                if (v != 0.0) {
                    out.noalias() += v * w.row(k);
                }
            }
        }
    }
    pre.rowwise() += b;
}

// dy * act'(pre), using the cached output where it is cheaper.
Matrix activation_backward(Activation act, const Matrix& pre, const Matrix& out, const Matrix& dy) {
    switch (act) {
        case Activation::identity:
            return dy;
        case Activation::tanh:
            return dy.array() * (1.0 - out.array().square());
        case Activation::softplus:
            return dy.array() * pre.unaryExpr([](double v) { return sigmoid(v); }).array();
        case Activation::sigmoid:
            return dy.array() * out.array() * (1.0 - out.array());
    }
    return dy;
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::tanh: return "tanh";
        case Activation::softplus: return "softplus";
        case Activation::sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "tanh") return Activation::tanh;
    if (name == "softplus") return Activation::softplus;
    if (name == "sigmoid") return Activation::sigmoid;
    throw Error(ErrorKind::format, "unknown activation '" + name + "'");
}

double softplus(double x) {
    // log(1 + e^x) without overflow for large |x|.
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::size_t MlpModel::layer_offset(std::size_t l) const {
    std::size_t offset = 0;
    for (std::size_t i = 0; i < l; ++i) {
        offset += layers[i].input_dim * layers[i].output_dim + layers[i].output_dim;
    }
    return offset;
}

std::size_t parameter_count(std::span<const LayerSpec> layers) {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += layer.input_dim * layer.output_dim + layer.output_dim;
    }
    return n;
}

void validate_layers(std::span<const LayerSpec> layers) {
    if (layers.empty()) {
        throw Error(ErrorKind::config, "mlp: empty layer specification");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].input_dim == 0 || layers[l].output_dim == 0) {
            throw Error(ErrorKind::config, "mlp: layer " + std::to_string(l) + " has a zero dimension");
        }
        if (l > 0 && layers[l].input_dim != layers[l - 1].output_dim) {
            std::ostringstream os;
            os << "mlp: layer " << l << " expects input " << layers[l].input_dim
               << " but layer " << l - 1 << " produces " << layers[l - 1].output_dim;
            throw Error(ErrorKind::config, os.str());
        }
    }
}

MlpModel init_mlp(std::span<const LayerSpec> layers, Rng& rng) {
    validate_layers(layers);
    MlpModel model;
    model.layers.assign(layers.begin(), layers.end());
    model.params.assign(parameter_count(layers), 0.0);
    std::size_t offset = 0;
    for (const auto& layer : layers) {
        const double bound = std::sqrt(3.0 / static_cast<double>(layer.input_dim));
        const std::size_t weights = layer.input_dim * layer.output_dim;
        for (std::size_t i = 0; i < weights; ++i) {
            model.params[offset + i] = rng.uniform(-bound, bound);
        }
        offset += weights + layer.output_dim;
    }
    return model;
}

ForwardResult forward(const MlpModel& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.input_dim()) {
        std::ostringstream os;
        os << "mlp forward: input " << shape_string(x) << " but first layer expects "
           << model.input_dim() << " columns";
        throw Error(ErrorKind::shape, os.str());
    }
    ForwardResult result;
    auto& trace = result.trace;
    const std::size_t n_layers = model.layers.size();
    trace.inputs.resize(n_layers);
    trace.pre_activations.resize(n_layers);
    trace.outputs.resize(n_layers);

    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& spec = model.layers[l];
        const Matrix& in = l == 0 ? x : trace.outputs[l - 1];
        trace.inputs[l] = in;
        ConstWeights w(model.params.data() + offset, spec.input_dim, spec.output_dim);
        ConstBias b(model.params.data() + offset + spec.input_dim * spec.output_dim, spec.output_dim);
        Matrix& pre = trace.pre_activations[l];
        affine_rows(in, w, b, pre);
        apply_activation(spec.activation, pre, trace.outputs[l]);
        offset += spec.input_dim * spec.output_dim + spec.output_dim;
    }
    result.y = trace.outputs.back();
    return result;
}

Matrix predict(const MlpModel& model, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != model.input_dim()) {
        throw Error(ErrorKind::shape, "mlp predict: input " + shape_string(x) +
                                          " does not match first layer input dim " +
                                          std::to_string(model.input_dim()));
    }
    Matrix current = x;
    Matrix pre;
    std::size_t offset = 0;
    for (const auto& spec : model.layers) {
        ConstWeights w(model.params.data() + offset, spec.input_dim, spec.output_dim);
        ConstBias b(model.params.data() + offset + spec.input_dim * spec.output_dim, spec.output_dim);
        affine_rows(current, w, b, pre);
        apply_activation(spec.activation, pre, current);
        offset += spec.input_dim * spec.output_dim + spec.output_dim;
    }
    return current;
}

BackwardResult backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& dy) {
    const std::size_t n_layers = model.layers.size();
    if (trace.outputs.size() != n_layers || trace.inputs.size() != n_layers) {
        throw Error(ErrorKind::shape, "mlp backward: trace has " + std::to_string(trace.outputs.size()) +
                                          " layers, model has " + std::to_string(n_layers));
    }
    const Matrix& y = trace.outputs.back();
    if (dy.rows() != y.rows() || dy.cols() != y.cols()) {
        throw Error(ErrorKind::shape, "mlp backward: dy " + shape_string(dy) +
                                          " does not match output " + shape_string(y));
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
        if (static_cast<std::size_t>(trace.inputs[l].cols()) != model.layers[l].input_dim ||
            static_cast<std::size_t>(trace.outputs[l].cols()) != model.layers[l].output_dim) {
            throw Error(ErrorKind::shape, "mlp backward: trace does not match layer " + std::to_string(l));
        }
    }

    BackwardResult result;
    result.dparams.assign(model.params.size(), 0.0);
    Matrix grad = dy;
    for (std::size_t l = n_layers; l-- > 0;) {
        const auto& spec = model.layers[l];
        const std::size_t offset = model.layer_offset(l);
        const std::size_t weights = spec.input_dim * spec.output_dim;
        Matrix delta = activation_backward(spec.activation, trace.pre_activations[l], trace.outputs[l], grad);

        Eigen::Map<Matrix> dw(result.dparams.data() + offset, spec.input_dim, spec.output_dim);
        dw.noalias() = trace.inputs[l].transpose() * delta;
        Eigen::Map<Eigen::RowVectorXd> db(result.dparams.data() + offset + weights, spec.output_dim);
        db = delta.colwise().sum();

        ConstWeights w(model.params.data() + offset, spec.input_dim, spec.output_dim);
        grad.resize(delta.rows(), spec.input_dim);
        grad.noalias() = delta * w.transpose();
    }
    result.dx = std::move(grad);
    return result;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != grads.size() || state.m.size() != params.size() ||
        state.v.size() != params.size()) {
        std::ostringstream os;
        os << "adam_step: length mismatch (params " << params.size() << ", grads " << grads.size()
           << ", state " << state.m.size() << ")";
        throw Error(ErrorKind::shape, os.str());
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

}  // namespace dklvae
