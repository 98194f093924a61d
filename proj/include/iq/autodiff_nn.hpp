#pragma once

#include <cstdint>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "iq/common.hpp"

namespace iq {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Dense rectifier network shape: affine layers with ReLU between them and
/// a linear output layer.
struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden = {512, 512};
    int output_dim = 1;

    int n_layers() const { return static_cast<int>(hidden.size()) + 1; }

    // fan_in/fan_out of layer l
    int in_of(int l) const { return l == 0 ? input_dim : hidden[l - 1]; }
    int out_of(int l) const {
        return l == static_cast<int>(hidden.size()) ? output_dim : hidden[l];
    }
};

inline void validate(const MlpSpec& spec) {
    if (spec.input_dim < 1 || spec.output_dim < 1)
        throw std::invalid_argument("MlpSpec: dims must be >= 1");
    for (int h : spec.hidden)
        if (h < 1) throw std::invalid_argument("MlpSpec: hidden sizes must be >= 1");
}

/// Plain weights: the forward-pass half of a parameter set. Target copies
/// are of this type.
template <class S>
struct Mlp {
    MlpSpec spec;
    std::vector<Mat<S>> w;  // layer l: out_of(l) x in_of(l)
    std::vector<Vec<S>> b;
};

/// Fan-in scaled uniform init, biases zero.
template <class S>
Mlp<S> make_mlp(const MlpSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(seed);
    Mlp<S> net;
    net.spec = spec;
    net.w.resize(spec.n_layers());
    net.b.resize(spec.n_layers());
    for (int l = 0; l < spec.n_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.in_of(l)));
        net.w[l] = Mat<S>(spec.out_of(l), spec.in_of(l));
        for (Eigen::Index i = 0; i < net.w[l].size(); ++i)
            net.w[l].data()[i] = static_cast<S>(uniform(rng, -bound, bound));
        net.b[l] = Vec<S>::Zero(spec.out_of(l));
    }
    return net;
}

/// Batched inference without a tape. Rows of x are samples.
template <class S>
Mat<S> predict(const Mlp<S>& net, const Mat<S>& x) {
    if (x.cols() != net.spec.input_dim)
        throw std::invalid_argument("predict: input dimension mismatch");
    Mat<S> h = x;
    for (int l = 0; l < net.spec.n_layers(); ++l) {
        Mat<S> z = (h * net.w[l].transpose()).rowwise() + net.b[l].transpose();
        if (l + 1 < net.spec.n_layers()) z = z.cwiseMax(S(0));
        h = std::move(z);
    }
    return h;
}

template <class S>
Vec<S> predict_vector(const Mlp<S>& net, const Vec<S>& x) {
    return predict(net, Mat<S>(x.transpose())).row(0).transpose();
}

/// Activations retained by a forward pass for the matching backward pass.
/// `revision` pins the tape to the parameter values it was computed with.
template <class S>
struct Tape {
    std::vector<Mat<S>> inputs;  // input to each layer, batch x in_of(l)
    Mat<S> output;               // batch x output_dim
    std::uint64_t revision = 0;
};

/// Weights plus gradient accumulators and Adam moment slots.
template <class S>
struct MlpParams {
    Mlp<S> net;
    std::vector<Mat<S>> grad_w;
    std::vector<Vec<S>> grad_b;
    std::vector<Mat<S>> adam_m_w, adam_v_w;
    std::vector<Vec<S>> adam_m_b, adam_v_b;
    long step_count = 0;
    std::uint64_t revision = 0;
};

template <class S>
MlpParams<S> make_params(const MlpSpec& spec, std::uint64_t seed) {
    MlpParams<S> p;
    p.net = make_mlp<S>(spec, seed);
    const int n = spec.n_layers();
    p.grad_w.resize(n);
    p.grad_b.resize(n);
    p.adam_m_w.resize(n);
    p.adam_v_w.resize(n);
    p.adam_m_b.resize(n);
    p.adam_v_b.resize(n);
    for (int l = 0; l < n; ++l) {
        p.grad_w[l] = Mat<S>::Zero(spec.out_of(l), spec.in_of(l));
        p.adam_m_w[l] = p.grad_w[l];
        p.adam_v_w[l] = p.grad_w[l];
        p.grad_b[l] = Vec<S>::Zero(spec.out_of(l));
        p.adam_m_b[l] = p.grad_b[l];
        p.adam_v_b[l] = p.grad_b[l];
    }
    return p;
}

template <class S>
void zero_gradients(MlpParams<S>& p) {
    for (auto& g : p.grad_w) g.setZero();
    for (auto& g : p.grad_b) g.setZero();
}

template <class S>
Tape<S> forward(const MlpParams<S>& p, const Mat<S>& x) {
    if (x.cols() != p.net.spec.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    Tape<S> tape;
    tape.revision = p.revision;
    tape.inputs.reserve(p.net.spec.n_layers());
    Mat<S> h = x;
    for (int l = 0; l < p.net.spec.n_layers(); ++l) {
        tape.inputs.push_back(h);
        Mat<S> z = (h * p.net.w[l].transpose()).rowwise() + p.net.b[l].transpose();
        if (l + 1 < p.net.spec.n_layers()) z = z.cwiseMax(S(0));
        h = std::move(z);
    }
    tape.output = h;
    return tape;
}

/// Accumulate exact reverse-mode gradients of sum(output * output_grad)
/// into p. The tape must come from a forward pass against the current
/// parameter values.
template <class S>
void backward(MlpParams<S>& p, const Tape<S>& tape, const Mat<S>& output_grad) {
    if (tape.revision != p.revision)
        throw std::logic_error("backward: tape is stale, parameters changed since forward");
    if (output_grad.rows() != tape.output.rows() || output_grad.cols() != tape.output.cols())
        throw std::invalid_argument("backward: output gradient shape mismatch");
    const int n = p.net.spec.n_layers();
    Mat<S> dz = output_grad;
    for (int l = n - 1; l >= 0; --l) {
        if (l < n - 1) {
            // ReLU mask: the input of layer l+1 is the rectified output of l
            dz = dz.cwiseProduct(
                (tape.inputs[l + 1].array() > S(0)).template cast<S>().matrix());
        }
        p.grad_w[l].noalias() += dz.transpose() * tape.inputs[l];
        p.grad_b[l].noalias() += dz.colwise().sum().transpose();
        if (l > 0) dz = (dz * p.net.w[l]).eval();
    }
}

template <class S>
double grad_sq_norm(const MlpParams<S>& p) {
    double acc = 0.0;
    for (const auto& g : p.grad_w) acc += static_cast<double>(g.squaredNorm());
    for (const auto& g : p.grad_b) acc += static_cast<double>(g.squaredNorm());
    return acc;
}

/// Bias-corrected Adam update from the accumulated gradients; clears the
/// gradients and bumps the parameter revision.
template <class S>
void adam_step(MlpParams<S>& p, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8) {
    ++p.step_count;
    const S c1 = static_cast<S>(1.0 / (1.0 - std::pow(beta1, p.step_count)));
    const S c2 = static_cast<S>(1.0 / (1.0 - std::pow(beta2, p.step_count)));
    const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
    const S step = static_cast<S>(lr), denom_eps = static_cast<S>(eps);
    for (int l = 0; l < p.net.spec.n_layers(); ++l) {
        p.adam_m_w[l] = b1 * p.adam_m_w[l] + (S(1) - b1) * p.grad_w[l];
        p.adam_v_w[l] = b2 * p.adam_v_w[l] + (S(1) - b2) * p.grad_w[l].cwiseProduct(p.grad_w[l]);
        p.net.w[l].array() -=
            step * (c1 * p.adam_m_w[l].array()) / ((c2 * p.adam_v_w[l].array()).sqrt() + denom_eps);
        p.adam_m_b[l] = b1 * p.adam_m_b[l] + (S(1) - b1) * p.grad_b[l];
        p.adam_v_b[l] = b2 * p.adam_v_b[l] + (S(1) - b2) * p.grad_b[l].cwiseProduct(p.grad_b[l]);
        p.net.b[l].array() -=
            step * (c1 * p.adam_m_b[l].array()) / ((c2 * p.adam_v_b[l].array()).sqrt() + denom_eps);
    }
    zero_gradients(p);
    ++p.revision;
}

/// Exponential-moving-average copy of online weights.
template <class S>
struct TargetParams {
    Mlp<S> net;
    double lambda = 0.05;  // in (0, 1)
};

template <class S>
TargetParams<S> make_target(const MlpParams<S>& source, double lambda) {
    if (lambda <= 0.0 || lambda >= 1.0)
        throw std::invalid_argument("TargetParams: lambda must lie in (0, 1)");
    return TargetParams<S>{source.net, lambda};
}

/// target <- (1 - lambda) target + lambda source, elementwise.
template <class S>
void polyak_update(TargetParams<S>& target, const MlpParams<S>& source, double lambda) {
    const S lam = static_cast<S>(lambda);
    for (int l = 0; l < target.net.spec.n_layers(); ++l) {
        if (target.net.w[l].rows() != source.net.w[l].rows() ||
            target.net.w[l].cols() != source.net.w[l].cols())
            throw std::invalid_argument("polyak_update: shape mismatch");
        target.net.w[l] = (S(1) - lam) * target.net.w[l] + lam * source.net.w[l];
        target.net.b[l] = (S(1) - lam) * target.net.b[l] + lam * source.net.b[l];
    }
}

template <class S>
void polyak_update(TargetParams<S>& target, const MlpParams<S>& source) {
    polyak_update(target, source, target.lambda);
}

inline constexpr int kCheckpointVersion = 1;

template <class S>
nlohmann::json checkpoint_json(const Mlp<S>& net) {
    nlohmann::json j;
    j["version"] = kCheckpointVersion;
    j["input_dim"] = net.spec.input_dim;
    j["hidden"] = net.spec.hidden;
    j["output_dim"] = net.spec.output_dim;
    auto layers = nlohmann::json::array();
    for (int l = 0; l < net.spec.n_layers(); ++l) {
        nlohmann::json layer;
        layer["rows"] = net.w[l].rows();
        layer["cols"] = net.w[l].cols();
        std::vector<double> w(net.w[l].size());
        for (Eigen::Index i = 0; i < net.w[l].size(); ++i)
            w[i] = static_cast<double>(net.w[l].data()[i]);
        layer["w"] = std::move(w);
        std::vector<double> b(net.b[l].size());
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i)
            b[i] = static_cast<double>(net.b[l][i]);
        layer["b"] = std::move(b);
        layers.push_back(std::move(layer));
    }
    j["layers"] = std::move(layers);
    return j;
}

template <class S>
Mlp<S> mlp_from_checkpoint(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    MlpSpec spec;
    spec.input_dim = j.at("input_dim").get<int>();
    spec.hidden = j.at("hidden").get<std::vector<int>>();
    spec.output_dim = j.at("output_dim").get<int>();
    Mlp<S> net = make_mlp<S>(spec, 0);
    const auto& layers = j.at("layers");
    for (int l = 0; l < spec.n_layers(); ++l) {
        const auto& layer = layers.at(l);
        if (layer.at("rows").get<Eigen::Index>() != net.w[l].rows() ||
            layer.at("cols").get<Eigen::Index>() != net.w[l].cols())
            throw std::runtime_error("checkpoint: layer shape mismatch");
        const auto w = layer.at("w").get<std::vector<double>>();
        for (Eigen::Index i = 0; i < net.w[l].size(); ++i)
            net.w[l].data()[i] = static_cast<S>(w[i]);
        const auto b = layer.at("b").get<std::vector<double>>();
        for (Eigen::Index i = 0; i < net.b[l].size(); ++i) net.b[l][i] = static_cast<S>(b[i]);
    }
    return net;
}

template <class S>
void save_checkpoint(const Mlp<S>& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << checkpoint_json(net).dump();
}

template <class S>
Mlp<S> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return mlp_from_checkpoint<S>(j);
}

}  // namespace iq
