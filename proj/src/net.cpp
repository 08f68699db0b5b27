#include "mopac/net.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "mopac/errors.hpp"

namespace mopac {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "identity") return Activation::Identity;
    throw ContractViolation("unknown activation: " + name);
}

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < num_layers(); ++l)
        n += static_cast<std::size_t>(weights[l].size()) + biases[l].size();
    return n;
}

bool DenseNet::finite() const {
    for (int l = 0; l < num_layers(); ++l)
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
}

bool DenseNet::congruent_with(const DenseNet& other) const {
    return sizes == other.sizes && activations == other.activations;
}

DenseNet make_dense_net(const std::vector<int>& sizes, Activation hidden,
                        Activation output, Rng& rng) {
    if (sizes.size() < 2) throw ContractViolation("DenseNet needs at least 2 layer sizes");
    for (int s : sizes)
        if (s <= 0) throw ContractViolation("DenseNet layer sizes must be positive");
    DenseNet net;
    net.sizes = sizes;
    const int layers = static_cast<int>(sizes.size()) - 1;
    for (int l = 0; l < layers; ++l) {
        const int in = sizes[l], out = sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Eigen::MatrixXd w(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
        Eigen::VectorXd b(out);
        for (int r = 0; r < out; ++r) b(r) = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
        net.activations.push_back(l == layers - 1 ? output : hidden);
    }
    return net;
}

namespace {

inline void apply_activation(Activation act, Eigen::MatrixXd& x) {
    switch (act) {
        case Activation::Tanh:
            x = x.array().tanh();
            break;
        case Activation::Relu:
            x = x.cwiseMax(0.0);
            break;
        case Activation::Identity:
            break;
    }
}

// Derivative through the activation given pre- and post-activation values.
inline Eigen::MatrixXd activation_backward(Activation act,
                                           const Eigen::MatrixXd& pre,
                                           const Eigen::MatrixXd& post,
                                           const Eigen::MatrixXd& grad) {
    switch (act) {
        case Activation::Tanh:
            return grad.array() * (1.0 - post.array().square());
        case Activation::Relu:
            return (pre.array() > 0.0).select(grad, 0.0);
        case Activation::Identity:
            return grad;
    }
    return grad;
}

} // namespace

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache) {
    if (input.cols() != net.input_dim())
        throw ContractViolation("forward: input has " + std::to_string(input.cols()) +
                                " columns, net expects " + std::to_string(net.input_dim()));
    if (cache) {
        cache->post.clear();
        cache->pre.clear();
        cache->post.push_back(input);
    }
    Eigen::MatrixXd h = input;
    for (int l = 0; l < net.num_layers(); ++l) {
        Eigen::MatrixXd z = h * net.weights[l].transpose();
        z.rowwise() += net.biases[l].transpose();
        if (cache) cache->pre.push_back(z);
        apply_activation(net.activations[l], z);
        if (cache) cache->post.push_back(z);
        h = std::move(z);
    }
    return h;
}

Eigen::VectorXd forward1(const DenseNet& net, const Eigen::VectorXd& input) {
    return forward(net, input.transpose()).row(0).transpose();
}

bool Gradients::congruent_with(const DenseNet& net) const {
    if (weights.size() != net.weights.size() || biases.size() != net.biases.size())
        return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (weights[l].rows() != net.weights[l].rows() ||
            weights[l].cols() != net.weights[l].cols() ||
            biases[l].size() != net.biases[l].size())
            return false;
    return true;
}

bool Gradients::finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l)
        if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    return true;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += scale * other.weights[l];
        biases[l] += scale * other.biases[l];
    }
}

Gradients zero_gradients(const DenseNet& net) {
    Gradients g;
    for (int l = 0; l < net.num_layers(); ++l) {
        g.weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
}

Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad) {
    const int layers = net.num_layers();
    if (static_cast<int>(cache.post.size()) != layers + 1)
        throw ContractViolation("backward: cache does not match net depth");
    if (output_grad.cols() != net.output_dim() ||
        output_grad.rows() != cache.post.front().rows())
        throw ContractViolation("backward: output_grad shape mismatch");

    Gradients g;
    g.weights.resize(layers);
    g.biases.resize(layers);
    Eigen::MatrixXd delta = output_grad;
    for (int l = layers - 1; l >= 0; --l) {
        delta = activation_backward(net.activations[l], cache.pre[l], cache.post[l + 1], delta);
        g.weights[l].noalias() = delta.transpose() * cache.post[l];
        g.biases[l] = delta.colwise().sum().transpose();
        if (l > 0)
            delta = (delta * net.weights[l]).eval();
        else
            g.input.noalias() = delta * net.weights[l];
    }
    return g;
}

Gradients backward(const DenseNet& net, const Eigen::MatrixXd& input,
                   const Eigen::MatrixXd& output_grad) {
    ForwardCache cache;
    forward(net, input, &cache);
    return backward(net, cache, output_grad);
}

AdamState AdamState::for_net(const DenseNet& net) {
    AdamState s;
    for (int l = 0; l < net.num_layers(); ++l) {
        s.m_w.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.v_w.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.m_b.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        s.v_b.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return s;
}

void adam_step(DenseNet& net, const Gradients& grads, double lr,
               AdamState& state, double beta1, double beta2, double eps) {
    if (!grads.congruent_with(net))
        throw ContractViolation("adam_step: gradient shapes do not match net");
    if (!grads.finite())
        throw TrainingDivergence("adam_step: non-finite gradient entries");
    if (!state.initialized()) state = AdamState::for_net(net);
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (int l = 0; l < net.num_layers(); ++l) {
        state.m_w[l] = beta1 * state.m_w[l] + (1.0 - beta1) * grads.weights[l];
        state.v_w[l] = beta2 * state.v_w[l] +
                       (1.0 - beta2) * grads.weights[l].array().square().matrix();
        net.weights[l].array() -=
            lr * (state.m_w[l].array() / bc1) /
            ((state.v_w[l].array() / bc2).sqrt() + eps);
        state.m_b[l] = beta1 * state.m_b[l] + (1.0 - beta1) * grads.biases[l];
        state.v_b[l] = beta2 * state.v_b[l] +
                       (1.0 - beta2) * grads.biases[l].array().square().matrix();
        net.biases[l].array() -=
            lr * (state.m_b[l].array() / bc1) /
            ((state.v_b[l].array() / bc2).sqrt() + eps);
    }
}

void sgd_step(DenseNet& net, const Gradients& grads, double lr) {
    if (!grads.congruent_with(net))
        throw ContractViolation("sgd_step: gradient shapes do not match net");
    if (!grads.finite())
        throw TrainingDivergence("sgd_step: non-finite gradient entries");
    for (int l = 0; l < net.num_layers(); ++l) {
        net.weights[l] -= lr * grads.weights[l];
        net.biases[l] -= lr * grads.biases[l];
    }
}

void polyak_update(DenseNet& target, const DenseNet& source, double tau) {
    if (!target.congruent_with(source))
        throw ContractViolation("polyak_update: architecture mismatch");
    if (!(tau > 0.0 && tau <= 1.0))
        throw ContractViolation("polyak_update: tau must be in (0, 1]");
    for (int l = 0; l < target.num_layers(); ++l) {
        if (tau == 1.0) {
            target.weights[l] = source.weights[l];
            target.biases[l] = source.biases[l];
            continue;
        }
        // Incremental form keeps target == source an exact fixed point.
        target.weights[l] += tau * (source.weights[l] - target.weights[l]);
        target.biases[l] += tau * (source.biases[l] - target.biases[l]);
    }
}

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ContractViolation("load_net: truncated stream");
    return v;
}

} // namespace

void save_net(std::ostream& out, const DenseNet& net) {
    write_pod<std::uint32_t>(out, 0x4d4e4554u); // "MNET"
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.sizes.size()));
    for (int s : net.sizes) write_pod<std::int32_t>(out, s);
    for (Activation a : net.activations)
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(a));
    for (int l = 0; l < net.num_layers(); ++l) {
        // Row-major parameter dump.
        const auto& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) write_pod<double>(out, w(r, c));
        for (Eigen::Index r = 0; r < net.biases[l].size(); ++r)
            write_pod<double>(out, net.biases[l](r));
    }
}

DenseNet load_net(std::istream& in) {
    if (read_pod<std::uint32_t>(in) != 0x4d4e4554u)
        throw ContractViolation("load_net: bad magic");
    const auto n_sizes = read_pod<std::uint32_t>(in);
    if (n_sizes < 2 || n_sizes > 64) throw ContractViolation("load_net: bad layer count");
    DenseNet net;
    net.sizes.resize(n_sizes);
    for (auto& s : net.sizes) s = read_pod<std::int32_t>(in);
    net.activations.resize(n_sizes - 1);
    for (auto& a : net.activations) {
        auto tag = read_pod<std::uint8_t>(in);
        if (tag > 2) throw ContractViolation("load_net: bad activation tag");
        a = static_cast<Activation>(tag);
    }
    for (std::size_t l = 0; l + 1 < n_sizes; ++l) {
        Eigen::MatrixXd w(net.sizes[l + 1], net.sizes[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = read_pod<double>(in);
        Eigen::VectorXd b(net.sizes[l + 1]);
        for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = read_pod<double>(in);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

} // namespace mopac
