#ifndef MOPAC_NET_HPP
#define MOPAC_NET_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "mopac/rng.hpp"

namespace mopac {

enum class Activation { Tanh, Relu, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Feed-forward chain of affine layers with per-layer activations.
// weights[l] has shape sizes[l+1] x sizes[l]; forward treats rows of the
// input matrix as batch entries.
struct DenseNet {
    std::vector<int> sizes;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    std::vector<Activation> activations; // one per layer

    int input_dim() const { return sizes.front(); }
    int output_dim() const { return sizes.back(); }
    int num_layers() const { return static_cast<int>(weights.size()); }
    std::size_t parameter_count() const;
    bool finite() const;
    bool congruent_with(const DenseNet& other) const;
};

// Uniform fan-in initialization: each entry U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
DenseNet make_dense_net(const std::vector<int>& sizes, Activation hidden,
                        Activation output, Rng& rng);

// Post-activation values per layer; cache[0] is the input batch.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> post;
    std::vector<Eigen::MatrixXd> pre; // pre-activation, needed for relu masks
};

// Batched forward pass. input is batch x input_dim.
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);

// Single-vector convenience wrapper.
Eigen::VectorXd forward1(const DenseNet& net, const Eigen::VectorXd& input);

// d(loss)/d(parameter) for every parameter, plus d(loss)/d(input).
struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd input;

    bool congruent_with(const DenseNet& net) const;
    bool finite() const;
    void add_scaled(const Gradients& other, double scale);
};

Gradients zero_gradients(const DenseNet& net);

// Reverse-mode pass from a cached forward. output_grad is batch x output_dim;
// batch contributions are summed into the parameter gradients.
Gradients backward(const DenseNet& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad);

// Spec-shaped overload: runs the forward internally.
Gradients backward(const DenseNet& net, const Eigen::MatrixXd& input,
                   const Eigen::MatrixXd& output_grad);

struct AdamState {
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_b, v_b;
    long step = 0;

    static AdamState for_net(const DenseNet& net);
    bool initialized() const { return !m_w.empty(); }
};

// Adam update with bias correction. Throws TrainingDivergence on non-finite
// gradients.
void adam_step(DenseNet& net, const Gradients& grads, double lr,
               AdamState& state, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// Plain gradient descent.
void sgd_step(DenseNet& net, const Gradients& grads, double lr);

// target <- tau * source + (1 - tau) * target, elementwise.
void polyak_update(DenseNet& target, const DenseNet& source, double tau);

// Flat binary serialization; round-trip is bit-exact.
void save_net(std::ostream& out, const DenseNet& net);
DenseNet load_net(std::istream& in);

} // namespace mopac

#endif
