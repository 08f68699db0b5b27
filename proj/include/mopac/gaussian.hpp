#ifndef MOPAC_GAUSSIAN_HPP
#define MOPAC_GAUSSIAN_HPP

#include <Eigen/Dense>

#include "mopac/net.hpp"
#include "mopac/rng.hpp"

namespace mopac {

// Diagonal-Gaussian output head over a DenseNet. In state-dependent mode the
// net emits [mean, raw_log_std] (2*dim outputs); otherwise log_std is a free
// per-dimension parameter vector. Emitted log-stds are always clamped into
// [log_std_min, log_std_max].
struct GaussianHead {
    DenseNet net;
    int dim = 0;
    bool state_dependent_std = true;
    Eigen::VectorXd log_std_param; // used when !state_dependent_std
    double log_std_min = -20.0;
    double log_std_max = 2.0;

    struct Output {
        Eigen::MatrixXd mean;        // batch x dim
        Eigen::MatrixXd log_std;     // batch x dim, clamped
        Eigen::MatrixXd clamp_mask;  // 1 where the raw value was inside bounds
    };

    struct Sample {
        Eigen::MatrixXd value; // mean + std .* noise
        Eigen::MatrixXd noise; // unit normal draws
        Output out;
    };

    Output forward(const Eigen::MatrixXd& input, ForwardCache* cache = nullptr) const;

    // Reparameterized sample: value = mean + exp(log_std) * unit_noise, so
    // gradients flow through both mean and std.
    Sample sample(const Eigen::MatrixXd& input, Rng& rng, ForwardCache* cache = nullptr) const;

    // Maps per-element loss gradients w.r.t. mean and (clamped) log_std back to
    // a gradient w.r.t. the underlying net output. In parameter-std mode the
    // log-std part is accumulated into log_std_param_grad instead.
    Eigen::MatrixXd output_gradient(const Output& out, const Eigen::MatrixXd& d_mean,
                                    const Eigen::MatrixXd& d_log_std,
                                    Eigen::VectorXd* log_std_param_grad = nullptr) const;
};

GaussianHead make_gaussian_head(int input_dim, const std::vector<int>& hidden,
                                int dim, Activation hidden_act, Rng& rng,
                                bool state_dependent_std = true,
                                double log_std_min = -20.0, double log_std_max = 2.0);

} // namespace mopac

#endif
