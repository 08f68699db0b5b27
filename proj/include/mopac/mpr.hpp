#ifndef MOPAC_MPR_HPP
#define MOPAC_MPR_HPP

#include <Eigen/Dense>
#include <vector>

#include "mopac/envs.hpp"
#include "mopac/model.hpp"
#include "mopac/rng.hpp"

namespace mopac {

// Supplies the nominal action sequence for a rollout batch (the learned
// policy's mean, or a fixed prior for the pure-MBRL baseline).
class ActionSampler {
public:
    virtual ~ActionSampler() = default;
    virtual Eigen::VectorXd mean_action(const Eigen::VectorXd& state) const = 0;
};

// Always proposes the center of the action box.
class FixedPriorSampler : public ActionSampler {
public:
    explicit FixedPriorSampler(const EnvSpec& spec) : center_(spec.action_center()) {}
    Eigen::VectorXd mean_action(const Eigen::VectorXd&) const override { return center_; }

private:
    Eigen::VectorXd center_;
};

// Batched state-value estimate used for the terminal bootstrap.
class ValueEstimator {
public:
    virtual ~ValueEstimator() = default;
    virtual Eigen::VectorXd values(const Eigen::MatrixXd& states) const = 0;
};

class ZeroValue : public ValueEstimator {
public:
    Eigen::VectorXd values(const Eigen::MatrixXd& states) const override {
        return Eigen::VectorXd::Zero(states.rows());
    }
};

struct MprConfig {
    int n_traj = 32;
    int h_min = 5;
    int h_max = 15;
    double anneal_fraction = 1.0; // fraction of total epochs over which H grows
    double lambda = 1.0;          // softmin temperature
    Eigen::VectorXd noise_std;    // per-action-dim exploration noise
    double gamma = 0.99;

    void validate() const;
};

// Noise-perturbed simulated trajectories around one shared base sequence.
struct RolloutBatch {
    Eigen::VectorXd start_state;
    Eigen::MatrixXd base_actions;       // H x action_dim
    std::vector<Eigen::MatrixXd> noise; // per timestep: n_traj x action_dim
    Eigen::VectorXd costs;              // n_traj (negated discounted returns)
    Eigen::VectorXd weights;            // n_traj, empty until computed
    int pinned_sampler = 0;

    int horizon() const { return static_cast<int>(base_actions.rows()); }
    int n_traj() const { return static_cast<int>(costs.size()); }
};

struct MprDiagnostics {
    double min_cost = 0.0;
    double mean_cost = 0.0;
    double effective_sample_size = 0.0; // 1 / sum(w^2)
};

// Linear growth from h_min to h_max over anneal_fraction * total_epochs, then
// a plateau at h_max.
int anneal_horizon(int epoch, int total_epochs, const MprConfig& cfg);

// Rolls one base action sequence (policy mean through the model's mean
// dynamics, pinned sampler), then simulates n_traj noise-perturbed rollouts
// accumulating discounted reward plus the gamma^H terminal value.
RolloutBatch simulate_batch(const Eigen::VectorXd& start_state,
                            const DynamicsModel& model, int pinned_sampler,
                            const ActionSampler& policy, const ValueEstimator& value,
                            int horizon, const MprConfig& cfg, Rng& rng);

// Softmin weights w_i = exp(-(C_i - min C) / lambda), normalized to sum 1.
Eigen::VectorXd importance_weights(const Eigen::VectorXd& costs, double lambda);

// Per-timestep weighted noise average added to the base sequence, clipped to
// the action box.
Eigen::MatrixXd optimal_action_sequence(const RolloutBatch& batch, const EnvSpec& spec);

// Full pipeline: simulate, weight, adjust, then replay the optimal sequence
// through the same pinned sampler. Returns all H transitions for D_model.
std::vector<Transition> mpr_transitions(const Eigen::VectorXd& start_state,
                                        const DynamicsModel& model,
                                        const ActionSampler& policy,
                                        const ValueEstimator& value,
                                        const EnvSpec& spec, int horizon,
                                        const MprConfig& cfg, Rng& rng,
                                        MprDiagnostics* diag = nullptr,
                                        Eigen::VectorXd* final_state = nullptr);

} // namespace mopac

#endif
