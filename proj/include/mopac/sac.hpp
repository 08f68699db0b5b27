#ifndef MOPAC_SAC_HPP
#define MOPAC_SAC_HPP

#include <Eigen/Dense>
#include <iosfwd>
#include <vector>

#include "mopac/envs.hpp"
#include "mopac/gaussian.hpp"
#include "mopac/mpr.hpp"
#include "mopac/net.hpp"
#include "mopac/rng.hpp"

namespace mopac {

struct SacConfig {
    std::vector<int> hidden = {64, 64};
    Activation activation = Activation::Relu;
    double lr = 3e-4;        // shared by policy, Q, V
    double gamma = 0.99;
    double tau = 0.005;
    double alpha = 0.2;
    bool alpha_autotune = false;
    double target_entropy = 0.0; // 0 means -action_dim
    double log_std_min = -20.0;
    double log_std_max = 2.0;
};

// Policy with tanh squashing plus twin Q, V, and Polyak-averaged targets.
struct ActorCritic {
    GaussianHead policy; // unsquashed Gaussian over pre-tanh actions
    DenseNet q1, q2, v;
    DenseNet v_target, q1_target, q2_target;
    double log_alpha = 0.0;
    Eigen::VectorXd action_center;
    Eigen::VectorXd action_half; // half-range per dimension

    AdamState policy_adam, q1_adam, q2_adam, v_adam;
    double alpha_m = 0.0, alpha_v = 0.0; // scalar Adam moments for log_alpha
    long alpha_step = 0;

    double alpha() const;
    int state_dim() const { return q1.sizes.front() - static_cast<int>(action_center.size()); }
    int action_dim() const { return static_cast<int>(action_center.size()); }
};

ActorCritic make_actor_critic(int state_dim, int action_dim,
                              const Eigen::VectorXd& action_low,
                              const Eigen::VectorXd& action_high,
                              const SacConfig& cfg, Rng& rng);

struct ActionSample {
    Eigen::VectorXd action;
    double log_prob = 0.0;
};

// Reparameterized sample squashed to the action box; log_prob carries the
// tanh change-of-variables correction.
ActionSample sample_action(const ActorCritic& ac, const Eigen::VectorXd& state, Rng& rng);

// Deterministic evaluation action (squashed policy mean).
Eigen::VectorXd mean_action(const ActorCritic& ac, const Eigen::VectorXd& state);

// Log-density of an arbitrary in-bounds action under the squashed policy.
double log_prob_of(const ActorCritic& ac, const Eigen::VectorXd& state,
                   const Eigen::VectorXd& action);

struct SacLossReport {
    double v_loss = 0.0;
    double q1_loss = 0.0;
    double q2_loss = 0.0;
    double policy_loss = 0.0;
    double alpha = 0.0;
    double mean_log_prob = 0.0; // entropy estimate is the negation
};

// Policy half of the update, exposed so gradient checks can probe the exact
// production path: samples fresh squashed actions, evaluates min(Q1, Q2), and
// returns E[alpha * log pi - Qmin] with its gradient w.r.t. the policy net.
struct PolicyStep {
    double loss = 0.0;
    double mean_log_prob = 0.0;
    Gradients grads;
};

PolicyStep compute_policy_step(const ActorCritic& ac, const Eigen::MatrixXd& states,
                               Rng& rng, double alpha);

// One gradient step each on V, Q1/Q2, and the policy, then Polyak target
// updates. Throws TrainingDivergence naming the offending component.
SacLossReport sac_update(ActorCritic& ac, const std::vector<Transition>& batch,
                         const SacConfig& cfg, Rng& rng);

// TD(0) update of V and its target only, for the MBRL-only baseline which has
// no actor: V(s) regresses onto r + gamma * (1 - done) * V_target(s').
double value_td_update(ActorCritic& ac, const std::vector<Transition>& batch,
                       const SacConfig& cfg);

// Adapters for the MPR machinery.
class PolicyMeanSampler : public ActionSampler {
public:
    explicit PolicyMeanSampler(const ActorCritic& ac) : ac_(&ac) {}
    Eigen::VectorXd mean_action(const Eigen::VectorXd& state) const override {
        return mopac::mean_action(*ac_, state);
    }

private:
    const ActorCritic* ac_;
};

class TargetValueEstimator : public ValueEstimator {
public:
    explicit TargetValueEstimator(const ActorCritic& ac) : ac_(&ac) {}
    Eigen::VectorXd values(const Eigen::MatrixXd& states) const override {
        return forward(ac_->v_target, states).col(0);
    }

private:
    const ActorCritic* ac_;
};

void save_actor_critic(std::ostream& out, const ActorCritic& ac);
ActorCritic load_actor_critic(std::istream& in);

} // namespace mopac

#endif
