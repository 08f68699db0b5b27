#ifndef MOPAC_MODEL_HPP
#define MOPAC_MODEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mopac/envs.hpp"
#include "mopac/gaussian.hpp"
#include "mopac/replay.hpp"
#include "mopac/rng.hpp"

namespace mopac {

// Anything the rollout machinery can step through: the learned ensemble or the
// analytic environment dynamics plugged in as a perfect model.
class DynamicsModel {
public:
    virtual ~DynamicsModel() = default;
    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    // Number of interchangeable simulators a caller may pin (elite count for
    // ensembles, 1 for analytic dynamics).
    virtual int num_samplers() const = 0;
    // Stochastic batched step through simulator `pin`; rows are independent.
    virtual void step_batch(int pin, const Eigen::MatrixXd& states,
                            const Eigen::MatrixXd& actions, Rng& rng,
                            Eigen::MatrixXd& next_states,
                            Eigen::VectorXd& rewards) const = 0;
    // Deterministic (mean) batched step.
    virtual void mean_step_batch(int pin, const Eigen::MatrixXd& states,
                                 const Eigen::MatrixXd& actions,
                                 Eigen::MatrixXd& next_states,
                                 Eigen::VectorXd& rewards) const = 0;
};

// Per-dimension input whitening fit on the full training set.
struct Normalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    void fit(const Eigen::MatrixXd& x);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct EnsembleConfig {
    int ensemble_size = 7;
    int elite_count = 5;
    std::vector<int> hidden = {32, 32};
    Activation activation = Activation::Relu;
    double lr = 3e-4;
    int batch_size = 256;
    std::size_t min_buffer = 250;
    double holdout_fraction = 0.2;
    int patience = 5;
    double log_std_min = -20.0;
    double log_std_max = 2.0;
    bool learned_reward = true;    // false: use the env's analytic reward
    bool pin_per_step = false;     // resample the elite at every rollout step
};

struct ModelTrainReport {
    std::vector<double> train_nll;  // per member, final epoch
    std::vector<double> val_l2;     // per member, best epoch
    std::vector<int> epochs_run;    // per member
    std::vector<int> elites;        // ascending indices
    double elite_val_l2 = 0.0;      // mean over elites
};

// Ensemble of probabilistic nets, each mapping (s, a) to a Gaussian over
// (state delta, reward). Members are trained on independent bootstrap
// resamples; elites are the members with lowest validation L2.
class EnsembleModel : public DynamicsModel {
public:
    EnsembleModel(int state_dim, int action_dim, const EnsembleConfig& cfg, Rng& rng);

    // Trains every member by Gaussian NLL on its own bootstrap resample of the
    // buffer, refits the normalizer on all inputs, and selects elites by
    // holdout L2 of mean predictions.
    ModelTrainReport train(const ReplayBuffer& env_buffer, int epochs, Rng& rng);

    bool trained() const { return trained_; }
    const std::vector<int>& elites() const { return elites_; }
    const Normalizer& normalizer() const { return normalizer_; }
    const EnsembleConfig& config() const { return cfg_; }
    int ensemble_size() const { return static_cast<int>(members_.size()); }

    // Single transition through a uniformly drawn elite (or a pinned one).
    // Returns (next_state, reward); sampling is reparameterized.
    std::pair<Eigen::VectorXd, double> predict(const Eigen::VectorXd& state,
                                               const Eigen::VectorXd& action, Rng& rng,
                                               int pinned_elite = -1) const;
    std::pair<Eigen::VectorXd, double> predict_mean(const Eigen::VectorXd& state,
                                                    const Eigen::VectorXd& action,
                                                    int pinned_elite = -1) const;

    // DynamicsModel interface; `pin` indexes into elites().
    int state_dim() const override { return state_dim_; }
    int action_dim() const override { return action_dim_; }
    int num_samplers() const override;
    void step_batch(int pin, const Eigen::MatrixXd& states,
                    const Eigen::MatrixXd& actions, Rng& rng,
                    Eigen::MatrixXd& next_states, Eigen::VectorXd& rewards) const override;
    void mean_step_batch(int pin, const Eigen::MatrixXd& states,
                         const Eigen::MatrixXd& actions, Eigen::MatrixXd& next_states,
                         Eigen::VectorXd& rewards) const override;

    void set_analytic_reward(RewardFn fn) { analytic_reward_ = std::move(fn); }

    // Test hooks: direct member access and manual elite override.
    GaussianHead& member(int i) { return members_[i]; }
    const GaussianHead& member(int i) const { return members_[i]; }
    void set_elites(const std::vector<int>& elites);

    void save(std::ostream& out) const;
    static EnsembleModel load(std::istream& in);

    // Exactly the k smallest entries, ties broken by lower index.
    static std::vector<int> select_elites(const std::vector<double>& val_l2, int k);

private:
    EnsembleModel() = default;
    void member_raw_output(int member_index, const Eigen::MatrixXd& states,
                           const Eigen::MatrixXd& actions, GaussianHead::Output& out) const;
    double reward_from(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                       const Eigen::VectorXd& sp, double learned) const;

    int state_dim_ = 0;
    int action_dim_ = 0;
    EnsembleConfig cfg_;
    std::vector<GaussianHead> members_;
    std::vector<AdamState> adam_;
    Normalizer normalizer_;
    std::vector<int> elites_;
    bool trained_ = false;
    RewardFn analytic_reward_;
};

// Perfect model: the environment's own transition function and analytic
// reward, exposed through the DynamicsModel interface.
class AnalyticDynamics : public DynamicsModel {
public:
    explicit AnalyticDynamics(const Env& env);
    int state_dim() const override { return state_dim_; }
    int action_dim() const override { return action_dim_; }
    int num_samplers() const override { return 1; }
    void step_batch(int pin, const Eigen::MatrixXd& states,
                    const Eigen::MatrixXd& actions, Rng& rng,
                    Eigen::MatrixXd& next_states, Eigen::VectorXd& rewards) const override;
    void mean_step_batch(int pin, const Eigen::MatrixXd& states,
                         const Eigen::MatrixXd& actions, Eigen::MatrixXd& next_states,
                         Eigen::VectorXd& rewards) const override;

private:
    int state_dim_ = 0;
    int action_dim_ = 0;
    std::unique_ptr<Env> env_;
    RewardFn reward_;
};

} // namespace mopac

#endif
