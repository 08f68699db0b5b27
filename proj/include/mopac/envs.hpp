#ifndef MOPAC_ENVS_HPP
#define MOPAC_ENVS_HPP

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "mopac/rng.hpp"

namespace mopac {

struct EnvSpec {
    std::string id;
    int state_dim = 0;
    int action_dim = 0;
    Eigen::VectorXd action_low;
    Eigen::VectorXd action_high;
    int max_episode_steps = 0;
    double dt = 0.0;

    Eigen::VectorXd action_center() const { return 0.5 * (action_low + action_high); }
    Eigen::VectorXd action_half_range() const { return 0.5 * (action_high - action_low); }
    Eigen::VectorXd clip_action(const Eigen::VectorXd& a) const {
        return a.cwiseMax(action_low).cwiseMin(action_high);
    }
};

// One (s, a, r, s', done) tuple; the unit of all replay storage.
struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool done = false;
};

// Analytic reward r(s, a, s'); exposed by environments that have one so model
// rollouts can bypass the learned reward channel.
using RewardFn = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                      const Eigen::VectorXd&)>;

class Env {
public:
    virtual ~Env() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual Eigen::VectorXd reset(Rng& rng) = 0;
    // Steps the environment; done is set when the episode ends (all in-house
    // environments terminate only at the step limit).
    virtual Transition step(const Eigen::VectorXd& action) = 0;
    virtual const Eigen::VectorXd& state() const = 0;
    // True transition function without episode bookkeeping, for plugging the
    // analytic dynamics in as a "perfect model".
    virtual Eigen::VectorXd dynamics(const Eigen::VectorXd& state,
                                     const Eigen::VectorXd& action) const = 0;
    virtual std::optional<RewardFn> analytic_reward() const { return std::nullopt; }
    virtual std::unique_ptr<Env> clone() const = 0;
};

// Torque-limited swing-up pendulum, semi-implicit Euler at dt = 0.05.
class PendulumEnv : public Env {
public:
    PendulumEnv();
    const EnvSpec& spec() const override { return spec_; }
    Eigen::VectorXd reset(Rng& rng) override;
    Transition step(const Eigen::VectorXd& action) override;
    const Eigen::VectorXd& state() const override { return state_; }
    Eigen::VectorXd dynamics(const Eigen::VectorXd& state,
                             const Eigen::VectorXd& action) const override;
    std::optional<RewardFn> analytic_reward() const override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<PendulumEnv>(*this); }

    static double wrap_angle(double theta);
    static double reward(const Eigen::VectorXd& state, const Eigen::VectorXd& action);
    // Total mechanical energy (kinetic + potential), for drift checks.
    static double energy(const Eigen::VectorXd& state);

private:
    EnvSpec spec_;
    Eigen::VectorXd state_;
    int steps_ = 0;
};

// 1-DOF valve-rotation toy: commanded finger motion turns the valve through a
// stick-slip coupling that engages only when aggregate grip is high enough.
// Reward is exactly the per-step valve angle increment.
class ValveEnv : public Env {
public:
    static constexpr int kNumFingers = 3;
    static constexpr double kGripThreshold = 0.6;
    static constexpr double kMaxIncrement = 0.15; // rad per step at full drive
    static constexpr double kFingerStep = 0.2;    // finger travel per unit command

    ValveEnv();
    const EnvSpec& spec() const override { return spec_; }
    Eigen::VectorXd reset(Rng& rng) override;
    Transition step(const Eigen::VectorXd& action) override;
    const Eigen::VectorXd& state() const override { return state_; }
    Eigen::VectorXd dynamics(const Eigen::VectorXd& state,
                             const Eigen::VectorXd& action) const override;
    std::optional<RewardFn> analytic_reward() const override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<ValveEnv>(*this); }

private:
    EnvSpec spec_;
    Eigen::VectorXd state_;
    int steps_ = 0;
};

// Double-integrator point mass regulated to the origin.
class PointMassEnv : public Env {
public:
    PointMassEnv();
    const EnvSpec& spec() const override { return spec_; }
    Eigen::VectorXd reset(Rng& rng) override;
    Transition step(const Eigen::VectorXd& action) override;
    const Eigen::VectorXd& state() const override { return state_; }
    Eigen::VectorXd dynamics(const Eigen::VectorXd& state,
                             const Eigen::VectorXd& action) const override;
    std::optional<RewardFn> analytic_reward() const override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<PointMassEnv>(*this); }

private:
    EnvSpec spec_;
    Eigen::VectorXd state_;
    int steps_ = 0;
};

// Factory keyed by the config env id ("pendulum", "valve", "pointmass").
std::unique_ptr<Env> make_env(const std::string& id);

} // namespace mopac

#endif
