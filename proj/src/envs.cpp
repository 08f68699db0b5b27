#include "mopac/envs.hpp"

#include <cmath>

#include "mopac/errors.hpp"

namespace mopac {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_action(const EnvSpec& spec, const Eigen::VectorXd& action) {
    if (action.size() != spec.action_dim)
        throw ContractViolation(spec.id + ": action has dim " + std::to_string(action.size()) +
                                ", expected " + std::to_string(spec.action_dim));
    if (!action.allFinite()) throw ContractViolation(spec.id + ": non-finite action");
}

} // namespace

// ---------------------------------------------------------------------------
// Pendulum

namespace {
constexpr double kGravity = 10.0;
constexpr double kMass = 1.0;
constexpr double kLength = 1.0;
constexpr double kDt = 0.05;
constexpr double kMaxTorque = 2.0;
constexpr double kMaxSpeed = 8.0;
constexpr int kPendulumSteps = 200;
} // namespace

PendulumEnv::PendulumEnv() {
    spec_.id = "pendulum";
    spec_.state_dim = 2;
    spec_.action_dim = 1;
    spec_.action_low = Eigen::VectorXd::Constant(1, -kMaxTorque);
    spec_.action_high = Eigen::VectorXd::Constant(1, kMaxTorque);
    spec_.max_episode_steps = kPendulumSteps;
    spec_.dt = kDt;
    state_ = Eigen::VectorXd::Zero(2);
}

double PendulumEnv::wrap_angle(double theta) {
    double w = std::fmod(theta + kPi, 2.0 * kPi);
    if (w < 0) w += 2.0 * kPi;
    return w - kPi;
}

double PendulumEnv::reward(const Eigen::VectorXd& state, const Eigen::VectorXd& action) {
    const double th = wrap_angle(state(0));
    const double thdot = state(1);
    const double u = action(0);
    return -(th * th + 0.1 * thdot * thdot + 0.001 * u * u);
}

double PendulumEnv::energy(const Eigen::VectorXd& state) {
    // Uniform rod pivoting at one end: I = m l^2 / 3, COM at l/2, theta = 0 up.
    const double inertia = kMass * kLength * kLength / 3.0;
    return 0.5 * inertia * state(1) * state(1) +
           kMass * kGravity * (kLength / 2.0) * std::cos(state(0));
}

Eigen::VectorXd PendulumEnv::dynamics(const Eigen::VectorXd& state,
                                      const Eigen::VectorXd& action) const {
    const double th = state(0);
    const double thdot = state(1);
    const double u = std::clamp(action(0), -kMaxTorque, kMaxTorque);
    const double thddot = (3.0 * kGravity / (2.0 * kLength)) * std::sin(th) +
                          (3.0 / (kMass * kLength * kLength)) * u;
    double new_thdot = thdot + thddot * kDt;
    new_thdot = std::clamp(new_thdot, -kMaxSpeed, kMaxSpeed);
    const double new_th = th + new_thdot * kDt;
    Eigen::VectorXd next(2);
    next << new_th, new_thdot;
    return next;
}

Eigen::VectorXd PendulumEnv::reset(Rng& rng) {
    state_.resize(2);
    state_ << rng.uniform(-kPi, kPi), rng.uniform(-1.0, 1.0);
    steps_ = 0;
    return state_;
}

Transition PendulumEnv::step(const Eigen::VectorXd& action) {
    check_action(spec_, action);
    if (!state_.allFinite()) throw EnvironmentFault("pendulum: non-finite state");
    Transition t;
    t.state = state_;
    t.action = action;
    t.action(0) = std::clamp(t.action(0), -kMaxTorque, kMaxTorque);
    t.reward = reward(state_, t.action);
    t.next_state = dynamics(state_, t.action);
    if (!t.next_state.allFinite()) throw EnvironmentFault("pendulum: non-finite next state");
    state_ = t.next_state;
    steps_ += 1;
    t.done = steps_ >= spec_.max_episode_steps;
    return t;
}

std::optional<RewardFn> PendulumEnv::analytic_reward() const {
    return RewardFn([](const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                       const Eigen::VectorXd&) { return PendulumEnv::reward(s, a); });
}

// ---------------------------------------------------------------------------
// Valve

ValveEnv::ValveEnv() {
    spec_.id = "valve";
    spec_.state_dim = 1 + kNumFingers;
    spec_.action_dim = kNumFingers;
    spec_.action_low = Eigen::VectorXd::Constant(kNumFingers, -1.0);
    spec_.action_high = Eigen::VectorXd::Constant(kNumFingers, 1.0);
    spec_.max_episode_steps = 50;
    state_ = Eigen::VectorXd::Zero(spec_.state_dim);
}

Eigen::VectorXd ValveEnv::dynamics(const Eigen::VectorXd& state,
                                   const Eigen::VectorXd& action) const {
    Eigen::VectorXd next(spec_.state_dim);
    double drive = 0.0;
    double grip = 0.0;
    for (int i = 0; i < kNumFingers; ++i) {
        const double f = state(1 + i);
        const double a = std::clamp(action(i), -1.0, 1.0);
        const double fp = std::clamp(f + kFingerStep * a, 0.0, 1.0);
        next(1 + i) = fp;
        grip += fp;
        // Only achieved positive finger travel transmits torque.
        drive += std::max(fp - f, 0.0) / kFingerStep;
    }
    grip /= kNumFingers;
    drive /= kNumFingers;
    const bool engaged = grip >= kGripThreshold;
    const double increment = engaged ? kMaxIncrement * drive : 0.0;
    next(0) = state(0) + increment;
    return next;
}

Eigen::VectorXd ValveEnv::reset(Rng& rng) {
    state_.resize(spec_.state_dim);
    state_(0) = 0.0; // valve angle starts at exactly zero
    for (int i = 0; i < kNumFingers; ++i) state_(1 + i) = rng.uniform(0.0, 0.2);
    steps_ = 0;
    return state_;
}

Transition ValveEnv::step(const Eigen::VectorXd& action) {
    check_action(spec_, action);
    Transition t;
    t.state = state_;
    t.action = spec_.clip_action(action);
    t.next_state = dynamics(state_, t.action);
    t.reward = t.next_state(0) - state_(0);
    state_ = t.next_state;
    steps_ += 1;
    t.done = steps_ >= spec_.max_episode_steps;
    return t;
}

std::optional<RewardFn> ValveEnv::analytic_reward() const {
    return RewardFn([](const Eigen::VectorXd& s, const Eigen::VectorXd&,
                       const Eigen::VectorXd& sp) { return sp(0) - s(0); });
}

// ---------------------------------------------------------------------------
// Point mass

namespace {
constexpr double kPmDt = 0.05;
constexpr double kPmMaxSpeed = 2.0;
} // namespace

PointMassEnv::PointMassEnv() {
    spec_.id = "pointmass";
    spec_.state_dim = 4;
    spec_.action_dim = 2;
    spec_.action_low = Eigen::VectorXd::Constant(2, -1.0);
    spec_.action_high = Eigen::VectorXd::Constant(2, 1.0);
    spec_.max_episode_steps = 100;
    spec_.dt = kPmDt;
    state_ = Eigen::VectorXd::Zero(4);
}

Eigen::VectorXd PointMassEnv::dynamics(const Eigen::VectorXd& state,
                                       const Eigen::VectorXd& action) const {
    Eigen::VectorXd next(4);
    for (int d = 0; d < 2; ++d) {
        const double a = std::clamp(action(d), -1.0, 1.0);
        double v = std::clamp(state(2 + d) + a * kPmDt * 4.0, -kPmMaxSpeed, kPmMaxSpeed);
        next(2 + d) = v;
        next(d) = state(d) + v * kPmDt;
    }
    return next;
}

Eigen::VectorXd PointMassEnv::reset(Rng& rng) {
    state_.resize(4);
    state_ << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0, 0.0;
    steps_ = 0;
    return state_;
}

Transition PointMassEnv::step(const Eigen::VectorXd& action) {
    check_action(spec_, action);
    Transition t;
    t.state = state_;
    t.action = spec_.clip_action(action);
    const double pos2 = state_.head(2).squaredNorm();
    const double vel2 = state_.tail(2).squaredNorm();
    t.reward = -(pos2 + 0.1 * vel2 + 0.01 * t.action.squaredNorm());
    t.next_state = dynamics(state_, t.action);
    state_ = t.next_state;
    steps_ += 1;
    t.done = steps_ >= spec_.max_episode_steps;
    return t;
}

std::optional<RewardFn> PointMassEnv::analytic_reward() const {
    return RewardFn([](const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                       const Eigen::VectorXd&) {
        return -(s.head(2).squaredNorm() + 0.1 * s.tail(2).squaredNorm() +
                 0.01 * a.squaredNorm());
    });
}

std::unique_ptr<Env> make_env(const std::string& id) {
    if (id == "pendulum") return std::make_unique<PendulumEnv>();
    if (id == "valve") return std::make_unique<ValveEnv>();
    if (id == "pointmass") return std::make_unique<PointMassEnv>();
    throw ConfigurationError("unknown environment id: " + id);
}

} // namespace mopac
