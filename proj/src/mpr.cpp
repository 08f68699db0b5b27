#include "mopac/mpr.hpp"

#include <cmath>

#include "mopac/errors.hpp"

namespace mopac {

void MprConfig::validate() const {
    if (n_traj < 1) throw ContractViolation("MprConfig: n_traj must be >= 1");
    if (!(h_min >= 1 && h_min <= h_max))
        throw ContractViolation("MprConfig: need 1 <= h_min <= h_max");
    if (!(lambda > 0.0)) throw ContractViolation("MprConfig: lambda must be > 0");
    if (noise_std.size() == 0 || noise_std.minCoeff() <= 0.0)
        throw ContractViolation("MprConfig: noise_std must be positive elementwise");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw ContractViolation("MprConfig: gamma must be in [0, 1)");
}

int anneal_horizon(int epoch, int total_epochs, const MprConfig& cfg) {
    if (epoch < 0 || epoch > total_epochs)
        throw ContractViolation("anneal_horizon: epoch out of range");
    const double ramp = cfg.anneal_fraction * static_cast<double>(total_epochs);
    double progress = 1.0;
    if (ramp > 0.0)
        progress = std::min(1.0, static_cast<double>(epoch) / ramp);
    return cfg.h_min +
           static_cast<int>(std::llround((cfg.h_max - cfg.h_min) * progress));
}

RolloutBatch simulate_batch(const Eigen::VectorXd& start_state,
                            const DynamicsModel& model, int pinned_sampler,
                            const ActionSampler& policy, const ValueEstimator& value,
                            int horizon, const MprConfig& cfg, Rng& rng) {
    cfg.validate();
    if (horizon < 1) throw ContractViolation("simulate_batch: horizon must be >= 1");
    const int adim = model.action_dim();
    const int sdim = model.state_dim();
    if (start_state.size() != sdim)
        throw ContractViolation("simulate_batch: start state dim mismatch");

    RolloutBatch batch;
    batch.start_state = start_state;
    batch.pinned_sampler = pinned_sampler;
    batch.base_actions.resize(horizon, adim);

    // Nominal trajectory: policy mean through the model's mean dynamics.
    {
        Eigen::MatrixXd s = start_state.transpose();
        Eigen::MatrixXd sp;
        Eigen::VectorXd r;
        for (int t = 0; t < horizon; ++t) {
            batch.base_actions.row(t) = policy.mean_action(s.row(0).transpose()).transpose();
            model.mean_step_batch(pinned_sampler, s, batch.base_actions.row(t), sp, r);
            s = sp;
        }
    }

    batch.noise.resize(horizon);
    for (int t = 0; t < horizon; ++t) {
        batch.noise[t].resize(cfg.n_traj, adim);
        for (int i = 0; i < cfg.n_traj; ++i)
            for (int d = 0; d < adim; ++d)
                batch.noise[t](i, d) = rng.normal(0.0, cfg.noise_std(d));
    }

    Eigen::MatrixXd states = start_state.transpose().replicate(cfg.n_traj, 1);
    Eigen::VectorXd returns = Eigen::VectorXd::Zero(cfg.n_traj);
    double discount = 1.0;
    Eigen::MatrixXd next;
    Eigen::VectorXd rewards;
    for (int t = 0; t < horizon; ++t) {
        Eigen::MatrixXd actions =
            batch.noise[t].rowwise() + batch.base_actions.row(t);
        model.step_batch(pinned_sampler, states, actions, rng, next, rewards);
        if (!next.allFinite() || !rewards.allFinite())
            throw RolloutAborted("simulate_batch: non-finite model prediction at step " +
                                 std::to_string(t));
        returns += discount * rewards;
        discount *= cfg.gamma;
        states = next;
    }
    returns += discount * value.values(states); // discount == gamma^H here
    if (!returns.allFinite())
        throw RolloutAborted("simulate_batch: non-finite terminal value");
    batch.costs = -returns;
    return batch;
}

Eigen::VectorXd importance_weights(const Eigen::VectorXd& costs, double lambda) {
    if (costs.size() == 0)
        throw ContractViolation("importance_weights: empty cost vector");
    if (!(lambda > 0.0))
        throw ContractViolation("importance_weights: lambda must be > 0");
    if (!costs.allFinite())
        throw ContractViolation("importance_weights: non-finite costs");
    const double beta = costs.minCoeff();
    Eigen::VectorXd w = (-(costs.array() - beta) / lambda).exp();
    return w / w.sum();
}

Eigen::MatrixXd optimal_action_sequence(const RolloutBatch& batch, const EnvSpec& spec) {
    if (batch.weights.size() != batch.n_traj())
        throw ContractViolation("optimal_action_sequence: weights not computed");
    const int horizon = batch.horizon();
    Eigen::MatrixXd actions(horizon, batch.base_actions.cols());
    for (int t = 0; t < horizon; ++t) {
        Eigen::RowVectorXd shifted =
            batch.base_actions.row(t) + batch.weights.transpose() * batch.noise[t];
        actions.row(t) = shifted.cwiseMax(spec.action_low.transpose())
                             .cwiseMin(spec.action_high.transpose());
    }
    return actions;
}

std::vector<Transition> mpr_transitions(const Eigen::VectorXd& start_state,
                                        const DynamicsModel& model,
                                        const ActionSampler& policy,
                                        const ValueEstimator& value,
                                        const EnvSpec& spec, int horizon,
                                        const MprConfig& cfg, Rng& rng,
                                        MprDiagnostics* diag,
                                        Eigen::VectorXd* final_state) {
    const int pin = model.num_samplers() > 1
                        ? static_cast<int>(rng.index(model.num_samplers()))
                        : 0;
    RolloutBatch batch =
        simulate_batch(start_state, model, pin, policy, value, horizon, cfg, rng);
    batch.weights = importance_weights(batch.costs, cfg.lambda);
    Eigen::MatrixXd actions = optimal_action_sequence(batch, spec);

    if (diag) {
        diag->min_cost = batch.costs.minCoeff();
        diag->mean_cost = batch.costs.mean();
        diag->effective_sample_size = 1.0 / batch.weights.squaredNorm();
    }

    // Replay the adjusted sequence through the same pinned sampler.
    std::vector<Transition> out;
    out.reserve(horizon);
    Eigen::MatrixXd s = start_state.transpose();
    Eigen::MatrixXd sp;
    Eigen::VectorXd r;
    for (int t = 0; t < horizon; ++t) {
        model.step_batch(pin, s, actions.row(t), rng, sp, r);
        if (!sp.allFinite() || !r.allFinite())
            throw RolloutAborted("mpr_transitions: non-finite replay step");
        Transition tr;
        tr.state = s.row(0).transpose();
        tr.action = actions.row(t).transpose();
        tr.reward = r(0);
        tr.next_state = sp.row(0).transpose();
        tr.done = false;
        out.push_back(std::move(tr));
        s = sp;
    }
    if (final_state) *final_state = s.row(0).transpose();
    return out;
}

} // namespace mopac
