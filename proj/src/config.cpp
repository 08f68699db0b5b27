#include "mopac/config.hpp"

#include <nlohmann/json.hpp>

#include "mopac/errors.hpp"

namespace mopac {

std::string algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Mopac: return "mopac";
        case Algorithm::SacOnly: return "sac_only";
        case Algorithm::MbrlOnly: return "mbrl_only";
    }
    return "mopac";
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "mopac") return Algorithm::Mopac;
    if (name == "sac_only") return Algorithm::SacOnly;
    if (name == "mbrl_only") return Algorithm::MbrlOnly;
    throw ConfigurationError("unknown algorithm: " + name);
}

void ExperimentConfig::validate() const {
    if (total_epochs < 0) throw ConfigurationError("total_epochs must be >= 0");
    if (env_steps_per_epoch <= 0)
        throw ConfigurationError("env_steps_per_epoch must be positive");
    if (eval_episodes <= 0) throw ConfigurationError("eval_episodes must be positive");
    if (checkpoint_interval <= 0)
        throw ConfigurationError("checkpoint_interval must be positive");
    if (init_random_steps < 0)
        throw ConfigurationError("init_random_steps must be >= 0");
    if (replay.env_capacity == 0 || replay.batch_size <= 0 ||
        replay.model_retain_epochs <= 0)
        throw ConfigurationError("replay section has non-positive sizes");
    if (replay.real_ratio < 0.0 || replay.real_ratio > 1.0)
        throw ConfigurationError("real_ratio must be in [0, 1]");
    if (mpr.n_traj <= 0 || mpr.h_min < 1 || mpr.h_min > mpr.h_max ||
        mpr.rollout_batch <= 0)
        throw ConfigurationError("mpr section invalid");
    if (mpr.lambda <= 0.0 || mpr.noise_scale <= 0.0)
        throw ConfigurationError("mpr lambda and noise_scale must be positive");
    if (model.ensemble_size < 1 || model.elite_count < 1 ||
        model.elite_count > model.ensemble_size)
        throw ConfigurationError("model ensemble/elite sizes invalid");
    if (model.reward_source != "learned" && model.reward_source != "analytic")
        throw ConfigurationError("model.reward_source must be learned or analytic");
    if (model.dynamics_source != "learned" && model.dynamics_source != "analytic")
        throw ConfigurationError("model.dynamics_source must be learned or analytic");
    if (model.elite_pinning != "per_rollout" && model.elite_pinning != "per_step")
        throw ConfigurationError("model.elite_pinning must be per_rollout or per_step");
    if (sac.gradient_steps_per_env_step < 0)
        throw ConfigurationError("gradient_steps_per_env_step must be >= 0");
    if (sac.update_phase != "epoch" && sac.update_phase != "step")
        throw ConfigurationError("sac.update_phase must be epoch or step");
    if (!(sac.gamma >= 0.0 && sac.gamma < 1.0))
        throw ConfigurationError("sac.gamma must be in [0, 1)");
    if (!(sac.tau > 0.0 && sac.tau <= 1.0))
        throw ConfigurationError("sac.tau must be in (0, 1]");
    if (sac.alpha <= 0.0) throw ConfigurationError("sac.alpha must be positive");
    // mbrl_only still bootstraps MPR with the value net, so SAC sizes must be
    // usable even though the actor's learning rate is ignored.
    if (algorithm == Algorithm::MbrlOnly && sac.hidden.empty())
        throw ConfigurationError("mbrl_only needs value-net sizes in the sac section");
}

namespace {

nlohmann::json to_json_obj(const ExperimentConfig& c) {
    nlohmann::json j;
    j["env_id"] = c.env_id;
    j["algorithm"] = algorithm_name(c.algorithm);
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir;
    j["total_epochs"] = c.total_epochs;
    j["env_steps_per_epoch"] = c.env_steps_per_epoch;
    j["eval_episodes"] = c.eval_episodes;
    j["checkpoint_interval"] = c.checkpoint_interval;
    j["init_random_steps"] = c.init_random_steps;
    j["replay"] = {{"env_capacity", c.replay.env_capacity},
                   {"model_retain_epochs", c.replay.model_retain_epochs},
                   {"real_ratio", c.replay.real_ratio},
                   {"batch_size", c.replay.batch_size}};
    j["mpr"] = {{"n_traj", c.mpr.n_traj},
                {"h_min", c.mpr.h_min},
                {"h_max", c.mpr.h_max},
                {"anneal_fraction", c.mpr.anneal_fraction},
                {"lambda", c.mpr.lambda},
                {"noise_scale", c.mpr.noise_scale},
                {"rollout_batch", c.mpr.rollout_batch}};
    j["model"] = {{"ensemble_size", c.model.ensemble_size},
                  {"elite_count", c.model.elite_count},
                  {"hidden", c.model.hidden},
                  {"activation", c.model.activation},
                  {"lr", c.model.lr},
                  {"batch_size", c.model.batch_size},
                  {"train_epochs", c.model.train_epochs},
                  {"patience", c.model.patience},
                  {"holdout_fraction", c.model.holdout_fraction},
                  {"log_std_min", c.model.log_std_min},
                  {"log_std_max", c.model.log_std_max},
                  {"reward_source", c.model.reward_source},
                  {"dynamics_source", c.model.dynamics_source},
                  {"elite_pinning", c.model.elite_pinning},
                  {"min_buffer", c.model.min_buffer}};
    j["sac"] = {{"hidden", c.sac.hidden},
                {"activation", c.sac.activation},
                {"lr", c.sac.lr},
                {"gamma", c.sac.gamma},
                {"tau", c.sac.tau},
                {"alpha", c.sac.alpha},
                {"alpha_autotune", c.sac.alpha_autotune},
                {"gradient_steps_per_env_step", c.sac.gradient_steps_per_env_step},
                {"update_phase", c.sac.update_phase}};
    return j;
}

} // namespace

std::string ExperimentConfig::to_json() const { return to_json_obj(*this).dump(2); }

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ExperimentConfig c; // defaults, overridden by present keys
    c.env_id = j.value("env_id", c.env_id);
    if (j.contains("algorithm"))
        c.algorithm = algorithm_from_name(j["algorithm"].get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.total_epochs = j.value("total_epochs", c.total_epochs);
    c.env_steps_per_epoch = j.value("env_steps_per_epoch", c.env_steps_per_epoch);
    c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.init_random_steps = j.value("init_random_steps", c.init_random_steps);
    if (j.contains("replay")) {
        const auto& r = j["replay"];
        c.replay.env_capacity = r.value("env_capacity", c.replay.env_capacity);
        c.replay.model_retain_epochs =
            r.value("model_retain_epochs", c.replay.model_retain_epochs);
        c.replay.real_ratio = r.value("real_ratio", c.replay.real_ratio);
        c.replay.batch_size = r.value("batch_size", c.replay.batch_size);
    }
    if (j.contains("mpr")) {
        const auto& m = j["mpr"];
        c.mpr.n_traj = m.value("n_traj", c.mpr.n_traj);
        c.mpr.h_min = m.value("h_min", c.mpr.h_min);
        c.mpr.h_max = m.value("h_max", c.mpr.h_max);
        c.mpr.anneal_fraction = m.value("anneal_fraction", c.mpr.anneal_fraction);
        c.mpr.lambda = m.value("lambda", c.mpr.lambda);
        c.mpr.noise_scale = m.value("noise_scale", c.mpr.noise_scale);
        c.mpr.rollout_batch = m.value("rollout_batch", c.mpr.rollout_batch);
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        c.model.ensemble_size = m.value("ensemble_size", c.model.ensemble_size);
        c.model.elite_count = m.value("elite_count", c.model.elite_count);
        if (m.contains("hidden")) c.model.hidden = m["hidden"].get<std::vector<int>>();
        c.model.activation = m.value("activation", c.model.activation);
        c.model.lr = m.value("lr", c.model.lr);
        c.model.batch_size = m.value("batch_size", c.model.batch_size);
        c.model.train_epochs = m.value("train_epochs", c.model.train_epochs);
        c.model.patience = m.value("patience", c.model.patience);
        c.model.holdout_fraction = m.value("holdout_fraction", c.model.holdout_fraction);
        c.model.log_std_min = m.value("log_std_min", c.model.log_std_min);
        c.model.log_std_max = m.value("log_std_max", c.model.log_std_max);
        c.model.reward_source = m.value("reward_source", c.model.reward_source);
        c.model.dynamics_source = m.value("dynamics_source", c.model.dynamics_source);
        c.model.elite_pinning = m.value("elite_pinning", c.model.elite_pinning);
        c.model.min_buffer = m.value("min_buffer", c.model.min_buffer);
    }
    if (j.contains("sac")) {
        const auto& s = j["sac"];
        if (s.contains("hidden")) c.sac.hidden = s["hidden"].get<std::vector<int>>();
        c.sac.activation = s.value("activation", c.sac.activation);
        c.sac.lr = s.value("lr", c.sac.lr);
        c.sac.gamma = s.value("gamma", c.sac.gamma);
        c.sac.tau = s.value("tau", c.sac.tau);
        c.sac.alpha = s.value("alpha", c.sac.alpha);
        c.sac.alpha_autotune = s.value("alpha_autotune", c.sac.alpha_autotune);
        c.sac.gradient_steps_per_env_step =
            s.value("gradient_steps_per_env_step", c.sac.gradient_steps_per_env_step);
        c.sac.update_phase = s.value("update_phase", c.sac.update_phase);
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    ExperimentConfig c;
    if (name == "default" || name == "pendulum") {
        return c;
    }
    if (name == "pendulum_bench") {
        // Desk-scale budget used by the learning-curve comparison: fewer
        // gradient steps and a smaller rollout quota keep a 30-epoch run in
        // the minutes range on a laptop core.
        c.total_epochs = 30;
        c.sac.gradient_steps_per_env_step = 2;
        c.sac.update_phase = "epoch";
        c.mpr.rollout_batch = 5000;
        c.mpr.n_traj = 24;
        c.mpr.lambda = 10.0;
        c.model.train_epochs = 10;
        return c;
    }
    if (name == "valve_robotic") {
        // Robotic protocol: 50-step episodes, 5 episodes per epoch, short
        // annealed horizons.
        c.env_id = "valve";
        c.total_epochs = 40;
        c.env_steps_per_epoch = 250;
        c.init_random_steps = 250;
        c.eval_episodes = 5;
        c.mpr.h_min = 2;
        c.mpr.h_max = 5;
        c.mpr.rollout_batch = 2500;
        c.mpr.n_traj = 24;
        c.mpr.lambda = 10.0;
        c.sac.gradient_steps_per_env_step = 4;
        c.model.train_epochs = 10;
        return c;
    }
    throw ConfigurationError("unknown preset: " + name);
}

EnsembleConfig ExperimentConfig::ensemble_config() const {
    EnsembleConfig e;
    e.ensemble_size = model.ensemble_size;
    e.elite_count = model.elite_count;
    e.hidden = model.hidden;
    e.activation = activation_from_name(model.activation);
    e.lr = model.lr;
    e.batch_size = model.batch_size;
    e.min_buffer = static_cast<std::size_t>(model.min_buffer);
    e.holdout_fraction = model.holdout_fraction;
    e.patience = model.patience;
    e.log_std_min = model.log_std_min;
    e.log_std_max = model.log_std_max;
    e.learned_reward = model.reward_source == "learned";
    e.pin_per_step = model.elite_pinning == "per_step";
    return e;
}

SacConfig ExperimentConfig::sac_config() const {
    SacConfig s;
    s.hidden = sac.hidden;
    s.activation = activation_from_name(sac.activation);
    s.lr = sac.lr;
    s.gamma = sac.gamma;
    s.tau = sac.tau;
    s.alpha = sac.alpha;
    s.alpha_autotune = sac.alpha_autotune;
    return s;
}

MprConfig ExperimentConfig::mpr_config(const EnvSpec& spec) const {
    MprConfig m;
    m.n_traj = mpr.n_traj;
    m.h_min = mpr.h_min;
    m.h_max = mpr.h_max;
    m.anneal_fraction = mpr.anneal_fraction;
    m.lambda = mpr.lambda;
    m.noise_std = mpr.noise_scale * spec.action_half_range();
    m.gamma = sac.gamma;
    return m;
}

} // namespace mopac
