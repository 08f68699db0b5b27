#include "mopac/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "mopac/bounds.hpp"
#include "mopac/errors.hpp"
#include "mopac/mpr.hpp"
#include "mopac/replay.hpp"

namespace mopac {

namespace {

namespace fs = std::filesystem;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Eigen::VectorXd random_action(const EnvSpec& spec, Rng& rng) {
    Eigen::VectorXd a(spec.action_dim);
    for (int d = 0; d < spec.action_dim; ++d)
        a(d) = rng.uniform(spec.action_low(d), spec.action_high(d));
    return a;
}

struct EvalAccumulator {
    double mean = 0.0;
    double stddev = 0.0;
    void finish(const std::vector<double>& returns) {
        const double n = static_cast<double>(returns.size());
        double sum = 0.0;
        for (double r : returns) sum += r;
        mean = sum / n;
        double sq = 0.0;
        for (double r : returns) sq += (r - mean) * (r - mean);
        stddev = std::sqrt(sq / n);
    }
};

// Receding-horizon controller used by the mbrl_only baseline: one MPR call
// per step, execute the first optimized action.
Eigen::VectorXd mpc_action(const Eigen::VectorXd& state, const DynamicsModel& model,
                           const ActionSampler& prior, const ValueEstimator& value,
                           const EnvSpec& spec, int horizon, const MprConfig& cfg,
                           Rng& rng) {
    MprDiagnostics diag;
    auto transitions =
        mpr_transitions(state, model, prior, value, spec, horizon, cfg, rng, &diag);
    return transitions.front().action;
}

struct Trainer {
    ExperimentConfig cfg;
    Rng root;
    std::unique_ptr<Env> env;
    std::unique_ptr<Env> eval_env;
    EnvSpec spec;
    ActorCritic ac;
    SacConfig sac_cfg;
    std::unique_ptr<EnsembleModel> model;
    std::unique_ptr<AnalyticDynamics> analytic_dyn;
    MprConfig mpr_cfg;
    std::unique_ptr<ReplayBuffer> env_buffer;
    std::unique_ptr<ReplayBuffer> model_buffer;

    Rng explore_rng, policy_rng, model_rng, mpr_rng, batch_rng, act_mpc_rng;

    const DynamicsModel* rollout_model() const {
        if (analytic_dyn) return analytic_dyn.get();
        return model.get();
    }

    Eigen::VectorXd state;
    long env_steps = 0;
    double episode_return = 0.0;
    double episode_start_theta = 0.0;
    bool have_model = false;
    int current_horizon = 1;

    RunResult result;

    explicit Trainer(const ExperimentConfig& c)
        : cfg(c), root(Rng::from_master(c.seed)) {
        cfg.validate();
        if (const char* override_dir = std::getenv("MOPAC_OUT_DIR");
            override_dir && *override_dir)
            cfg.out_dir = override_dir;
        env = make_env(cfg.env_id);
        eval_env = make_env(cfg.env_id);
        spec = env->spec();
        sac_cfg = cfg.sac_config();
        Rng init_rng = root.derive("init");
        ac = make_actor_critic(spec.state_dim, spec.action_dim, spec.action_low,
                               spec.action_high, sac_cfg, init_rng);
        if (cfg.algorithm != Algorithm::SacOnly) {
            if (cfg.model.dynamics_source == "analytic") {
                analytic_dyn = std::make_unique<AnalyticDynamics>(*env);
                have_model = true;
            } else {
                Rng model_init = root.derive("model_init");
                model = std::make_unique<EnsembleModel>(
                    spec.state_dim, spec.action_dim, cfg.ensemble_config(), model_init);
                if (!cfg.ensemble_config().learned_reward) {
                    auto fn = env->analytic_reward();
                    if (!fn)
                        throw ConfigurationError("analytic reward requested but env " +
                                                 cfg.env_id + " exposes none");
                    model->set_analytic_reward(*fn);
                }
            }
        }
        mpr_cfg = cfg.mpr_config(spec);
        env_buffer = std::make_unique<ReplayBuffer>(cfg.replay.env_capacity,
                                                    spec.state_dim, spec.action_dim);
        const std::size_t model_cap = static_cast<std::size_t>(
            std::max(1, cfg.replay.model_retain_epochs * cfg.mpr.rollout_batch +
                            cfg.mpr.h_max));
        model_buffer =
            std::make_unique<ReplayBuffer>(model_cap, spec.state_dim, spec.action_dim);

        explore_rng = root.derive("explore");
        policy_rng = root.derive("policy");
        model_rng = root.derive("model_train");
        mpr_rng = root.derive("mpr");
        batch_rng = root.derive("batch");
        act_mpc_rng = root.derive("act_mpc");

        result.out_dir = cfg.out_dir;
        result.mpr_calls_per_epoch.assign(cfg.total_epochs, 0);
        result.mpr_transitions_per_epoch.assign(cfg.total_epochs, 0);
        result.mpr_horizon_per_epoch.assign(cfg.total_epochs, 0);
        result.telescoping_checked = cfg.env_id == "valve";
    }

    Checkpoint snapshot(int epoch) const {
        Checkpoint ckpt;
        ckpt.env_id = cfg.env_id;
        ckpt.algorithm = cfg.algorithm;
        ckpt.epoch = epoch;
        ckpt.env_steps = env_steps;
        ckpt.agent = ac;
        if (model && model->trained()) ckpt.model = *model;
        ckpt.mpr = cfg.mpr;
        ckpt.gamma = sac_cfg.gamma;
        return ckpt;
    }

    void write_manifest(const std::string& status, double wall_s) const {
        nlohmann::json j;
        j["algorithm"] = algorithm_name(cfg.algorithm);
        j["env_id"] = cfg.env_id;
        j["seed"] = cfg.seed;
        j["epochs_completed"] = result.epochs_completed;
        j["env_steps"] = env_steps;
        j["status"] = status;
        j["config_path"] = "config.json";
        j["metrics_path"] = "metrics.csv";
        j["final_checkpoint"] = result.final_checkpoint;
        j["wall_time_s"] = wall_s;
        if (result.telescoping_checked)
            j["telescoping_max_residual"] = result.telescoping_max_residual;
        j["mpr_calls_per_epoch"] = result.mpr_calls_per_epoch;
        j["mpr_transitions_per_epoch"] = result.mpr_transitions_per_epoch;
        j["mpr_horizon_per_epoch"] = result.mpr_horizon_per_epoch;
        std::ofstream out(fs::path(cfg.out_dir) / "run.json");
        out << j.dump(2) << '\n';
    }

    Eigen::VectorXd choose_action() {
        if (env_steps < cfg.init_random_steps) return random_action(spec, explore_rng);
        switch (cfg.algorithm) {
            case Algorithm::Mopac:
            case Algorithm::SacOnly:
                return sample_action(ac, state, policy_rng).action;
            case Algorithm::MbrlOnly: {
                if (!have_model) return random_action(spec, explore_rng);
                FixedPriorSampler prior(spec);
                TargetValueEstimator value(ac);
                auto transitions =
                    mpr_transitions(state, *rollout_model(), prior, value, spec,
                                    current_horizon, mpr_cfg, act_mpc_rng);
                // Acting rollouts double as D_model data for the value update.
                for (const auto& t : transitions) model_buffer->push(t);
                return transitions.front().action;
            }
        }
        return random_action(spec, explore_rng);
    }

    void gradient_updates(int n, std::vector<SacLossReport>& reports,
                          std::vector<double>& v_losses) {
        MixedSampler sampler;
        sampler.env_buffer = env_buffer.get();
        sampler.model_buffer = model_buffer.get();
        sampler.real_ratio = cfg.replay.real_ratio;
        const std::size_t batch_size = static_cast<std::size_t>(cfg.replay.batch_size);
        for (int i = 0; i < n; ++i) {
            switch (cfg.algorithm) {
                case Algorithm::SacOnly: {
                    if (env_buffer->size() < batch_size) return;
                    auto batch = env_buffer->sample(batch_size, batch_rng);
                    reports.push_back(sac_update(ac, batch, sac_cfg, batch_rng));
                    break;
                }
                case Algorithm::Mopac: {
                    if (env_buffer->empty() && model_buffer->empty()) return;
                    if (env_buffer->size() + model_buffer->size() < batch_size) return;
                    auto batch = sampler.sample(batch_size, batch_rng);
                    reports.push_back(sac_update(ac, batch, sac_cfg, batch_rng));
                    break;
                }
                case Algorithm::MbrlOnly: {
                    if (env_buffer->empty() && model_buffer->empty()) return;
                    if (env_buffer->size() + model_buffer->size() < batch_size) return;
                    auto batch = sampler.sample(batch_size, batch_rng);
                    v_losses.push_back(value_td_update(ac, batch, sac_cfg));
                    break;
                }
            }
        }
    }

    EvalStats run_eval(int epoch) {
        Checkpoint ckpt = snapshot(epoch);
        Rng eval_rng = root.derive("eval", static_cast<std::uint64_t>(epoch));
        return evaluate_with(ckpt, *eval_env, cfg.eval_episodes, eval_rng,
                             current_horizon);
    }

    static EvalStats evaluate_with(const Checkpoint& ckpt, Env& env, int n_episodes,
                                   Rng& rng, int horizon) {
        EvalStats stats;
        const EnvSpec& spec = env.spec();
        MprConfig mpr_cfg;
        std::unique_ptr<FixedPriorSampler> prior;
        std::unique_ptr<TargetValueEstimator> value;
        const bool receding = ckpt.algorithm == Algorithm::MbrlOnly && ckpt.model;
        if (receding) {
            mpr_cfg.n_traj = ckpt.mpr.n_traj;
            mpr_cfg.h_min = ckpt.mpr.h_min;
            mpr_cfg.h_max = ckpt.mpr.h_max;
            mpr_cfg.anneal_fraction = ckpt.mpr.anneal_fraction;
            mpr_cfg.lambda = ckpt.mpr.lambda;
            mpr_cfg.noise_std = ckpt.mpr.noise_scale * spec.action_half_range();
            mpr_cfg.gamma = ckpt.gamma;
            prior = std::make_unique<FixedPriorSampler>(spec);
            value = std::make_unique<TargetValueEstimator>(ckpt.agent);
        }
        for (int ep = 0; ep < n_episodes; ++ep) {
            Eigen::VectorXd s = env.reset(rng);
            double ret = 0.0;
            while (true) {
                Eigen::VectorXd a;
                if (receding)
                    a = mpc_action(s, *ckpt.model, *prior, *value, spec, horizon,
                                   mpr_cfg, rng);
                else
                    a = mean_action(ckpt.agent, s);
                Transition t = env.step(a);
                ret += t.reward;
                s = t.next_state;
                if (t.done) break;
            }
            stats.returns.push_back(ret);
        }
        EvalAccumulator acc;
        acc.finish(stats.returns);
        stats.mean = acc.mean;
        stats.std = acc.stddev;
        const double sem =
            acc.stddev / std::sqrt(static_cast<double>(stats.returns.size()));
        stats.ci95_low = acc.mean - 1.96 * sem;
        stats.ci95_high = acc.mean + 1.96 * sem;
        return stats;
    }

    RunResult run(const EpochCallback& on_epoch) {
        const double t_start = now_seconds();
        fs::create_directories(cfg.out_dir);
        {
            std::ofstream out(fs::path(cfg.out_dir) / "config.json");
            out << cfg.to_json() << '\n';
        }
        MetricsWriter metrics((fs::path(cfg.out_dir) / "metrics.csv").string());

        state = env->reset(explore_rng);
        if (cfg.env_id == "valve") episode_start_theta = state(0);
        episode_return = 0.0;
        current_horizon =
            cfg.algorithm == Algorithm::SacOnly
                ? mpr_cfg.h_min
                : anneal_horizon(0, std::max(1, cfg.total_epochs), mpr_cfg);

        const std::string ckpt_name = "checkpoint_final.bin";
        try {
            for (int epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
                const double t_epoch = now_seconds();
                current_horizon = anneal_horizon(epoch - 1,
                                                 std::max(1, cfg.total_epochs), mpr_cfg);
                std::vector<double> episode_returns;
                std::vector<SacLossReport> reports;
                std::vector<double> v_losses;

                // ---- environment interaction
                for (int step = 0; step < cfg.env_steps_per_epoch; ++step) {
                    Eigen::VectorXd a = choose_action();
                    Transition t = env->step(a);
                    ++env_steps;
                    episode_return += t.reward;
                    Transition stored = t;
                    // All in-house tasks end only at the time limit, which is a
                    // truncation, not a terminal state: keep bootstrapping.
                    if (t.done) stored.done = false;
                    env_buffer->push(stored);
                    state = t.next_state;
                    if (t.done) {
                        episode_returns.push_back(episode_return);
                        if (cfg.env_id == "valve") {
                            const double residual = std::abs(
                                episode_return - (state(0) - episode_start_theta));
                            result.telescoping_max_residual =
                                std::max(result.telescoping_max_residual, residual);
                        }
                        state = env->reset(explore_rng);
                        if (cfg.env_id == "valve") episode_start_theta = state(0);
                        episode_return = 0.0;
                    }
                    if (cfg.sac.update_phase == "step" &&
                        env_steps >= cfg.init_random_steps)
                        gradient_updates(cfg.sac.gradient_steps_per_env_step, reports,
                                         v_losses);
                }

                // ---- model learning
                std::optional<double> val_l2;
                if (model && env_buffer->size() >= cfg.ensemble_config().min_buffer) {
                    auto report =
                        model->train(*env_buffer, cfg.model.train_epochs, model_rng);
                    val_l2 = report.elite_val_l2;
                    have_model = true;
                }

                // ---- model predictive rollouts (quota phase)
                std::optional<double> mpr_cost;
                std::optional<double> mpr_ess;
                if (cfg.algorithm == Algorithm::Mopac && have_model) {
                    PolicyMeanSampler policy_sampler(ac);
                    TargetValueEstimator value(ac);
                    const int horizon = current_horizon;
                    const long calls = (cfg.mpr.rollout_batch + horizon - 1) / horizon;
                    double cost_sum = 0.0, ess_sum = 0.0;
                    for (long m = 0; m < calls; ++m) {
                        const Eigen::VectorXd s0 =
                            env_buffer->sample_one(mpr_rng).state;
                        MprDiagnostics diag;
                        auto transitions =
                            mpr_transitions(s0, *rollout_model(), policy_sampler, value,
                                            spec, horizon, mpr_cfg, mpr_rng, &diag);
                        for (const auto& t : transitions) model_buffer->push(t);
                        cost_sum += diag.mean_cost;
                        ess_sum += diag.effective_sample_size;
                    }
                    result.mpr_calls_per_epoch[epoch - 1] = calls;
                    result.mpr_transitions_per_epoch[epoch - 1] = calls * horizon;
                    result.mpr_horizon_per_epoch[epoch - 1] = horizon;
                    if (calls > 0) {
                        mpr_cost = cost_sum / static_cast<double>(calls);
                        mpr_ess = ess_sum / static_cast<double>(calls);
                    }
                }

                // ---- gradient steps
                if (cfg.sac.update_phase == "epoch" &&
                    env_steps >= cfg.init_random_steps)
                    gradient_updates(cfg.sac.gradient_steps_per_env_step *
                                         cfg.env_steps_per_epoch,
                                     reports, v_losses);

                // ---- evaluation and metrics
                EvalStats eval = run_eval(epoch);
                MetricsRow row;
                row.epoch = epoch;
                row.env_steps = env_steps;
                row.eval_return_mean = eval.mean;
                row.eval_return_std = eval.std;
                if (!episode_returns.empty()) {
                    double s = 0.0;
                    for (double r : episode_returns) s += r;
                    row.train_return_mean = s / static_cast<double>(episode_returns.size());
                }
                row.model_val_l2 = val_l2;
                row.mpr_mean_cost = mpr_cost;
                row.mpr_ess = mpr_ess;
                if (!reports.empty()) {
                    double v = 0, q1 = 0, q2 = 0, p = 0;
                    for (const auto& r : reports) {
                        v += r.v_loss;
                        q1 += r.q1_loss;
                        q2 += r.q2_loss;
                        p += r.policy_loss;
                    }
                    const double n = static_cast<double>(reports.size());
                    row.v_loss = v / n;
                    row.q1_loss = q1 / n;
                    row.q2_loss = q2 / n;
                    row.policy_loss = p / n;
                    row.alpha = ac.alpha();
                }
                if (!v_losses.empty()) {
                    double v = 0;
                    for (double x : v_losses) v += x;
                    row.v_loss = v / static_cast<double>(v_losses.size());
                }
                row.wall_time_s = now_seconds() - t_epoch;
                metrics.append(row);
                result.rows.push_back(row);
                result.epochs_completed = epoch;
                if (on_epoch) on_epoch(row);

                if (epoch % cfg.checkpoint_interval == 0 || epoch == cfg.total_epochs) {
                    const std::string name =
                        "checkpoint_epoch" + std::to_string(epoch) + ".bin";
                    save_checkpoint((fs::path(cfg.out_dir) / name).string(),
                                    snapshot(epoch));
                    result.final_checkpoint = name;
                }
            }
            // Always leave a loadable final state, even for 0-epoch runs.
            save_checkpoint((fs::path(cfg.out_dir) / ckpt_name).string(),
                            snapshot(cfg.total_epochs));
            result.final_checkpoint = ckpt_name;
            result.env_steps = env_steps;
            result.status = "completed";
            write_manifest("completed", now_seconds() - t_start);
        } catch (const std::exception& e) {
            // Salvage the last-good state before propagating.
            save_checkpoint((fs::path(cfg.out_dir) / "checkpoint_abort.bin").string(),
                            snapshot(result.epochs_completed));
            result.final_checkpoint = "checkpoint_abort.bin";
            result.env_steps = env_steps;
            result.status = std::string("aborted: ") + e.what();
            write_manifest(result.status, now_seconds() - t_start);
            throw;
        }
        return result;
    }
};

} // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const EpochCallback& on_epoch) {
    Trainer trainer(cfg);
    return trainer.run(on_epoch);
}

EvalStats evaluate_agent(const Checkpoint& ckpt, const std::string& env_id,
                         int n_episodes, std::uint64_t seed) {
    if (n_episodes <= 0)
        throw ContractViolation("evaluate_agent: n_episodes must be positive");
    auto env = make_env(env_id);
    if (env->spec().state_dim != ckpt.agent.state_dim() ||
        env->spec().action_dim != ckpt.agent.action_dim())
        throw ContractViolation("evaluate_agent: checkpoint dims do not match env " +
                                env_id);
    Rng rng = Rng::from_master(seed).derive("evaluate");
    return Trainer::evaluate_with(ckpt, *env, n_episodes, rng, ckpt.mpr.h_max);
}

EvalStats evaluate_checkpoint(const std::string& checkpoint_path,
                              const std::string& env_id_override, int n_episodes,
                              std::uint64_t seed) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const std::string env_id =
        env_id_override.empty() ? ckpt.env_id : env_id_override;
    return evaluate_agent(ckpt, env_id, n_episodes, seed);
}

} // namespace mopac
