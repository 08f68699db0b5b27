#ifndef MOPAC_CONFIG_HPP
#define MOPAC_CONFIG_HPP

#include <string>
#include <vector>

#include "mopac/model.hpp"
#include "mopac/sac.hpp"

namespace mopac {

enum class Algorithm { Mopac, SacOnly, MbrlOnly };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct ReplaySection {
    std::size_t env_capacity = 1000000;
    int model_retain_epochs = 1; // D_model capacity = retain * rollout_batch
    double real_ratio = 0.05;
    int batch_size = 128;
};

struct MprSection {
    int n_traj = 32;
    int h_min = 5;
    int h_max = 15;
    double anneal_fraction = 1.0;
    double lambda = 1.0;
    double noise_scale = 0.3; // sigma = noise_scale * action half-range
    int rollout_batch = 10000; // model transitions added per epoch
};

struct ModelSection {
    int ensemble_size = 7;
    int elite_count = 5;
    std::vector<int> hidden = {32, 32};
    std::string activation = "relu";
    double lr = 3e-4;
    int batch_size = 256;
    int train_epochs = 12;
    int patience = 5;
    double holdout_fraction = 0.2;
    double log_std_min = -20.0;
    double log_std_max = 2.0;
    std::string reward_source = "learned"; // learned | analytic
    std::string dynamics_source = "learned"; // learned | analytic (perfect model)
    std::string elite_pinning = "per_rollout"; // per_rollout | per_step
    int min_buffer = 250;
};

struct SacSection {
    std::vector<int> hidden = {64, 64};
    std::string activation = "relu";
    double lr = 3e-4;
    double gamma = 0.99;
    double tau = 0.005;
    double alpha = 0.2;
    bool alpha_autotune = false;
    int gradient_steps_per_env_step = 20;
    std::string update_phase = "epoch"; // epoch | step
};

struct ExperimentConfig {
    std::string env_id = "pendulum";
    Algorithm algorithm = Algorithm::Mopac;
    std::uint64_t seed = 0;
    std::string out_dir = "runs/run";
    int total_epochs = 30;
    int env_steps_per_epoch = 1000;
    int eval_episodes = 5;
    int checkpoint_interval = 10;
    int init_random_steps = 1000;
    ReplaySection replay;
    MprSection mpr;
    ModelSection model;
    SacSection sac;

    void validate() const;
    std::string to_json() const; // full dump, every field present
    static ExperimentConfig from_json(const std::string& text); // merge over defaults
    static ExperimentConfig preset(const std::string& name);

    EnsembleConfig ensemble_config() const;
    SacConfig sac_config() const;
    MprConfig mpr_config(const EnvSpec& spec) const;
};

} // namespace mopac

#endif
