#ifndef MOPAC_TRAINER_HPP
#define MOPAC_TRAINER_HPP

#include <functional>
#include <string>
#include <vector>

#include "mopac/checkpoint.hpp"
#include "mopac/config.hpp"
#include "mopac/metrics.hpp"

namespace mopac {

struct EvalStats {
    double mean = 0.0;
    double std = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    std::vector<double> returns;
};

struct RunResult {
    std::string out_dir;
    std::string status = "completed";
    int epochs_completed = 0;
    long env_steps = 0;
    std::vector<MetricsRow> rows;
    // Valve episodes only: max |sum of rewards - net rotation| over episodes.
    double telescoping_max_residual = 0.0;
    bool telescoping_checked = false;
    // Quota-phase rollout accounting (MoPAC).
    std::vector<long> mpr_calls_per_epoch;
    std::vector<long> mpr_transitions_per_epoch;
    std::vector<int> mpr_horizon_per_epoch;
    std::string final_checkpoint;
};

using EpochCallback = std::function<void(const MetricsRow&)>;

// Runs the configured algorithm end to end, writing config.json, metrics.csv,
// run.json and periodic checkpoints under cfg.out_dir (or $MOPAC_OUT_DIR when
// set). Any module error aborts after an emergency checkpoint.
RunResult run_experiment(const ExperimentConfig& cfg,
                         const EpochCallback& on_epoch = {});

// Deterministic evaluation of a stored checkpoint: mean-action rollouts for
// policy checkpoints, receding-horizon control for mbrl_only checkpoints.
EvalStats evaluate_checkpoint(const std::string& checkpoint_path,
                              const std::string& env_id_override, int n_episodes,
                              std::uint64_t seed);

// Evaluation helper shared with the trainer loop.
EvalStats evaluate_agent(const Checkpoint& ckpt, const std::string& env_id,
                         int n_episodes, std::uint64_t seed);

} // namespace mopac

#endif
