// Command-line front end: train / evaluate / bounds sweep.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mopac/bounds.hpp"
#include "mopac/trainer.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int fail(const std::string& stage, const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    err["stage"] = stage;
    std::cerr << err.dump() << std::endl;
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model predictive actor-critic trainer and bound verifier"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "Run a training experiment");
    std::string config_path, preset = "default", out_dir;
    std::int64_t seed = -1;
    train->add_option("--config", config_path, "JSON config file");
    train->add_option("--preset", preset,
                      "Built-in preset (default, pendulum_bench, valve_robotic)");
    train->add_option("--seed", seed, "Master seed override");
    train->add_option("--out", out_dir, "Output directory override");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint");
    std::string ckpt_path, eval_env;
    int episodes = 5;
    std::uint64_t eval_seed = 0;
    eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    eval->add_option("--episodes", episodes, "Number of evaluation episodes");
    eval->add_option("--env", eval_env, "Environment id override");
    eval->add_option("--seed", eval_seed, "Evaluation seed");

    // bounds
    auto* bounds = app.add_subcommand("bounds", "Performance-bound verification");
    auto* sweep = bounds->add_subcommand("sweep", "Run a scenario sweep");
    std::string scenarios_path, report_path = "report.csv";
    sweep->add_option("--scenarios", scenarios_path, "Scenario JSON file")->required();
    sweep->add_option("--out", report_path, "Report CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            mopac::ExperimentConfig cfg = mopac::ExperimentConfig::preset(preset);
            if (!config_path.empty())
                cfg = mopac::ExperimentConfig::from_json(slurp(config_path));
            if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            mopac::RunResult res = mopac::run_experiment(
                cfg, [](const mopac::MetricsRow& row) {
                    std::printf("epoch %3d  steps %7ld  eval %9.2f +- %.2f\n", row.epoch,
                                row.env_steps, row.eval_return_mean,
                                row.eval_return_std);
                    std::fflush(stdout);
                });
            std::printf("run complete: %s (%d epochs, %ld env steps)\n",
                        res.out_dir.c_str(), res.epochs_completed, res.env_steps);
            return 0;
        }
        if (eval->parsed()) {
            mopac::EvalStats stats =
                mopac::evaluate_checkpoint(ckpt_path, eval_env, episodes, eval_seed);
            nlohmann::json j;
            j["mean"] = stats.mean;
            j["std"] = stats.std;
            j["ci95"] = {stats.ci95_low, stats.ci95_high};
            j["returns"] = stats.returns;
            std::cout << j.dump(2) << std::endl;
            return 0;
        }
        if (sweep->parsed()) {
            auto rows = mopac::run_sweep_from_json(slurp(scenarios_path));
            mopac::write_sweep_csv(report_path, rows);
            int satisfied = 0;
            for (const auto& r : rows) satisfied += r.report.satisfied ? 1 : 0;
            std::printf("sweep: %d/%zu scenarios satisfied; report at %s\n", satisfied,
                        rows.size(), report_path.c_str());
            return satisfied == static_cast<int>(rows.size()) ? 0 : 2;
        }
    } catch (const std::exception& e) {
        return fail(app.get_subcommands().front()->get_name(), e);
    }
    return 0;
}
