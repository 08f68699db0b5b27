#ifndef MOPAC_METRICS_HPP
#define MOPAC_METRICS_HPP

#include <optional>
#include <string>
#include <vector>

namespace mopac {

// One CSV row per epoch. Optional fields print as empty cells for algorithms
// that never compute them (e.g. model_val_l2 under sac_only).
struct MetricsRow {
    int epoch = 0;
    long env_steps = 0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
    std::optional<double> train_return_mean;
    std::optional<double> model_val_l2;
    std::optional<double> mpr_mean_cost;
    std::optional<double> mpr_ess;
    std::optional<double> v_loss;
    std::optional<double> q1_loss;
    std::optional<double> q2_loss;
    std::optional<double> policy_loss;
    std::optional<double> alpha;
    double wall_time_s = 0.0; // excluded from determinism comparisons

    std::string to_csv() const;
    static std::string header();
};

// Appends one row per epoch and flushes immediately, so an interrupted run
// loses at most the epoch in flight.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);
    void append(const MetricsRow& row);
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

std::vector<MetricsRow> read_metrics_csv(const std::string& path);

} // namespace mopac

#endif
