#ifndef MOPAC_BOUNDS_HPP
#define MOPAC_BOUNDS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mopac/rng.hpp"
#include "mopac/tabular.hpp"

namespace mopac {

// A small MDP plus injected model and value errors for bound checking.
// epsilon_f is interpreted as max per-row total-variation distance of the
// transition kernel; epsilon_v as the sup-norm value perturbation.
struct BoundScenario {
    TabularMDP mdp;
    double epsilon_f = 0.0;
    double epsilon_v = 0.0;
    int horizon = 1;
    double epsilon_pi = 0.0;
    std::uint64_t seed = 0;
};

// Mixes every transition row with a random distribution so the per-row TV
// distance stays <= epsilon_f. Reports the measured maximum if asked.
TabularMDP perturb_model(const TabularMDP& mdp, double epsilon_f, Rng& rng,
                         double* measured_max_tv = nullptr);

// Max over (s, a) of TV(P_a(s,.), Q_a(s,.)) = 0.5 * L1 row distance.
double max_row_tv(const TabularMDP& a, const TabularMDP& b);

struct MpcPolicyValue {
    std::vector<int> first_actions;    // receding-horizon policy
    Eigen::VectorXd true_values;       // exact value of that policy on mdp_true
    double j = 0.0;                    // mean under uniform start distribution
};

// Exact H-step lookahead under mdp_model with terminal v_hat (backward
// induction), then exact evaluation of the induced stationary policy on
// mdp_true via a linear solve. No sampling anywhere.
MpcPolicyValue mpc_policy_value(const TabularMDP& mdp_true, const TabularMDP& mdp_model,
                                const Eigen::VectorXd& v_hat, int horizon);

struct Theorem1Report {
    double j_opt = 0.0;
    double j_mpc = 0.0;
    double gap = 0.0;
    double bound_eq2 = 0.0;
    double bound_eq3 = 0.0;
    double measured_eps_f = 0.0;
    double measured_eps_v = 0.0;
    bool satisfied = false;
};

// Closed-form of the finite-horizon performance bound:
// 2 gamma^H eps_v / (1 - gamma^H) + r_max (1 - gamma^H) / (1 - gamma) * eps_f.
double theorem1_bound(double gamma, int horizon, double eps_v, double eps_f,
                      double r_max);

Theorem1Report check_theorem1(const BoundScenario& scenario);

struct Lemma2Report {
    double j_true = 0.0;
    double j_model = 0.0;
    double gap = 0.0;   // j_true - j_model
    double bound = 0.0; // the (negative) lower bound
    double measured_eps_f = 0.0;
    double epsilon_pi = 0.0;
    bool satisfied = false;
};

// Lower bound on the return gap when evaluating the same policy on the true
// and the perturbed kernel:
// -[ 2 gamma r_max (eps_f + 2 eps_pi) / (1 - gamma^2) + 4 r_max eps_pi / (1 - gamma) ].
double lemma2_bound(double gamma, double r_max, double eps_f, double eps_pi);

Lemma2Report measure_lemma2_gap(const TabularMDP& true_mdp, const TabularMDP& model_mdp,
                                const Eigen::MatrixXd& policy, double epsilon_pi);

// Random-scenario sweeps. Scenario generation parameters; defaults match the
// verification protocol (small dense MDPs, short horizons).
struct SweepConfig {
    int count = 200;
    std::uint64_t seed = 7;
    int min_states = 4;
    int max_states = 8;
    int min_actions = 2;
    int max_actions = 4;
    int h_min = 1;
    int h_max = 4;
    std::vector<double> gammas = {0.9, 0.95, 0.99};
    double eps_f_max = 0.05;
    double eps_v_min = 0.02;
    double eps_v_max = 0.25;
    double eps_pi_max = 0.1; // lemma sweep only
};

struct SweepRow {
    std::uint64_t seed = 0;
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    int horizon = 0;
    Theorem1Report report;
};

std::vector<SweepRow> run_theorem1_sweep(const SweepConfig& cfg);

struct Lemma2SweepRow {
    std::uint64_t seed = 0;
    int n_states = 0;
    int n_actions = 0;
    double gamma = 0.0;
    Lemma2Report report;
};

std::vector<Lemma2SweepRow> run_lemma2_sweep(const SweepConfig& cfg);

// CSV report, one row per scenario, with a header comment noting the TV
// interpretation of epsilon_f.
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

// Parses either {"generator": {...}} or {"scenarios": [...]} from a JSON file.
std::vector<SweepRow> run_sweep_from_json(const std::string& json_text);

} // namespace mopac

#endif
