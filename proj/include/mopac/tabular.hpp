#ifndef MOPAC_TABULAR_HPP
#define MOPAC_TABULAR_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mopac/rng.hpp"

namespace mopac {

// Finite MDP with dense transition tensor P[s][a][s'] and rewards r[s][a].
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Eigen::MatrixXd> transitions; // transitions[a] is S x S, rows sum to 1
    Eigen::MatrixXd rewards;                  // S x A
    double gamma = 0.99;
    double r_max = 1.0;

    double prob(int s, int a, int sp) const { return transitions[a](s, sp); }
    void validate() const; // rows sum to 1 within 1e-12, |r| <= r_max

    std::string to_json() const;
    static TabularMDP from_json(const std::string& text);
};

// Dense random MDP: transition rows ~ Dirichlet(alpha), rewards U(0, r_max).
TabularMDP random_dense_mdp(int n_states, int n_actions, double gamma, Rng& rng,
                            double dirichlet_alpha = 1.0, double r_max = 1.0);

struct ValueIterationResult {
    Eigen::VectorXd values;
    std::vector<int> policy;
    int iterations = 0;
};

// Iterates Bellman optimality backups until the residual ||V - TV||_inf <= tol.
ValueIterationResult solve_value_iteration(const TabularMDP& mdp, double tol);

// One Bellman optimality backup of V.
Eigen::VectorXd bellman_backup(const TabularMDP& mdp, const Eigen::VectorXd& v);

// Exact value of a deterministic stationary policy: solves (I - gamma P_pi) V = r_pi.
Eigen::VectorXd evaluate_policy(const TabularMDP& mdp, const std::vector<int>& policy);

// Exact value of a stochastic stationary policy pi(a|s) given as an S x A matrix.
Eigen::VectorXd evaluate_stochastic_policy(const TabularMDP& mdp,
                                           const Eigen::MatrixXd& policy);

} // namespace mopac

#endif
