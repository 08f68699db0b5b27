#include "mopac/tabular.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "mopac/errors.hpp"

namespace mopac {

void TabularMDP::validate() const {
    if (n_states <= 0 || n_actions <= 0)
        throw ContractViolation("TabularMDP: state/action counts must be positive");
    if (static_cast<int>(transitions.size()) != n_actions)
        throw ContractViolation("TabularMDP: transition tensor has wrong action count");
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw ContractViolation("TabularMDP: gamma must be in [0, 1)");
    for (int a = 0; a < n_actions; ++a) {
        if (transitions[a].rows() != n_states || transitions[a].cols() != n_states)
            throw ContractViolation("TabularMDP: transition matrix shape mismatch");
        for (int s = 0; s < n_states; ++s) {
            const double row_sum = transitions[a].row(s).sum();
            if (std::abs(row_sum - 1.0) > 1e-12)
                throw ContractViolation("TabularMDP: transition row does not sum to 1");
            if (transitions[a].row(s).minCoeff() < -1e-15)
                throw ContractViolation("TabularMDP: negative transition probability");
        }
    }
    if (rewards.rows() != n_states || rewards.cols() != n_actions)
        throw ContractViolation("TabularMDP: reward table shape mismatch");
    if (rewards.cwiseAbs().maxCoeff() > r_max + 1e-12)
        throw ContractViolation("TabularMDP: reward exceeds stored r_max");
}

TabularMDP random_dense_mdp(int n_states, int n_actions, double gamma, Rng& rng,
                            double dirichlet_alpha, double r_max) {
    TabularMDP mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.r_max = r_max;
    mdp.transitions.assign(n_actions, Eigen::MatrixXd(n_states, n_states));
    for (int a = 0; a < n_actions; ++a) {
        for (int s = 0; s < n_states; ++s) {
            // Dirichlet(alpha) row via normalized Gamma draws; for alpha = 1 the
            // Gamma reduces to an exponential.
            Eigen::VectorXd g(n_states);
            double total = 0.0;
            for (int sp = 0; sp < n_states; ++sp) {
                double x;
                if (dirichlet_alpha == 1.0) {
                    x = -std::log(1.0 - rng.uniform());
                } else {
                    // Johnk-free fallback: sum of alpha exponentials works for
                    // integer alpha; otherwise use Marsaglia-Tsang.
                    double d = dirichlet_alpha - 1.0 / 3.0;
                    if (dirichlet_alpha < 1.0) d = (dirichlet_alpha + 1.0) - 1.0 / 3.0;
                    const double c = 1.0 / std::sqrt(9.0 * d);
                    double v = 0.0;
                    while (true) {
                        double z = rng.normal();
                        v = 1.0 + c * z;
                        if (v <= 0) continue;
                        v = v * v * v;
                        const double u = rng.uniform();
                        if (u < 1.0 - 0.0331 * z * z * z * z) break;
                        if (std::log(u + 1e-300) < 0.5 * z * z + d * (1.0 - v + std::log(v))) break;
                    }
                    x = d * v;
                    if (dirichlet_alpha < 1.0)
                        x *= std::pow(rng.uniform() + 1e-300, 1.0 / dirichlet_alpha);
                }
                g(sp) = x;
                total += x;
            }
            mdp.transitions[a].row(s) = (g / total).transpose();
            // Renormalize exactly so validate()'s 1e-12 row-sum check holds.
            mdp.transitions[a].row(s) /= mdp.transitions[a].row(s).sum();
        }
    }
    mdp.rewards.resize(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) mdp.rewards(s, a) = rng.uniform(0.0, r_max);
    return mdp;
}

Eigen::VectorXd bellman_backup(const TabularMDP& mdp, const Eigen::VectorXd& v) {
    Eigen::VectorXd out(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double q = mdp.rewards(s, a) + mdp.gamma * mdp.transitions[a].row(s).dot(v);
            best = std::max(best, q);
        }
        out(s) = best;
    }
    return out;
}

ValueIterationResult solve_value_iteration(const TabularMDP& mdp, double tol) {
    if (!(tol > 0.0)) throw ContractViolation("solve_value_iteration: tol must be > 0");
    ValueIterationResult res;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(mdp.n_states);
    int iter = 0;
    while (true) {
        Eigen::VectorXd next = bellman_backup(mdp, v);
        const double delta = (next - v).cwiseAbs().maxCoeff();
        v = std::move(next);
        ++iter;
        // ||v - Tv||_inf <= gamma * delta <= tol once delta <= tol.
        if (delta <= tol || iter > 1000000) break;
    }
    res.values = v;
    res.iterations = iter;
    res.policy.resize(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        int best_a = 0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double q = mdp.rewards(s, a) + mdp.gamma * mdp.transitions[a].row(s).dot(v);
            if (q > best) {
                best = q;
                best_a = a;
            }
        }
        res.policy[s] = best_a;
    }
    return res;
}

Eigen::VectorXd evaluate_policy(const TabularMDP& mdp, const std::vector<int>& policy) {
    if (static_cast<int>(policy.size()) != mdp.n_states)
        throw ContractViolation("evaluate_policy: policy size mismatch");
    Eigen::MatrixXd p_pi(mdp.n_states, mdp.n_states);
    Eigen::VectorXd r_pi(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        const int a = policy[s];
        p_pi.row(s) = mdp.transitions[a].row(s);
        r_pi(s) = mdp.rewards(s, a);
    }
    Eigen::MatrixXd lhs =
        Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p_pi;
    return lhs.partialPivLu().solve(r_pi);
}

Eigen::VectorXd evaluate_stochastic_policy(const TabularMDP& mdp,
                                           const Eigen::MatrixXd& policy) {
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw ContractViolation("evaluate_stochastic_policy: policy shape mismatch");
    Eigen::MatrixXd p_pi = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            p_pi.row(s) += policy(s, a) * mdp.transitions[a].row(s);
            r_pi(s) += policy(s, a) * mdp.rewards(s, a);
        }
    }
    Eigen::MatrixXd lhs =
        Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p_pi;
    return lhs.partialPivLu().solve(r_pi);
}

std::string TabularMDP::to_json() const {
    nlohmann::json j;
    j["n_states"] = n_states;
    j["n_actions"] = n_actions;
    j["gamma"] = gamma;
    j["r_max"] = r_max;
    auto& p = j["transitions"] = nlohmann::json::array();
    for (int s = 0; s < n_states; ++s) {
        nlohmann::json row_s = nlohmann::json::array();
        for (int a = 0; a < n_actions; ++a) {
            nlohmann::json row_a = nlohmann::json::array();
            for (int sp = 0; sp < n_states; ++sp) row_a.push_back(transitions[a](s, sp));
            row_s.push_back(std::move(row_a));
        }
        p.push_back(std::move(row_s));
    }
    auto& r = j["rewards"] = nlohmann::json::array();
    for (int s = 0; s < n_states; ++s) {
        nlohmann::json row = nlohmann::json::array();
        for (int a = 0; a < n_actions; ++a) row.push_back(rewards(s, a));
        r.push_back(std::move(row));
    }
    return j.dump();
}

TabularMDP TabularMDP::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TabularMDP mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.r_max = j.at("r_max").get<double>();
    mdp.transitions.assign(mdp.n_actions, Eigen::MatrixXd(mdp.n_states, mdp.n_states));
    const auto& p = j.at("transitions");
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int sp = 0; sp < mdp.n_states; ++sp)
                mdp.transitions[a](s, sp) = p.at(s).at(a).at(sp).get<double>();
    mdp.rewards.resize(mdp.n_states, mdp.n_actions);
    const auto& r = j.at("rewards");
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) mdp.rewards(s, a) = r.at(s).at(a).get<double>();
    mdp.validate();
    return mdp;
}

} // namespace mopac
