#include "mopac/bounds.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "mopac/errors.hpp"

namespace mopac {

TabularMDP perturb_model(const TabularMDP& mdp, double epsilon_f, Rng& rng,
                         double* measured_max_tv) {
    if (!(epsilon_f >= 0.0 && epsilon_f <= 1.0))
        throw ContractViolation("perturb_model: epsilon_f must be in [0, 1]");
    TabularMDP out = mdp;
    double max_tv = 0.0;
    if (epsilon_f > 0.0) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            for (int s = 0; s < mdp.n_states; ++s) {
                // Random mixing target q ~ Dirichlet(1); the convex mixture
                // (1-c) P + c q has TV(., P) = c * TV(q, P) <= c = epsilon_f.
                Eigen::VectorXd q(mdp.n_states);
                for (int sp = 0; sp < mdp.n_states; ++sp)
                    q(sp) = -std::log(1.0 - rng.uniform());
                q /= q.sum();
                Eigen::VectorXd row =
                    (1.0 - epsilon_f) * mdp.transitions[a].row(s).transpose() +
                    epsilon_f * q;
                row /= row.sum();
                out.transitions[a].row(s) = row.transpose();
                const double tv =
                    0.5 * (row.transpose() - mdp.transitions[a].row(s)).cwiseAbs().sum();
                max_tv = std::max(max_tv, tv);
            }
        }
    }
    if (measured_max_tv) *measured_max_tv = max_tv;
    return out;
}

double max_row_tv(const TabularMDP& a, const TabularMDP& b) {
    if (a.n_states != b.n_states || a.n_actions != b.n_actions)
        throw ContractViolation("max_row_tv: MDPs have different shapes");
    double max_tv = 0.0;
    for (int act = 0; act < a.n_actions; ++act)
        for (int s = 0; s < a.n_states; ++s)
            max_tv = std::max(
                max_tv,
                0.5 * (a.transitions[act].row(s) - b.transitions[act].row(s))
                          .cwiseAbs()
                          .sum());
    return max_tv;
}

MpcPolicyValue mpc_policy_value(const TabularMDP& mdp_true, const TabularMDP& mdp_model,
                                const Eigen::VectorXd& v_hat, int horizon) {
    if (mdp_true.n_states != mdp_model.n_states ||
        mdp_true.n_actions != mdp_model.n_actions)
        throw ContractViolation("mpc_policy_value: MDP shapes differ");
    if (v_hat.size() != mdp_true.n_states)
        throw ContractViolation("mpc_policy_value: v_hat size mismatch");
    if (horizon < 1) throw ContractViolation("mpc_policy_value: horizon must be >= 1");
    if (horizon > 100000)
        throw ScenarioSizeError("mpc_policy_value: horizon too large for exact DP");
    const double gamma = mdp_model.gamma;

    // Backward induction over the model with terminal v_hat. w holds the
    // optimal value-to-go with k steps remaining.
    Eigen::VectorXd w = v_hat;
    MpcPolicyValue res;
    res.first_actions.assign(mdp_true.n_states, 0);
    for (int k = 0; k < horizon; ++k) {
        Eigen::VectorXd next(mdp_model.n_states);
        for (int s = 0; s < mdp_model.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            int best_a = 0;
            for (int a = 0; a < mdp_model.n_actions; ++a) {
                const double q = mdp_model.rewards(s, a) +
                                 gamma * mdp_model.transitions[a].row(s).dot(w);
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            next(s) = best;
            if (k == horizon - 1) res.first_actions[s] = best_a;
        }
        w = std::move(next);
    }

    res.true_values = evaluate_policy(mdp_true, res.first_actions);
    res.j = res.true_values.mean();
    return res;
}

double theorem1_bound(double gamma, int horizon, double eps_v, double eps_f,
                      double r_max) {
    const double gh = std::pow(gamma, horizon);
    return 2.0 * gh * eps_v / (1.0 - gh) +
           r_max * (1.0 - gh) / (1.0 - gamma) * eps_f;
}

Theorem1Report check_theorem1(const BoundScenario& scenario) {
    scenario.mdp.validate();
    Rng rng = Rng::from_master(scenario.seed).derive("theorem1");
    Theorem1Report rep;

    const auto vi = solve_value_iteration(scenario.mdp, 1e-12);
    TabularMDP model = perturb_model(scenario.mdp, scenario.epsilon_f, rng,
                                     &rep.measured_eps_f);

    Eigen::VectorXd v_hat = vi.values;
    if (scenario.epsilon_v > 0.0) {
        for (int s = 0; s < scenario.mdp.n_states; ++s)
            v_hat(s) += rng.uniform(-scenario.epsilon_v, scenario.epsilon_v);
    }
    rep.measured_eps_v = (v_hat - vi.values).cwiseAbs().maxCoeff();

    const auto mpc = mpc_policy_value(scenario.mdp, model, v_hat, scenario.horizon);
    rep.j_opt = vi.values.mean();
    rep.j_mpc = mpc.j;
    rep.gap = rep.j_opt - rep.j_mpc;
    rep.bound_eq2 = theorem1_bound(scenario.mdp.gamma, scenario.horizon,
                                   rep.measured_eps_v, rep.measured_eps_f,
                                   scenario.mdp.r_max);
    rep.bound_eq3 = scenario.mdp.r_max * rep.measured_eps_f / (1.0 - scenario.mdp.gamma);
    rep.satisfied = rep.gap <= rep.bound_eq2 + 1e-9;
    return rep;
}

double lemma2_bound(double gamma, double r_max, double eps_f, double eps_pi) {
    return -(2.0 * gamma * r_max * (eps_f + 2.0 * eps_pi) / (1.0 - gamma * gamma) +
             4.0 * r_max * eps_pi / (1.0 - gamma));
}

Lemma2Report measure_lemma2_gap(const TabularMDP& true_mdp, const TabularMDP& model_mdp,
                                const Eigen::MatrixXd& policy, double epsilon_pi) {
    if (true_mdp.n_states != model_mdp.n_states ||
        true_mdp.n_actions != model_mdp.n_actions)
        throw ContractViolation("measure_lemma2_gap: MDP shapes differ");
    Lemma2Report rep;
    rep.epsilon_pi = epsilon_pi;
    rep.measured_eps_f = max_row_tv(true_mdp, model_mdp);
    rep.j_true = evaluate_stochastic_policy(true_mdp, policy).mean();
    rep.j_model = evaluate_stochastic_policy(model_mdp, policy).mean();
    rep.gap = rep.j_true - rep.j_model;
    rep.bound = lemma2_bound(true_mdp.gamma, true_mdp.r_max, rep.measured_eps_f,
                             epsilon_pi);
    rep.satisfied = rep.gap >= rep.bound - 1e-9;
    return rep;
}

namespace {

BoundScenario random_scenario(const SweepConfig& cfg, Rng& rng, std::uint64_t seed) {
    BoundScenario sc;
    sc.seed = seed;
    const int n_states =
        cfg.min_states + static_cast<int>(rng.index(cfg.max_states - cfg.min_states + 1));
    const int n_actions =
        cfg.min_actions +
        static_cast<int>(rng.index(cfg.max_actions - cfg.min_actions + 1));
    const double gamma = cfg.gammas[rng.index(cfg.gammas.size())];
    sc.mdp = random_dense_mdp(n_states, n_actions, gamma, rng);
    sc.horizon = cfg.h_min + static_cast<int>(rng.index(cfg.h_max - cfg.h_min + 1));
    sc.epsilon_f = rng.uniform(0.0, cfg.eps_f_max);
    sc.epsilon_v = rng.uniform(cfg.eps_v_min, cfg.eps_v_max);
    sc.epsilon_pi = rng.uniform(0.0, cfg.eps_pi_max);
    return sc;
}

} // namespace

std::vector<SweepRow> run_theorem1_sweep(const SweepConfig& cfg) {
    std::vector<SweepRow> rows;
    rows.reserve(cfg.count);
    Rng master = Rng::from_master(cfg.seed).derive("theorem1_sweep");
    for (int i = 0; i < cfg.count; ++i) {
        Rng rng = master.derive("scenario", static_cast<std::uint64_t>(i));
        BoundScenario sc = random_scenario(cfg, rng, cfg.seed * 1000003ULL + i);
        SweepRow row;
        row.seed = sc.seed;
        row.n_states = sc.mdp.n_states;
        row.n_actions = sc.mdp.n_actions;
        row.gamma = sc.mdp.gamma;
        row.horizon = sc.horizon;
        row.report = check_theorem1(sc);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<Lemma2SweepRow> run_lemma2_sweep(const SweepConfig& cfg) {
    std::vector<Lemma2SweepRow> rows;
    rows.reserve(cfg.count);
    Rng master = Rng::from_master(cfg.seed).derive("lemma2_sweep");
    for (int i = 0; i < cfg.count; ++i) {
        Rng rng = master.derive("scenario", static_cast<std::uint64_t>(i));
        BoundScenario sc = random_scenario(cfg, rng, cfg.seed * 1000003ULL + i);
        TabularMDP model = perturb_model(sc.mdp, sc.epsilon_f, rng);
        // Random stochastic policy with Dirichlet(1) rows; every other
        // scenario uses epsilon_pi = 0 so the tightest form is exercised too.
        Eigen::MatrixXd policy(sc.mdp.n_states, sc.mdp.n_actions);
        for (int s = 0; s < sc.mdp.n_states; ++s) {
            double total = 0.0;
            for (int a = 0; a < sc.mdp.n_actions; ++a) {
                policy(s, a) = -std::log(1.0 - rng.uniform());
                total += policy(s, a);
            }
            policy.row(s) /= total;
        }
        const double eps_pi = (i % 2 == 0) ? 0.0 : sc.epsilon_pi;
        Lemma2SweepRow row;
        row.seed = sc.seed;
        row.n_states = sc.mdp.n_states;
        row.n_actions = sc.mdp.n_actions;
        row.gamma = sc.mdp.gamma;
        row.report = measure_lemma2_gap(sc.mdp, model, policy, eps_pi);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ContractViolation("write_sweep_csv: cannot open " + path);
    out << "# epsilon_f is measured as the maximum per-row total-variation "
           "distance of the perturbed transition kernel\n";
    out << "seed,n_states,n_actions,gamma,H,eps_f,eps_v,gap,bound_eq2,bound_eq3,"
           "satisfied\n";
    char buf[512];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf),
                      "%llu,%d,%d,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                      static_cast<unsigned long long>(r.seed), r.n_states, r.n_actions,
                      r.gamma, r.horizon, r.report.measured_eps_f,
                      r.report.measured_eps_v, r.report.gap, r.report.bound_eq2,
                      r.report.bound_eq3, r.report.satisfied ? 1 : 0);
        out << buf;
    }
}

std::vector<SweepRow> run_sweep_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    if (j.contains("generator")) {
        const auto& g = j["generator"];
        SweepConfig cfg;
        cfg.count = g.value("count", cfg.count);
        cfg.seed = g.value("seed", cfg.seed);
        cfg.min_states = g.value("min_states", cfg.min_states);
        cfg.max_states = g.value("max_states", cfg.max_states);
        cfg.min_actions = g.value("min_actions", cfg.min_actions);
        cfg.max_actions = g.value("max_actions", cfg.max_actions);
        cfg.h_min = g.value("h_min", cfg.h_min);
        cfg.h_max = g.value("h_max", cfg.h_max);
        if (g.contains("gammas")) cfg.gammas = g["gammas"].get<std::vector<double>>();
        cfg.eps_f_max = g.value("eps_f_max", cfg.eps_f_max);
        cfg.eps_v_min = g.value("eps_v_min", cfg.eps_v_min);
        cfg.eps_v_max = g.value("eps_v_max", cfg.eps_v_max);
        return run_theorem1_sweep(cfg);
    }
    if (!j.contains("scenarios"))
        throw ConfigurationError("scenario file needs a 'generator' or 'scenarios' key");
    std::vector<SweepRow> rows;
    for (const auto& item : j["scenarios"]) {
        BoundScenario sc;
        sc.mdp = TabularMDP::from_json(item.at("mdp").dump());
        sc.epsilon_f = item.value("epsilon_f", 0.0);
        sc.epsilon_v = item.value("epsilon_v", 0.0);
        sc.horizon = item.value("horizon", 1);
        sc.seed = item.value("seed", 0);
        SweepRow row;
        row.seed = sc.seed;
        row.n_states = sc.mdp.n_states;
        row.n_actions = sc.mdp.n_actions;
        row.gamma = sc.mdp.gamma;
        row.horizon = sc.horizon;
        row.report = check_theorem1(sc);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace mopac
