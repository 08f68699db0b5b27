#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mopac/errors.hpp"
#include "mopac/sac.hpp"
#include "mopac/tabular.hpp"

using namespace mopac;

namespace {

ActorCritic tiny_ac(int state_dim, int action_dim, Rng& rng,
                    const SacConfig& cfg = SacConfig{.hidden = {16, 16}}) {
    return make_actor_critic(state_dim, action_dim,
                             Eigen::VectorXd::Constant(action_dim, -2.0),
                             Eigen::VectorXd::Constant(action_dim, 2.0), cfg, rng);
}

// Push the policy's emitted std down to the clamp floor.
void floor_policy_std(ActorCritic& ac) {
    const int adim = ac.action_dim();
    ac.policy.net.weights.back().bottomRows(adim).setZero();
    ac.policy.net.biases.back().tail(adim).setConstant(-60.0);
}

} // namespace

TEST_CASE("sample_action: zero-mean, floor-std policy acts at the center") {
    Rng rng(1);
    ActorCritic ac = tiny_ac(2, 1, rng);
    ac.policy.net.weights.back().setZero();
    ac.policy.net.biases.back().setZero();
    floor_policy_std(ac);
    Eigen::VectorXd s(2);
    s << 0.4, -0.7;
    Rng sample_rng(2);
    for (int i = 0; i < 20; ++i) {
        ActionSample a = sample_action(ac, s, sample_rng);
        CHECK(std::abs(a.action(0)) < 1e-7);
    }
}

TEST_CASE("sample_action: log_prob is finite and below the clamp-implied bound") {
    Rng rng(3);
    ActorCritic ac = tiny_ac(3, 2, rng);
    Eigen::VectorXd s(3);
    s << 0.1, -0.2, 0.9;
    Rng sample_rng(4);
    for (int i = 0; i < 200; ++i) {
        ActionSample a = sample_action(ac, s, sample_rng);
        CHECK(std::isfinite(a.log_prob));
        // Per dimension the Gaussian factor is at most 1/(sigma_min sqrt(2pi))
        // and the squash jacobian is at least eps, so the density is bounded.
        const double per_dim_max =
            -ac.policy.log_std_min - 0.5 * std::log(2.0 * 3.141592653589793) -
            std::log(1e-12);
        CHECK(a.log_prob <= 2.0 * per_dim_max);
        CHECK(a.action.cwiseAbs().maxCoeff() <= 2.0);
    }
}

TEST_CASE("sample_action: Monte-Carlo entropy is self-consistent within 2%") {
    Rng rng(5);
    ActorCritic ac = tiny_ac(2, 1, rng);
    Eigen::VectorXd s(2);
    s << 0.25, -0.5;
    Rng sample_rng(6);
    const int n = 100000;
    double sum_sampled = 0.0, sum_reeval = 0.0;
    for (int i = 0; i < n; ++i) {
        ActionSample a = sample_action(ac, s, sample_rng);
        sum_sampled += -a.log_prob;
        sum_reeval += -log_prob_of(ac, s, a.action);
    }
    const double h_sampled = sum_sampled / n;
    const double h_reeval = sum_reeval / n;
    CHECK(h_reeval == doctest::Approx(h_sampled).epsilon(0.02));
}

TEST_CASE("squashed policy density integrates to one over the action box") {
    Rng rng(7);
    ActorCritic ac = tiny_ac(1, 1, rng);
    Eigen::VectorXd s(1);
    s << 0.3;
    // Simpson quadrature in u-space: a = center + half*tanh(u), so
    // integral p(a) da = integral p(a(u)) * half * sech^2(u) du.
    const double lo = -10.0, hi = 10.0;
    const int n = 4000; // even
    const double h = (hi - lo) / n;
    auto integrand = [&](double u) {
        const double t = std::tanh(u);
        Eigen::VectorXd a(1);
        a << ac.action_center(0) + ac.action_half(0) * t;
        const double jac = ac.action_half(0) * (1.0 - t * t);
        return std::exp(log_prob_of(ac, s, a)) * jac;
    };
    double acc = integrand(lo) + integrand(hi);
    for (int i = 1; i < n; ++i) acc += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    const double integral = acc * h / 3.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sac_update: absorbing transition bootstraps to the bare reward") {
    Rng rng(9);
    SacConfig cfg;
    cfg.hidden = {8, 8};
    ActorCritic ac = tiny_ac(2, 1, rng, cfg);
    // Critics output exactly zero; the huge target value must not leak
    // through the (1 - done) mask.
    ac.q1.weights.back().setZero();
    ac.q1.biases.back().setZero();
    ac.q2.weights.back().setZero();
    ac.q2.biases.back().setZero();
    ac.v_target.weights.back().setZero();
    ac.v_target.biases.back().setConstant(1000.0);
    Transition t;
    t.state = Eigen::VectorXd::Zero(2);
    t.action = Eigen::VectorXd::Zero(1);
    t.reward = 1.0;
    t.next_state = Eigen::VectorXd::Ones(2);
    t.done = true;
    Rng update_rng(10);
    SacLossReport report = sac_update(ac, {t}, cfg, update_rng);
    // Q target is exactly r = 1, prediction 0, so loss = 0.5 * (0-1)^2.
    CHECK(report.q1_loss == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report.q2_loss == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("policy gradient matches finite differences on a one-step bandit") {
    // alpha = 0, near-deterministic policy: the exposed policy step must
    // differentiate Qmin(s, squash(mean)) through the squash exactly.
    Rng rng(11);
    SacConfig cfg;
    cfg.hidden = {8};
    ActorCritic ac = tiny_ac(2, 1, rng, cfg);
    floor_policy_std(ac);
    Eigen::MatrixXd s(1, 2);
    s << 0.2, -0.4;

    Rng probe_rng(12);
    PolicyStep step = compute_policy_step(ac, s, probe_rng, 0.0);

    const double fd_h = 1e-6;
    double worst = 0.0;
    for (int l = 0; l < ac.policy.net.num_layers(); ++l) {
        for (Eigen::Index i = 0; i < ac.policy.net.weights[l].size(); ++i) {
            double& p = ac.policy.net.weights[l].reshaped()(i);
            const double saved = p;
            Rng r1(99), r2(99);
            p = saved + fd_h;
            const double up = compute_policy_step(ac, s, r1, 0.0).loss;
            p = saved - fd_h;
            const double down = compute_policy_step(ac, s, r2, 0.0).loss;
            p = saved;
            const double fd = (up - down) / (2.0 * fd_h);
            const double an = step.grads.weights[l].reshaped()(i);
            worst = std::max(worst, std::abs(fd - an) /
                                        std::max({std::abs(fd), std::abs(an), 1e-3}));
        }
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("sac_update: targets move by exactly the Polyak step") {
    Rng rng(13);
    SacConfig cfg;
    cfg.hidden = {8, 8};
    cfg.tau = 0.01;
    ActorCritic ac = tiny_ac(2, 1, rng, cfg);
    DenseNet v_target_before = ac.v_target;
    std::vector<Transition> batch;
    Rng data_rng(14);
    for (int i = 0; i < 8; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::NullaryExpr(
            2, [&](Eigen::Index) { return data_rng.uniform(-1, 1); });
        t.action = Eigen::VectorXd::Constant(1, data_rng.uniform(-2, 2));
        t.reward = data_rng.uniform(-1, 1);
        t.next_state = t.state;
        t.done = false;
        batch.push_back(t);
    }
    Rng update_rng(15);
    sac_update(ac, batch, cfg, update_rng);
    // Recompute the expected target from the new online net.
    DenseNet expected = v_target_before;
    polyak_update(expected, ac.v, cfg.tau);
    for (int l = 0; l < expected.num_layers(); ++l) {
        CHECK((expected.weights[l] - ac.v_target.weights[l]).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK((expected.biases[l] - ac.v_target.biases[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("twin-critic pessimism: the policy loss uses min(Q1, Q2)") {
    Rng rng(17);
    SacConfig cfg;
    cfg.hidden = {8};
    ActorCritic ac = tiny_ac(2, 1, rng, cfg);
    ac.q1.weights.back().setZero();
    ac.q1.biases.back().setConstant(-5.0);
    ac.q2.weights.back().setZero();
    ac.q2.biases.back().setConstant(7.0);
    Eigen::MatrixXd s(1, 2);
    s << 0.0, 0.0;
    Rng probe(18);
    PolicyStep step = compute_policy_step(ac, s, probe, 0.0);
    CHECK(step.loss == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("entropy rises with alpha on a fixed bandit") {
    auto train_with_alpha = [](double alpha) {
        Rng rng(19);
        SacConfig cfg;
        cfg.hidden = {16, 16};
        cfg.lr = 3e-3;
        cfg.alpha = alpha;
        cfg.gamma = 0.0; // bandit: no bootstrapping
        ActorCritic ac = tiny_ac(1, 1, rng, cfg);
        Rng data_rng(20), update_rng(21);
        Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
        for (int step = 0; step < 1500; ++step) {
            std::vector<Transition> batch;
            for (int i = 0; i < 32; ++i) {
                Transition t;
                t.state = s;
                t.action = Eigen::VectorXd::Constant(1, data_rng.uniform(-2.0, 2.0));
                t.reward = -(t.action(0) - 0.5) * (t.action(0) - 0.5);
                t.next_state = s;
                t.done = true;
                batch.push_back(t);
            }
            sac_update(ac, batch, cfg, update_rng);
        }
        Rng mc(22);
        double h = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) h += -sample_action(ac, s, mc).log_prob;
        return h / n;
    };
    const double h_low = train_with_alpha(0.05);
    const double h_high = train_with_alpha(0.5);
    CHECK(h_high > h_low);
}

TEST_CASE("converged Q matches value iteration on a one-hot tabular problem") {
    // 2-state, 2-action MDP embedded as one-hot states; the continuous action
    // a in [-2, 2] is binned by sign. Deterministic transitions.
    TabularMDP mdp;
    mdp.n_states = 2;
    mdp.n_actions = 2;
    mdp.gamma = 0.9;
    mdp.r_max = 1.0;
    mdp.transitions.assign(2, Eigen::MatrixXd::Zero(2, 2));
    // Action 0: stay; action 1: switch.
    mdp.transitions[0] << 1, 0, 0, 1;
    mdp.transitions[1] << 0, 1, 1, 0;
    mdp.rewards.resize(2, 2);
    // State 0 prefers switching, state 1 prefers staying.
    mdp.rewards << 0.1, 0.6, 1.0, 0.2;
    auto vi = solve_value_iteration(mdp, 1e-12);
    Eigen::MatrixXd q_star(2, 2);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            q_star(s, a) =
                mdp.rewards(s, a) + mdp.gamma * mdp.transitions[a].row(s).dot(vi.values);

    SacConfig cfg;
    cfg.hidden = {32, 32};
    cfg.lr = 1e-3;
    cfg.gamma = 0.9;
    cfg.tau = 0.01;
    Rng rng(23);
    ActorCritic ac = make_actor_critic(2, 1, Eigen::VectorXd::Constant(1, -2.0),
                                       Eigen::VectorXd::Constant(1, 2.0), cfg, rng);

    auto one_hot = [](int s) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
        v(s) = 1.0;
        return v;
    };
    Rng data_rng(24), update_rng(25);
    // Uniform behavior data over N(states) x U(actions).
    auto sample_batch = [&](int n) {
        std::vector<Transition> batch;
        for (int i = 0; i < n; ++i) {
            const int s = static_cast<int>(data_rng.index(2));
            const double a_cont = data_rng.uniform(-2.0, 2.0);
            const int a = a_cont >= 0.0 ? 1 : 0;
            int sp = 0;
            for (int k = 0; k < 2; ++k)
                if (mdp.transitions[a](s, k) > 0.5) sp = k;
            Transition t;
            t.state = one_hot(s);
            t.action = Eigen::VectorXd::Constant(1, a_cont);
            t.reward = mdp.rewards(s, a);
            t.next_state = one_hot(sp);
            t.done = false;
            batch.push_back(t);
        }
        return batch;
    };
    // Annealed temperature pushes the policy toward the greedy optimum.
    const struct {
        double alpha;
        int steps;
    } phases[] = {{0.2, 2000}, {0.05, 2000}, {0.005, 4000}};
    for (const auto& phase : phases) {
        cfg.alpha = phase.alpha;
        ac.log_alpha = std::log(phase.alpha);
        for (int i = 0; i < phase.steps; ++i)
            sac_update(ac, sample_batch(64), cfg, update_rng);
    }
    // Probe Q at the bin centers.
    double worst = 0.0;
    for (int s = 0; s < 2; ++s) {
        for (int a = 0; a < 2; ++a) {
            Eigen::MatrixXd sa(1, 3);
            sa << one_hot(s).transpose(), (a == 1 ? 1.0 : -1.0);
            const double q1 = forward(ac.q1, sa)(0, 0);
            const double q2 = forward(ac.q2, sa)(0, 0);
            worst = std::max(worst, std::abs(std::min(q1, q2) - q_star(s, a)));
        }
    }
    CHECK(worst < 0.05);
}

TEST_CASE("actor-critic checkpoint round trip is bit-exact") {
    Rng rng(27);
    ActorCritic ac = tiny_ac(3, 2, rng);
    ac.log_alpha = std::log(0.123);
    std::stringstream ss;
    save_actor_critic(ss, ac);
    ActorCritic back = load_actor_critic(ss);
    CHECK(back.log_alpha == ac.log_alpha);
    CHECK(back.action_center == ac.action_center);
    CHECK(back.action_half == ac.action_half);
    Eigen::VectorXd s(3);
    s << 0.1, 0.2, 0.3;
    CHECK(mean_action(back, s) == mean_action(ac, s));
    Eigen::MatrixXd sa(1, 5);
    sa << 0.1, 0.2, 0.3, 0.4, 0.5;
    CHECK(forward(back.q1, sa) == forward(ac.q1, sa));
    CHECK(forward(back.v_target, s.transpose()) == forward(ac.v_target, s.transpose()));
}

TEST_CASE("value_td_update: regresses V toward the one-step target") {
    Rng rng(29);
    SacConfig cfg;
    cfg.hidden = {16, 16};
    cfg.lr = 3e-3;
    cfg.gamma = 0.0;
    cfg.tau = 0.05;
    ActorCritic ac = tiny_ac(1, 1, rng, cfg);
    std::vector<Transition> batch;
    for (int i = 0; i < 64; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::Constant(1, 0.5);
        t.action = Eigen::VectorXd::Zero(1);
        t.reward = 3.0;
        t.next_state = t.state;
        t.done = false;
        batch.push_back(t);
    }
    double loss = 0.0;
    for (int i = 0; i < 800; ++i) loss = value_td_update(ac, batch, cfg);
    CHECK(loss < 1e-3);
    CHECK(forward(ac.v, Eigen::MatrixXd::Constant(1, 1, 0.5))(0, 0) ==
          doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("sac_update: empty batch is a contract violation") {
    Rng rng(31);
    ActorCritic ac = tiny_ac(2, 1, rng);
    SacConfig cfg;
    Rng update_rng(32);
    CHECK_THROWS_AS((void)sac_update(ac, {}, cfg, update_rng), ContractViolation);
}
