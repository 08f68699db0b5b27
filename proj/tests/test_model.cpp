#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mopac/errors.hpp"
#include "mopac/model.hpp"

using namespace mopac;

namespace {

// Buffer filled with the noiseless linear system s' = s + a.
ReplayBuffer linear_system_buffer(int n, int dim, Rng& rng) {
    ReplayBuffer buf(2 * n, dim, dim);
    for (int i = 0; i < n; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::NullaryExpr(
            dim, [&](Eigen::Index) { return rng.uniform(-1.0, 1.0); });
        t.action = Eigen::VectorXd::NullaryExpr(
            dim, [&](Eigen::Index) { return rng.uniform(-1.0, 1.0); });
        t.next_state = t.state + t.action;
        t.reward = 0.25 * t.action.sum();
        buf.push(t);
    }
    return buf;
}

EnsembleConfig small_config() {
    EnsembleConfig cfg;
    cfg.ensemble_size = 3;
    cfg.elite_count = 2;
    cfg.hidden = {32, 32};
    cfg.lr = 3e-3;
    cfg.batch_size = 64;
    cfg.patience = 10;
    return cfg;
}

} // namespace

TEST_CASE("elite selection: exact argmin-k set with ties broken by index") {
    CHECK(EnsembleModel::select_elites({0.3, 0.1, 0.5, 0.2}, 2) ==
          std::vector<int>{1, 3});
    CHECK(EnsembleModel::select_elites({0.2, 0.2, 0.1}, 2) == std::vector<int>{0, 2});
    CHECK(EnsembleModel::select_elites({0.5, 0.5, 0.5, 0.5}, 3) ==
          std::vector<int>{0, 1, 2});
}

TEST_CASE("train: too few transitions raises insufficient-data") {
    Rng rng(1);
    ReplayBuffer buf = linear_system_buffer(50, 2, rng);
    EnsembleConfig cfg = small_config();
    cfg.min_buffer = 250;
    Rng init(2);
    EnsembleModel model(2, 2, cfg, init);
    Rng train_rng(3);
    CHECK_THROWS_AS((void)model.train(buf, 5, train_rng), InsufficientData);
}

TEST_CASE("train: learns the linear system to small validation error") {
    Rng rng(5);
    ReplayBuffer buf = linear_system_buffer(1000, 2, rng);
    Rng init(6);
    EnsembleModel model(2, 2, small_config(), init);
    Rng train_rng(7);
    ModelTrainReport report = model.train(buf, 50, train_rng);
    CHECK(report.elite_val_l2 < 1e-3);
    CHECK(report.elites.size() == 2);
    CHECK(model.trained());

    // Mean prediction at a held-out point lands near s + a.
    Eigen::VectorXd s(2), a(2);
    s << 0.3, -0.4;
    a << 0.2, 0.5;
    auto [next, reward] = model.predict_mean(s, a);
    CHECK((next - (s + a)).cwiseAbs().maxCoeff() < 0.1);
    CHECK(reward == doctest::Approx(0.25 * a.sum()).epsilon(0.5));
}

TEST_CASE("train: normalizer whitens the training inputs") {
    Rng rng(11);
    ReplayBuffer buf(3000, 1, 1);
    for (int i = 0; i < 2000; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::Constant(1, rng.uniform(40.0, 60.0));
        t.action = Eigen::VectorXd::Constant(1, rng.uniform(-0.1, 0.1));
        t.next_state = t.state + t.action;
        t.reward = 0.0;
        buf.push(t);
    }
    EnsembleConfig cfg = small_config();
    Rng init(12);
    EnsembleModel model(1, 1, cfg, init);
    Rng train_rng(13);
    model.train(buf, 3, train_rng);
    // Re-normalize the raw inputs and check the per-dimension statistics.
    Eigen::MatrixXd x(2000, 2);
    for (int i = 0; i < 2000; ++i) {
        x(i, 0) = buf.at(i).state(0);
        x(i, 1) = buf.at(i).action(0);
    }
    Eigen::MatrixXd z = model.normalizer().apply(x);
    for (int d = 0; d < 2; ++d) {
        CHECK(std::abs(z.col(d).mean()) < 0.05);
        const double sd = std::sqrt(
            (z.col(d).array() - z.col(d).mean()).square().mean());
        CHECK(sd > 0.9);
        CHECK(sd < 1.1);
    }
}

TEST_CASE("train: zero-variance dataset collapses the predicted std to the clamp") {
    ReplayBuffer buf(600, 1, 1);
    Transition t;
    t.state = Eigen::VectorXd::Constant(1, 0.5);
    t.action = Eigen::VectorXd::Constant(1, -0.25);
    t.next_state = Eigen::VectorXd::Constant(1, 0.75);
    t.reward = 1.5;
    for (int i = 0; i < 400; ++i) buf.push(t);
    EnsembleConfig cfg = small_config();
    cfg.ensemble_size = 2;
    cfg.elite_count = 1;
    cfg.log_std_min = -5.0; // reachable within a short training run
    cfg.patience = 1000;
    Rng init(21);
    EnsembleModel model(1, 1, cfg, init);
    Rng train_rng(22);
    ModelTrainReport report = model.train(buf, 400, train_rng);
    CHECK(report.elite_val_l2 < 1e-6);
    auto [next, reward] = model.predict_mean(t.state, t.action);
    CHECK(next(0) == doctest::Approx(0.75).epsilon(1e-3));
    CHECK(reward == doctest::Approx(1.5).epsilon(1e-3));
    // Sampled predictions should be near-deterministic: std at the clamp.
    Rng sample_rng(23);
    double max_dev = 0.0;
    for (int i = 0; i < 100; ++i) {
        auto [sp, r] = model.predict(t.state, t.action, sample_rng);
        max_dev = std::max(max_dev, std::abs(sp(0) - next(0)));
    }
    CHECK(max_dev < 0.05); // sigma is at most exp(-5) times noise
}

TEST_CASE("predict: deterministic limit returns s + mean delta") {
    Rng init(31);
    EnsembleConfig cfg = small_config();
    cfg.ensemble_size = 1;
    cfg.elite_count = 1;
    EnsembleModel model(2, 2, cfg, init);
    model.set_elites({0});
    // Push the log-std head output to the clamp floor.
    model.member(0).net.biases.back().tail(3).setConstant(-60.0);
    model.member(0).net.weights.back().bottomRows(3).setZero();
    Eigen::VectorXd s(2), a(2);
    s << 0.1, 0.2;
    a << -0.3, 0.4;
    auto mean_pred = model.predict_mean(s, a);
    Rng rng(32);
    auto sampled = model.predict(s, a, rng);
    CHECK((sampled.first - mean_pred.first).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("predict: uniform elite choice over 1e4 draws") {
    Rng init(41);
    EnsembleConfig cfg = small_config();
    cfg.ensemble_size = 4;
    cfg.elite_count = 2;
    EnsembleModel model(1, 1, cfg, init);
    model.set_elites({1, 3});
    // Give the two elites clearly separated mean outputs.
    for (int m : {1, 3}) {
        model.member(m).net.weights.back().setZero();
        model.member(m).net.biases.back().setZero();
        model.member(m).net.biases.back()(0) = m == 1 ? -10.0 : 10.0;
        model.member(m).net.biases.back().tail(2).setConstant(-40.0);
    }
    Eigen::VectorXd s(1), a(1);
    s << 0.0;
    a << 0.0;
    Rng rng(42);
    int picks_first = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        auto [next, r] = model.predict(s, a, rng);
        if (next(0) < 0.0) ++picks_first;
    }
    const double freq = picks_first / static_cast<double>(n);
    CHECK(freq > 0.48);
    CHECK(freq < 0.52);
}

TEST_CASE("predict: sampled spread matches the predicted std within 5%") {
    Rng init(51);
    EnsembleConfig cfg = small_config();
    cfg.ensemble_size = 1;
    cfg.elite_count = 1;
    EnsembleModel model(1, 1, cfg, init);
    model.set_elites({0});
    const double log_std = -1.2; // sigma ~ 0.301
    model.member(0).net.weights.back().setZero();
    model.member(0).net.biases.back().setZero();
    model.member(0).net.biases.back().tail(2).setConstant(log_std);
    Eigen::VectorXd s(1), a(1);
    s << 0.3;
    a << -0.1;
    Rng rng(52);
    const int n = 10000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        auto [next, r] = model.predict(s, a, rng);
        const double delta = next(0) - s(0);
        sum += delta;
        sq += delta * delta;
    }
    const double mean = sum / n;
    const double std = std::sqrt(sq / n - mean * mean);
    CHECK(std == doctest::Approx(std::exp(log_std)).epsilon(0.05));
}

TEST_CASE("predict: untrained model is a contract violation") {
    Rng init(61);
    EnsembleModel model(1, 1, small_config(), init);
    Eigen::VectorXd s(1), a(1);
    s << 0.0;
    a << 0.0;
    Rng rng(62);
    CHECK_THROWS_AS((void)model.predict(s, a, rng), ContractViolation);
}

TEST_CASE("reward source: analytic mode routes through the env reward") {
    Rng init(71);
    EnsembleConfig cfg = small_config();
    cfg.ensemble_size = 1;
    cfg.elite_count = 1;
    cfg.learned_reward = false;
    EnsembleModel model(1, 1, cfg, init);
    model.set_elites({0});
    model.set_analytic_reward([](const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                 const Eigen::VectorXd& sp) {
        return sp(0) - s(0) + 100.0 * a(0);
    });
    Eigen::VectorXd s(1), a(1);
    s << 0.5;
    a << 0.25;
    auto [next, reward] = model.predict_mean(s, a);
    CHECK(reward == doctest::Approx(next(0) - 0.5 + 25.0).epsilon(1e-12));
}

TEST_CASE("reward source: analytic mode without a reward function is a config error") {
    Rng init(81);
    EnsembleConfig cfg = small_config();
    cfg.ensemble_size = 1;
    cfg.elite_count = 1;
    cfg.learned_reward = false;
    EnsembleModel model(1, 1, cfg, init);
    model.set_elites({0});
    Eigen::VectorXd s(1), a(1);
    s << 0.0;
    a << 0.0;
    CHECK_THROWS_AS((void)model.predict_mean(s, a), ConfigurationError);
}

TEST_CASE("checkpoint: ensemble round trip preserves parameters and elites") {
    Rng rng(91);
    ReplayBuffer buf = linear_system_buffer(400, 1, rng);
    EnsembleConfig cfg = small_config();
    cfg.min_buffer = 250;
    Rng init(92);
    EnsembleModel model(1, 1, cfg, init);
    Rng train_rng(93);
    model.train(buf, 5, train_rng);
    std::stringstream ss;
    model.save(ss);
    EnsembleModel loaded = EnsembleModel::load(ss);
    CHECK(loaded.elites() == model.elites());
    Eigen::VectorXd s(1), a(1);
    s << 0.37;
    a << -0.81;
    auto p1 = model.predict_mean(s, a);
    auto p2 = loaded.predict_mean(s, a);
    CHECK(p1.first == p2.first); // bit-exact round trip
    CHECK(p1.second == p2.second);
}

TEST_CASE("analytic dynamics wraps an environment as a perfect model") {
    auto env = make_env("pendulum");
    AnalyticDynamics dyn(*env);
    CHECK(dyn.num_samplers() == 1);
    Eigen::MatrixXd s(2, 2), a(2, 1);
    s << 1.0, 0.0, -0.5, 0.3;
    a << 0.5, -1.0;
    Eigen::MatrixXd next;
    Eigen::VectorXd r;
    Rng rng(1);
    dyn.step_batch(0, s, a, rng, next, r);
    for (int i = 0; i < 2; ++i) {
        Eigen::VectorXd expected =
            env->dynamics(s.row(i).transpose(), a.row(i).transpose());
        CHECK((next.row(i).transpose() - expected).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(r(i) == doctest::Approx(PendulumEnv::reward(s.row(i).transpose(),
                                                          a.row(i).transpose())));
    }
}

TEST_CASE("one-step elite error decreases over training on a noiseless system") {
    Rng rng(101);
    ReplayBuffer buf = linear_system_buffer(800, 2, rng);
    EnsembleConfig cfg = small_config();
    Rng init(102);
    EnsembleModel model(2, 2, cfg, init);
    Rng train_rng(103);
    // Successive short train calls; validation error should trend down.
    std::vector<double> errs;
    for (int round = 0; round < 4; ++round)
        errs.push_back(model.train(buf, 5, train_rng).elite_val_l2);
    CHECK(errs.back() < errs.front());
}
