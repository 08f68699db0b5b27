// Criteria 1-5: gradient oracle, softmin suite, bound sweeps, model learning.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>

#include "mopac/bounds.hpp"
#include "mopac/envs.hpp"
#include "mopac/model.hpp"
#include "mopac/mpr.hpp"
#include "mopac/net.hpp"
#include "mopac/replay.hpp"
#include "mopac/tabular.hpp"

namespace acceptance {

using namespace mopac;

// --- Criterion 1: analytic gradients vs central finite differences on 100
// random network/input probes (<= 3 layers, <= 64 units), rel. error 1e-4.
bool criterion1() {
    Rng rng(20240);
    int failures = 0;
    double worst = 0.0;
    for (int probe = 0; probe < 100; ++probe) {
        const int depth = 1 + static_cast<int>(rng.index(3));
        std::vector<int> sizes;
        sizes.push_back(1 + static_cast<int>(rng.index(8)));
        for (int l = 0; l < depth; ++l) sizes.push_back(1 + static_cast<int>(rng.index(64)));
        const Activation acts[] = {Activation::Tanh, Activation::Relu,
                                   Activation::Identity};
        const Activation hidden = acts[rng.index(3)];
        const Activation out_act = acts[rng.index(3)];
        DenseNet net = make_dense_net(sizes, hidden, out_act, rng);

        // Input probe; rejected if any relu pre-activation sits on the kink,
        // where finite differences are not meaningful.
        Eigen::VectorXd x(sizes.front());
        bool ok_input = false;
        for (int attempt = 0; attempt < 50 && !ok_input; ++attempt) {
            for (int i = 0; i < x.size(); ++i) x(i) = rng.uniform(-2.0, 2.0);
            ok_input = true;
            ForwardCache cache;
            forward(net, x.transpose(), &cache);
            for (int l = 0; l < net.num_layers(); ++l)
                if (net.activations[l] == Activation::Relu &&
                    cache.pre[l].cwiseAbs().minCoeff() < 1e-3)
                    ok_input = false;
        }
        if (!ok_input) continue;

        Eigen::VectorXd c(sizes.back());
        for (int i = 0; i < c.size(); ++i) c(i) = rng.uniform(-1.0, 1.0);

        Gradients analytic = backward(net, x.transpose(), c.transpose());
        const double h = 1e-5;
        auto loss = [&](const DenseNet& n) { return c.dot(forward1(n, x)); };
        double probe_worst = 0.0;
        DenseNet work = net;
        for (int l = 0; l < net.num_layers(); ++l) {
            for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) {
                double& p = work.weights[l].reshaped()(i);
                const double saved = p;
                p = saved + h;
                const double up = loss(work);
                p = saved - h;
                const double down = loss(work);
                p = saved;
                const double fd = (up - down) / (2.0 * h);
                const double an = analytic.weights[l].reshaped()(i);
                probe_worst = std::max(
                    probe_worst,
                    std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3}));
            }
            for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
                double& p = work.biases[l](i);
                const double saved = p;
                p = saved + h;
                const double up = loss(work);
                p = saved - h;
                const double down = loss(work);
                p = saved;
                const double fd = (up - down) / (2.0 * h);
                const double an = analytic.biases[l](i);
                probe_worst = std::max(
                    probe_worst,
                    std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3}));
            }
        }
        worst = std::max(worst, probe_worst);
        if (probe_worst >= 1e-4) ++failures;
    }
    std::printf("  criterion 1: worst relative error %.3g, %d/100 probes failing\n",
                worst, failures);
    return failures == 0;
}

// --- Criterion 2: softmin weight suite.
bool criterion2() {
    bool ok = true;

    // Worked example: lambda = 1, costs [0, ln 3] -> [0.75, 0.25].
    Eigen::VectorXd costs(2);
    costs << 0.0, std::log(3.0);
    Eigen::VectorXd w = importance_weights(costs, 1.0);
    ok &= std::abs(w(0) - 0.75) <= 1e-9 && std::abs(w(1) - 0.25) <= 1e-9;
    ok &= std::abs(w.sum() - 1.0) <= 1e-10;

    // Random cost vectors: sum-to-one and shift invariance.
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd c(16);
        for (int i = 0; i < 16; ++i) c(i) = rng.uniform(-5.0, 5.0);
        const double lambda = std::exp(rng.uniform(-2.0, 2.0));
        Eigen::VectorXd w1 = importance_weights(c, lambda);
        ok &= std::abs(w1.sum() - 1.0) <= 1e-10;
        Eigen::VectorXd w2 =
            importance_weights((c.array() + 123.456).matrix(), lambda);
        ok &= (w1 - w2).cwiseAbs().maxCoeff() <= 1e-12;
        ok &= w1.minCoeff() >= 0.0 && w1.maxCoeff() <= 1.0 + 1e-15;
    }

    // lambda -> 0: concentration on the argmin.
    Eigen::VectorXd c(8);
    c << 3.0, 1.0, 4.0, 1.5, 9.0, 2.6, 5.0, 3.5;
    Eigen::VectorXd w0 = importance_weights(c, 1e-6);
    ok &= w0(1) >= 0.999;

    // lambda -> inf: uniformity.
    Eigen::VectorXd winf = importance_weights(c, 1e6);
    ok &= (winf.array() - 1.0 / 8.0).abs().maxCoeff() <= 1e-3;

    // Single rollout gets weight one.
    Eigen::VectorXd single(1);
    single << 2.5;
    ok &= importance_weights(single, 0.7)(0) == 1.0;
    return ok;
}

// --- Criterion 3: 200-scenario sweep of the finite-horizon bound, plus the
// zero-error corner and the worked bound value.
bool criterion3() {
    bool ok = true;

    // Worked value: gamma=0.99, H=5, eps_v=0.1, r_max=1, eps_f=0.01.
    const double bound = theorem1_bound(0.99, 5, 0.1, 0.01, 1.0);
    // Direct arithmetic evaluation of the closed form.
    const double gh = std::pow(0.99, 5);
    const double expected = 2.0 * gh * 0.1 / (1.0 - gh) + 1.0 * (1.0 - gh) / 0.01 * 0.01;
    ok &= std::abs(bound - expected) < 1e-12;
    ok &= std::abs(bound - 3.930) < 5e-4; // reproduced to 3 decimals
    std::printf("  criterion 3: worked bound value %.6f\n", bound);

    // Zero-error corner.
    Rng rng(4);
    BoundScenario corner;
    corner.mdp = random_dense_mdp(6, 3, 0.95, rng);
    corner.epsilon_f = 0.0;
    corner.epsilon_v = 0.0;
    corner.horizon = 3;
    corner.seed = 17;
    Theorem1Report corner_rep = check_theorem1(corner);
    ok &= corner_rep.gap <= 1e-9;
    std::printf("  criterion 3: zero-error corner gap %.3g\n", corner_rep.gap);

    // 200 random scenarios.
    SweepConfig cfg;
    cfg.count = 200;
    cfg.seed = 7;
    auto rows = run_theorem1_sweep(cfg);
    int satisfied = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        satisfied += r.report.satisfied ? 1 : 0;
        min_margin = std::min(min_margin, r.report.bound_eq2 - r.report.gap);
    }
    std::printf("  criterion 3: %d/200 scenarios satisfied, min margin %.4f\n",
                satisfied, min_margin);
    ok &= satisfied == 200;
    return ok;
}

// --- Criterion 4: 100 random true/model pairs satisfy the return-gap lower
// bound.
bool criterion4() {
    SweepConfig cfg;
    cfg.count = 100;
    cfg.seed = 11;
    auto rows = run_lemma2_sweep(cfg);
    int satisfied = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        satisfied += r.report.satisfied ? 1 : 0;
        min_margin = std::min(min_margin, r.report.gap - r.report.bound);
    }
    std::printf("  criterion 4: %d/100 pairs satisfied, min margin %.4f\n", satisfied,
                min_margin);
    return satisfied == 100;
}

// --- Criterion 5: ensemble learns the linear system and elite selection is
// the exact argmin set.
bool criterion5() {
    bool ok = true;

    // Elite mask on a fixed loss vector.
    const std::vector<double> losses = {0.3, 0.1, 0.5, 0.2};
    const std::vector<int> elites = EnsembleModel::select_elites(losses, 2);
    ok &= elites == std::vector<int>{1, 3};

    // Noiseless linear system s' = s + a with 1000 samples.
    const int sdim = 3, adim = 3;
    Rng rng(2025);
    ReplayBuffer buffer(2000, sdim, adim);
    for (int i = 0; i < 1000; ++i) {
        Transition t;
        t.state = Eigen::VectorXd::NullaryExpr(sdim, [&](Eigen::Index) {
            return rng.uniform(-1.0, 1.0);
        });
        t.action = Eigen::VectorXd::NullaryExpr(adim, [&](Eigen::Index) {
            return rng.uniform(-1.0, 1.0);
        });
        t.next_state = t.state + t.action;
        t.reward = 0.1 * t.action.sum();
        t.done = false;
        buffer.push(t);
    }
    EnsembleConfig cfg;
    cfg.ensemble_size = 7;
    cfg.elite_count = 5;
    cfg.hidden = {32, 32};
    cfg.lr = 3e-3;
    cfg.batch_size = 64;
    cfg.patience = 10;
    Rng init(77);
    EnsembleModel model(sdim, adim, cfg, init);
    Rng train_rng(78);
    ModelTrainReport report = model.train(buffer, 50, train_rng);
    std::printf("  criterion 5: elite validation L2 %.3g after <=50 epochs\n",
                report.elite_val_l2);
    ok &= report.elite_val_l2 < 1e-3;
    return ok;
}

} // namespace acceptance
