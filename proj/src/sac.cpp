#include "mopac/sac.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "mopac/errors.hpp"

namespace mopac {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178; // 0.5 * log(2*pi)
constexpr double kSquashEps = 1e-12;

Eigen::MatrixXd concat_cols(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a;
    out.rightCols(b.cols()) = b;
    return out;
}

// Row-wise log-density of the squashed sample given pre-tanh values.
// log pi(a) = sum_d [ logN(u_d) - log(half_d * (1 - tanh(u_d)^2) + eps) ]
Eigen::VectorXd squashed_log_prob(const Eigen::MatrixXd& noise,
                                  const Eigen::MatrixXd& log_std,
                                  const Eigen::MatrixXd& tanh_u,
                                  const Eigen::VectorXd& half) {
    const Eigen::Index b = noise.rows();
    Eigen::ArrayXXd gauss =
        -0.5 * noise.array().square() - log_std.array() - kHalfLog2Pi;
    Eigen::ArrayXXd jac =
        ((1.0 - tanh_u.array().square()).rowwise() * half.transpose().array() +
         kSquashEps)
            .log();
    Eigen::VectorXd out(b);
    for (Eigen::Index i = 0; i < b; ++i)
        out(i) = gauss.row(i).sum() - jac.row(i).sum();
    return out;
}

} // namespace

double ActorCritic::alpha() const { return std::exp(log_alpha); }

ActorCritic make_actor_critic(int state_dim, int action_dim,
                              const Eigen::VectorXd& action_low,
                              const Eigen::VectorXd& action_high,
                              const SacConfig& cfg, Rng& rng) {
    if (action_low.size() != action_dim || action_high.size() != action_dim)
        throw ContractViolation("make_actor_critic: action bound dims mismatch");
    if (((action_high - action_low).array() <= 0.0).any())
        throw ContractViolation("make_actor_critic: action_low must be < action_high");
    ActorCritic ac;
    ac.policy = make_gaussian_head(state_dim, cfg.hidden, action_dim, cfg.activation,
                                   rng, true, cfg.log_std_min, cfg.log_std_max);
    std::vector<int> q_sizes;
    q_sizes.push_back(state_dim + action_dim);
    for (int h : cfg.hidden) q_sizes.push_back(h);
    q_sizes.push_back(1);
    ac.q1 = make_dense_net(q_sizes, cfg.activation, Activation::Identity, rng);
    ac.q2 = make_dense_net(q_sizes, cfg.activation, Activation::Identity, rng);
    std::vector<int> v_sizes;
    v_sizes.push_back(state_dim);
    for (int h : cfg.hidden) v_sizes.push_back(h);
    v_sizes.push_back(1);
    ac.v = make_dense_net(v_sizes, cfg.activation, Activation::Identity, rng);
    ac.v_target = ac.v;
    ac.q1_target = ac.q1;
    ac.q2_target = ac.q2;
    ac.log_alpha = std::log(cfg.alpha);
    ac.action_center = 0.5 * (action_low + action_high);
    ac.action_half = 0.5 * (action_high - action_low);
    return ac;
}

ActionSample sample_action(const ActorCritic& ac, const Eigen::VectorXd& state,
                           Rng& rng) {
    GaussianHead::Sample s = ac.policy.sample(state.transpose(), rng);
    Eigen::MatrixXd tanh_u = s.value.array().tanh();
    ActionSample out;
    out.action = ac.action_center +
                 ac.action_half.cwiseProduct(tanh_u.row(0).transpose());
    out.log_prob =
        squashed_log_prob(s.noise, s.out.log_std, tanh_u, ac.action_half)(0);
    return out;
}

Eigen::VectorXd mean_action(const ActorCritic& ac, const Eigen::VectorXd& state) {
    GaussianHead::Output out = ac.policy.forward(state.transpose());
    return ac.action_center +
           ac.action_half.cwiseProduct(out.mean.row(0).transpose().array().tanh().matrix());
}

double log_prob_of(const ActorCritic& ac, const Eigen::VectorXd& state,
                   const Eigen::VectorXd& action) {
    GaussianHead::Output out = ac.policy.forward(state.transpose());
    const int d = ac.action_dim();
    double lp = 0.0;
    for (int k = 0; k < d; ++k) {
        double t = (action(k) - ac.action_center(k)) / ac.action_half(k);
        t = std::clamp(t, -1.0 + 1e-12, 1.0 - 1e-12);
        const double u = std::atanh(t);
        const double sigma = std::exp(out.log_std(0, k));
        const double z = (u - out.mean(0, k)) / sigma;
        lp += -0.5 * z * z - out.log_std(0, k) - kHalfLog2Pi;
        lp -= std::log(ac.action_half(k) * (1.0 - t * t) + kSquashEps);
    }
    return lp;
}

namespace {

void scalar_adam(double grad, double lr, double& param, double& m, double& v,
                 long& step) {
    step += 1;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1.0 - std::pow(0.9, static_cast<double>(step)));
    const double vh = v / (1.0 - std::pow(0.999, static_cast<double>(step)));
    param -= lr * mh / (std::sqrt(vh) + 1e-8);
}

} // namespace

PolicyStep compute_policy_step(const ActorCritic& ac, const Eigen::MatrixXd& states,
                               Rng& rng, double alpha) {
    const int b = static_cast<int>(states.rows());
    const int adim = ac.action_dim();
    const double inv_b = 1.0 / static_cast<double>(b);

    ForwardCache policy_cache;
    GaussianHead::Sample pol = ac.policy.sample(states, rng, &policy_cache);
    Eigen::MatrixXd tanh_u = pol.value.array().tanh();
    Eigen::MatrixXd fresh_actions =
        (tanh_u.array().rowwise() * ac.action_half.transpose().array()).matrix();
    fresh_actions.rowwise() += ac.action_center.transpose();
    Eigen::VectorXd log_probs =
        squashed_log_prob(pol.noise, pol.out.log_std, tanh_u, ac.action_half);
    Eigen::MatrixXd sa_fresh = concat_cols(states, fresh_actions);

    ForwardCache q1_cache, q2_cache;
    Eigen::VectorXd q1f = forward(ac.q1, sa_fresh, &q1_cache).col(0);
    Eigen::VectorXd q2f = forward(ac.q2, sa_fresh, &q2_cache).col(0);
    Eigen::VectorXd qmin = q1f.cwiseMin(q2f);

    PolicyStep step;
    step.loss = (alpha * log_probs - qmin).mean();
    step.mean_log_prob = log_probs.mean();
    if (!std::isfinite(step.loss))
        throw TrainingDivergence("compute_policy_step: non-finite policy loss");

    // dQmin/da~ via input gradients of whichever critic attains the min.
    Eigen::MatrixXd sel1 = Eigen::MatrixXd::Zero(b, 1);
    Eigen::MatrixXd sel2 = Eigen::MatrixXd::Zero(b, 1);
    for (int i = 0; i < b; ++i)
        (q1f(i) <= q2f(i) ? sel1(i, 0) : sel2(i, 0)) = 1.0;
    Eigen::MatrixXd dq_da = backward(ac.q1, q1_cache, sel1).input.rightCols(adim) +
                            backward(ac.q2, q2_cache, sel2).input.rightCols(adim);

    // a~_d = center + half_d * tanh(u_d); u_d = mean_d + sigma_d * noise_d.
    Eigen::ArrayXXd sech2 = 1.0 - tanh_u.array().square();
    Eigen::ArrayXXd da_du = sech2.rowwise() * ac.action_half.transpose().array();
    // d log pi / du, exact derivative of the eps-regularized jacobian term.
    Eigen::ArrayXXd half_rep = ac.action_half.transpose().array().replicate(b, 1);
    Eigen::ArrayXXd dlogpi_du =
        2.0 * tanh_u.array() * da_du / (sech2 * half_rep + kSquashEps);
    Eigen::ArrayXXd sigma_noise = pol.out.log_std.array().exp() * pol.noise.array();

    Eigen::ArrayXXd dL_du = (alpha * dlogpi_du - dq_da.array() * da_du) * inv_b;
    Eigen::MatrixXd d_mean = dL_du.matrix();
    // log std enters through u = mean + sigma * noise and through the
    // -log sigma term of log pi.
    Eigen::MatrixXd d_log_std = (dL_du * sigma_noise - alpha * inv_b).matrix();
    step.grads = backward(ac.policy.net, policy_cache,
                          ac.policy.output_gradient(pol.out, d_mean, d_log_std));
    return step;
}

SacLossReport sac_update(ActorCritic& ac, const std::vector<Transition>& batch,
                         const SacConfig& cfg, Rng& rng) {
    if (batch.empty()) throw ContractViolation("sac_update: empty batch");
    const int b = static_cast<int>(batch.size());
    const int sdim = ac.state_dim();
    const int adim = ac.action_dim();
    Eigen::MatrixXd states(b, sdim), actions(b, adim), next_states(b, sdim);
    Eigen::VectorXd rewards(b), not_done(b);
    for (int i = 0; i < b; ++i) {
        const Transition& t = batch[i];
        if (t.state.size() != sdim || t.action.size() != adim)
            throw ContractViolation("sac_update: transition dims mismatch");
        states.row(i) = t.state.transpose();
        actions.row(i) = t.action.transpose();
        next_states.row(i) = t.next_state.transpose();
        rewards(i) = t.reward;
        not_done(i) = t.done ? 0.0 : 1.0;
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    const double alpha = ac.alpha();
    SacLossReport report;
    report.alpha = alpha;

    // Fresh reparameterized actions at s, shared by the V and policy losses.
    ForwardCache policy_cache;
    GaussianHead::Sample pol = ac.policy.sample(states, rng, &policy_cache);
    Eigen::MatrixXd tanh_u = pol.value.array().tanh();
    Eigen::MatrixXd fresh_actions =
        (tanh_u.array().rowwise() * ac.action_half.transpose().array()).matrix();
    fresh_actions.rowwise() += ac.action_center.transpose();
    Eigen::VectorXd log_probs =
        squashed_log_prob(pol.noise, pol.out.log_std, tanh_u, ac.action_half);
    report.mean_log_prob = log_probs.mean();

    Eigen::MatrixXd sa_fresh = concat_cols(states, fresh_actions);

    // --- V step: V(s) -> min(Q1,Q2)(s, a~) - alpha * log pi(a~|s)
    {
        Eigen::VectorXd q1f = forward(ac.q1, sa_fresh).col(0);
        Eigen::VectorXd q2f = forward(ac.q2, sa_fresh).col(0);
        Eigen::VectorXd target = q1f.cwiseMin(q2f) - alpha * log_probs;
        ForwardCache v_cache;
        Eigen::VectorXd v_pred = forward(ac.v, states, &v_cache).col(0);
        Eigen::VectorXd err = v_pred - target;
        report.v_loss = 0.5 * err.squaredNorm() * inv_b;
        if (!std::isfinite(report.v_loss))
            throw TrainingDivergence("sac_update: non-finite V loss");
        Gradients g = backward(ac.v, v_cache, (err * inv_b).eval());
        adam_step(ac.v, g, cfg.lr, ac.v_adam);
    }

    // --- Q step: Qi(s, a) -> r + gamma * (1 - done) * V_target(s')
    {
        Eigen::VectorXd v_next = forward(ac.v_target, next_states).col(0);
        Eigen::VectorXd y =
            rewards + cfg.gamma * not_done.cwiseProduct(v_next);
        Eigen::MatrixXd sa = concat_cols(states, actions);
        ForwardCache q1_cache, q2_cache;
        Eigen::VectorXd q1_pred = forward(ac.q1, sa, &q1_cache).col(0);
        Eigen::VectorXd q2_pred = forward(ac.q2, sa, &q2_cache).col(0);
        Eigen::VectorXd e1 = q1_pred - y, e2 = q2_pred - y;
        report.q1_loss = 0.5 * e1.squaredNorm() * inv_b;
        report.q2_loss = 0.5 * e2.squaredNorm() * inv_b;
        if (!std::isfinite(report.q1_loss) || !std::isfinite(report.q2_loss))
            throw TrainingDivergence("sac_update: non-finite Q loss");
        Gradients g1 = backward(ac.q1, q1_cache, (e1 * inv_b).eval());
        Gradients g2 = backward(ac.q2, q2_cache, (e2 * inv_b).eval());
        adam_step(ac.q1, g1, cfg.lr, ac.q1_adam);
        adam_step(ac.q2, g2, cfg.lr, ac.q2_adam);
    }

    // --- Policy step: minimize E[alpha * log pi(a~|s) - min(Q1,Q2)(s, a~)],
    // reparameterized, against the just-updated critics.
    {
        PolicyStep step = compute_policy_step(ac, states, rng, alpha);
        report.policy_loss = step.loss;
        adam_step(ac.policy.net, step.grads, cfg.lr, ac.policy_adam);
    }

    // --- Optional temperature step on log alpha.
    if (cfg.alpha_autotune) {
        const double target_h =
            cfg.target_entropy != 0.0 ? cfg.target_entropy : -static_cast<double>(adim);
        const double grad = -(report.mean_log_prob + target_h);
        scalar_adam(grad, cfg.lr, ac.log_alpha, ac.alpha_m, ac.alpha_v, ac.alpha_step);
    }

    polyak_update(ac.v_target, ac.v, cfg.tau);
    polyak_update(ac.q1_target, ac.q1, cfg.tau);
    polyak_update(ac.q2_target, ac.q2, cfg.tau);
    return report;
}

double value_td_update(ActorCritic& ac, const std::vector<Transition>& batch,
                       const SacConfig& cfg) {
    if (batch.empty()) throw ContractViolation("value_td_update: empty batch");
    const int b = static_cast<int>(batch.size());
    const int sdim = ac.state_dim();
    Eigen::MatrixXd states(b, sdim), next_states(b, sdim);
    Eigen::VectorXd rewards(b), not_done(b);
    for (int i = 0; i < b; ++i) {
        states.row(i) = batch[i].state.transpose();
        next_states.row(i) = batch[i].next_state.transpose();
        rewards(i) = batch[i].reward;
        not_done(i) = batch[i].done ? 0.0 : 1.0;
    }
    const double inv_b = 1.0 / static_cast<double>(b);
    Eigen::VectorXd y =
        rewards + cfg.gamma * not_done.cwiseProduct(forward(ac.v_target, next_states).col(0));
    ForwardCache cache;
    Eigen::VectorXd pred = forward(ac.v, states, &cache).col(0);
    Eigen::VectorXd err = pred - y;
    const double loss = 0.5 * err.squaredNorm() * inv_b;
    if (!std::isfinite(loss))
        throw TrainingDivergence("value_td_update: non-finite V loss");
    Gradients g = backward(ac.v, cache, (err * inv_b).eval());
    adam_step(ac.v, g, cfg.lr, ac.v_adam);
    polyak_update(ac.v_target, ac.v, cfg.tau);
    return loss;
}

namespace {

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ContractViolation("load_actor_critic: truncated stream");
    return v;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd read_vector(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    Eigen::VectorXd v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ContractViolation("load_actor_critic: truncated stream");
    return v;
}

constexpr std::uint32_t kAcMagic = 0x4d414331u; // "MAC1"

} // namespace

void save_actor_critic(std::ostream& out, const ActorCritic& ac) {
    write_pod(out, kAcMagic);
    save_net(out, ac.policy.net);
    write_pod<double>(out, ac.policy.log_std_min);
    write_pod<double>(out, ac.policy.log_std_max);
    save_net(out, ac.q1);
    save_net(out, ac.q2);
    save_net(out, ac.v);
    save_net(out, ac.v_target);
    save_net(out, ac.q1_target);
    save_net(out, ac.q2_target);
    write_pod<double>(out, ac.log_alpha);
    write_vector(out, ac.action_center);
    write_vector(out, ac.action_half);
}

ActorCritic load_actor_critic(std::istream& in) {
    if (read_pod<std::uint32_t>(in) != kAcMagic)
        throw ContractViolation("load_actor_critic: bad magic");
    ActorCritic ac;
    ac.policy.net = load_net(in);
    ac.policy.log_std_min = read_pod<double>(in);
    ac.policy.log_std_max = read_pod<double>(in);
    ac.policy.state_dependent_std = true;
    ac.q1 = load_net(in);
    ac.q2 = load_net(in);
    ac.v = load_net(in);
    ac.v_target = load_net(in);
    ac.q1_target = load_net(in);
    ac.q2_target = load_net(in);
    ac.log_alpha = read_pod<double>(in);
    ac.action_center = read_vector(in);
    ac.action_half = read_vector(in);
    ac.policy.dim = static_cast<int>(ac.action_center.size());
    return ac;
}

} // namespace mopac
