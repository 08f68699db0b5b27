#include "mopac/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "mopac/errors.hpp"

namespace mopac {

void Normalizer::fit(const Eigen::MatrixXd& x) {
    mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    std = (centered.array().square().colwise().mean()).sqrt();
    // Constant dimensions pass through unscaled.
    for (Eigen::Index d = 0; d < std.size(); ++d)
        if (std(d) < 1e-8) std(d) = 1.0;
}

Eigen::MatrixXd Normalizer::apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean.transpose()).array().rowwise() /
           std.transpose().array();
}

EnsembleModel::EnsembleModel(int state_dim, int action_dim, const EnsembleConfig& cfg,
                             Rng& rng)
    : state_dim_(state_dim), action_dim_(action_dim), cfg_(cfg) {
    if (cfg.ensemble_size < 1 || cfg.elite_count < 1 ||
        cfg.elite_count > cfg.ensemble_size)
        throw ContractViolation("EnsembleModel: bad ensemble/elite sizes");
    const int target_dim = state_dim + 1; // state delta plus reward
    for (int i = 0; i < cfg.ensemble_size; ++i) {
        members_.push_back(make_gaussian_head(state_dim + action_dim, cfg.hidden,
                                              target_dim, cfg.activation, rng, true,
                                              cfg.log_std_min, cfg.log_std_max));
        adam_.emplace_back();
    }
    normalizer_.mean = Eigen::VectorXd::Zero(state_dim + action_dim);
    normalizer_.std = Eigen::VectorXd::Ones(state_dim + action_dim);
}

std::vector<int> EnsembleModel::select_elites(const std::vector<double>& val_l2, int k) {
    std::vector<int> order(val_l2.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return val_l2[a] < val_l2[b]; });
    order.resize(std::min<std::size_t>(k, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

void EnsembleModel::set_elites(const std::vector<int>& elites) {
    for (int e : elites)
        if (e < 0 || e >= ensemble_size())
            throw ContractViolation("set_elites: index out of range");
    elites_ = elites;
    trained_ = !elites.empty();
}

ModelTrainReport EnsembleModel::train(const ReplayBuffer& env_buffer, int epochs,
                                      Rng& rng) {
    const std::size_t n = env_buffer.size();
    if (n < cfg_.min_buffer)
        throw InsufficientData("EnsembleModel::train: " + std::to_string(n) +
                               " transitions < required " +
                               std::to_string(cfg_.min_buffer));
    const int in_dim = state_dim_ + action_dim_;
    const int out_dim = state_dim_ + 1;
    Eigen::MatrixXd inputs(n, in_dim);
    Eigen::MatrixXd targets(n, out_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const Transition& t = env_buffer.at(i);
        inputs.row(i).head(state_dim_) = t.state.transpose();
        inputs.row(i).tail(action_dim_) = t.action.transpose();
        targets.row(i).head(state_dim_) = (t.next_state - t.state).transpose();
        targets(i, state_dim_) = t.reward;
    }
    normalizer_.fit(inputs);
    Eigen::MatrixXd norm_inputs = normalizer_.apply(inputs);

    // Shared holdout split; members bootstrap from the training part only.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    const std::size_t n_holdout =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                     cfg_.holdout_fraction * static_cast<double>(n))));
    const std::size_t n_train = n - n_holdout;
    if (n_train == 0) throw InsufficientData("EnsembleModel::train: no training rows");
    Eigen::MatrixXd hold_x(n_holdout, in_dim), hold_y(n_holdout, out_dim);
    for (std::size_t i = 0; i < n_holdout; ++i) {
        hold_x.row(i) = norm_inputs.row(perm[n_train + i]);
        hold_y.row(i) = targets.row(perm[n_train + i]);
    }

    ModelTrainReport report;
    report.train_nll.assign(members_.size(), 0.0);
    report.val_l2.assign(members_.size(), 0.0);
    report.epochs_run.assign(members_.size(), 0);

    const double denom = static_cast<double>(n_holdout) * out_dim;
    for (std::size_t m = 0; m < members_.size(); ++m) {
        GaussianHead& head = members_[m];
        AdamState& adam = adam_[m];

        std::vector<std::size_t> boot(n_train);
        for (auto& idx : boot) idx = perm[rng.index(n_train)];

        auto validation_l2 = [&]() {
            GaussianHead::Output out = head.forward(hold_x);
            return (out.mean - hold_y).squaredNorm() / denom;
        };

        double best_l2 = std::numeric_limits<double>::infinity();
        DenseNet best_net = head.net;
        int since_best = 0;
        double last_nll = 0.0;
        int epoch = 0;
        for (; epoch < epochs; ++epoch) {
            for (std::size_t i = n_train; i > 1; --i)
                std::swap(boot[i - 1], boot[rng.index(i)]);
            double epoch_nll = 0.0;
            std::size_t batches = 0;
            for (std::size_t start = 0; start < n_train;
                 start += static_cast<std::size_t>(cfg_.batch_size)) {
                const std::size_t b =
                    std::min<std::size_t>(cfg_.batch_size, n_train - start);
                Eigen::MatrixXd bx(b, in_dim), by(b, out_dim);
                for (std::size_t i = 0; i < b; ++i) {
                    bx.row(i) = norm_inputs.row(boot[start + i]);
                    by.row(i) = targets.row(boot[start + i]);
                }
                ForwardCache cache;
                GaussianHead::Output out = head.forward(bx, &cache);
                Eigen::ArrayXXd inv_std = (-out.log_std).array().exp();
                Eigen::ArrayXXd z = (out.mean - by).array() * inv_std;
                const double nll =
                    (0.5 * z.square() + out.log_std.array()).sum() / static_cast<double>(b);
                if (!std::isfinite(nll))
                    throw TrainingDivergence("EnsembleModel::train: non-finite NLL");
                epoch_nll += nll;
                ++batches;
                const double scale = 1.0 / static_cast<double>(b);
                Eigen::MatrixXd d_mean = (z * inv_std).matrix() * scale;
                Eigen::MatrixXd d_log_std = ((1.0 - z.square()).matrix()) * scale;
                Eigen::MatrixXd out_grad = head.output_gradient(out, d_mean, d_log_std);
                Gradients grads = backward(head.net, cache, out_grad);
                adam_step(head.net, grads, cfg_.lr, adam);
            }
            last_nll = batches ? epoch_nll / static_cast<double>(batches) : 0.0;
            const double l2 = validation_l2();
            if (l2 < best_l2 * (1.0 - 1e-4)) {
                best_l2 = l2;
                best_net = head.net;
                since_best = 0;
            } else {
                ++since_best;
                if (since_best >= cfg_.patience) {
                    ++epoch;
                    break;
                }
            }
        }
        head.net = best_net;
        report.train_nll[m] = last_nll;
        report.val_l2[m] = std::isfinite(best_l2) ? best_l2 : validation_l2();
        report.epochs_run[m] = epoch;
    }

    elites_ = select_elites(report.val_l2, cfg_.elite_count);
    report.elites = elites_;
    double sum = 0.0;
    for (int e : elites_) sum += report.val_l2[e];
    report.elite_val_l2 = sum / static_cast<double>(elites_.size());
    trained_ = true;
    return report;
}

int EnsembleModel::num_samplers() const {
    return trained_ ? static_cast<int>(elites_.size()) : 0;
}

void EnsembleModel::member_raw_output(int member_index, const Eigen::MatrixXd& states,
                                      const Eigen::MatrixXd& actions,
                                      GaussianHead::Output& out) const {
    Eigen::MatrixXd x(states.rows(), state_dim_ + action_dim_);
    x.leftCols(state_dim_) = states;
    x.rightCols(action_dim_) = actions;
    out = members_[member_index].forward(normalizer_.apply(x));
}

double EnsembleModel::reward_from(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                  const Eigen::VectorXd& sp, double learned) const {
    if (cfg_.learned_reward) return learned;
    if (!analytic_reward_)
        throw ConfigurationError(
            "EnsembleModel: analytic reward mode requested but no reward function set");
    return analytic_reward_(s, a, sp);
}

std::pair<Eigen::VectorXd, double> EnsembleModel::predict(
    const Eigen::VectorXd& state, const Eigen::VectorXd& action, Rng& rng,
    int pinned_elite) const {
    if (!trained_) throw ContractViolation("EnsembleModel::predict: model not trained");
    if (!state.allFinite() || !action.allFinite())
        throw ContractViolation("EnsembleModel::predict: non-finite input");
    const int pick = pinned_elite >= 0
                         ? elites_.at(pinned_elite)
                         : elites_[rng.index(elites_.size())];
    GaussianHead::Output out;
    member_raw_output(pick, state.transpose(), action.transpose(), out);
    Eigen::ArrayXd std = out.log_std.row(0).transpose().array().exp();
    Eigen::VectorXd draw(state_dim_ + 1);
    for (int d = 0; d < state_dim_ + 1; ++d)
        draw(d) = out.mean(0, d) + std(d) * rng.normal();
    Eigen::VectorXd next = state + draw.head(state_dim_);
    if (!next.allFinite())
        throw TrainingDivergence("EnsembleModel::predict: non-finite prediction");
    const double r = reward_from(state, action, next, draw(state_dim_));
    return {next, r};
}

std::pair<Eigen::VectorXd, double> EnsembleModel::predict_mean(
    const Eigen::VectorXd& state, const Eigen::VectorXd& action,
    int pinned_elite) const {
    if (!trained_) throw ContractViolation("EnsembleModel::predict_mean: model not trained");
    const int pick = pinned_elite >= 0 ? elites_.at(pinned_elite) : elites_.front();
    GaussianHead::Output out;
    member_raw_output(pick, state.transpose(), action.transpose(), out);
    Eigen::VectorXd next = state + out.mean.row(0).head(state_dim_).transpose();
    const double r = reward_from(state, action, next, out.mean(0, state_dim_));
    return {next, r};
}

void EnsembleModel::step_batch(int pin, const Eigen::MatrixXd& states,
                               const Eigen::MatrixXd& actions, Rng& rng,
                               Eigen::MatrixXd& next_states,
                               Eigen::VectorXd& rewards) const {
    if (!trained_) throw ContractViolation("EnsembleModel::step_batch: model not trained");
    const Eigen::Index b = states.rows();
    next_states.resize(b, state_dim_);
    rewards.resize(b);

    std::vector<int> member_of_row(b, elites_.at(pin));
    if (cfg_.pin_per_step)
        for (Eigen::Index i = 0; i < b; ++i)
            member_of_row[i] = elites_[rng.index(elites_.size())];

    // Evaluate each needed member on the full batch and gather its rows.
    std::vector<bool> needed(members_.size(), false);
    for (int m : member_of_row) needed[m] = true;
    for (std::size_t m = 0; m < members_.size(); ++m) {
        if (!needed[m]) continue;
        GaussianHead::Output out;
        member_raw_output(static_cast<int>(m), states, actions, out);
        for (Eigen::Index i = 0; i < b; ++i) {
            if (member_of_row[i] != static_cast<int>(m)) continue;
            for (int d = 0; d < state_dim_; ++d)
                next_states(i, d) = states(i, d) + out.mean(i, d) +
                                    std::exp(out.log_std(i, d)) * rng.normal();
            const double learned_r =
                out.mean(i, state_dim_) +
                std::exp(out.log_std(i, state_dim_)) * rng.normal();
            if (cfg_.learned_reward) {
                rewards(i) = learned_r;
            } else {
                rewards(i) = reward_from(states.row(i).transpose(),
                                         actions.row(i).transpose(),
                                         next_states.row(i).transpose(), learned_r);
            }
        }
    }
}

void EnsembleModel::mean_step_batch(int pin, const Eigen::MatrixXd& states,
                                    const Eigen::MatrixXd& actions,
                                    Eigen::MatrixXd& next_states,
                                    Eigen::VectorXd& rewards) const {
    if (!trained_)
        throw ContractViolation("EnsembleModel::mean_step_batch: model not trained");
    GaussianHead::Output out;
    member_raw_output(elites_.at(pin), states, actions, out);
    next_states = states + out.mean.leftCols(state_dim_);
    const Eigen::Index b = states.rows();
    rewards.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        if (cfg_.learned_reward) {
            rewards(i) = out.mean(i, state_dim_);
        } else {
            rewards(i) = reward_from(states.row(i).transpose(), actions.row(i).transpose(),
                                     next_states.row(i).transpose(), out.mean(i, state_dim_));
        }
    }
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
    if (!in) throw ContractViolation("EnsembleModel::load: truncated stream");
    return v;
}

void write_vec(std::ostream& out, const Eigen::VectorXd& v) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd read_vec(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    Eigen::VectorXd v(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ContractViolation("EnsembleModel::load: truncated stream");
    return v;
}

constexpr std::uint32_t kModelMagic = 0x4d4f4d44u; // "MOMD"
constexpr std::uint32_t kModelVersion = 1;

} // namespace

void EnsembleModel::save(std::ostream& out) const {
    write_pod(out, kModelMagic);
    write_pod(out, kModelVersion);
    write_pod<std::int32_t>(out, state_dim_);
    write_pod<std::int32_t>(out, action_dim_);
    write_pod<std::int32_t>(out, cfg_.ensemble_size);
    write_pod<std::int32_t>(out, cfg_.elite_count);
    write_pod<double>(out, cfg_.log_std_min);
    write_pod<double>(out, cfg_.log_std_max);
    write_pod<std::uint8_t>(out, cfg_.learned_reward ? 1 : 0);
    write_pod<std::uint8_t>(out, cfg_.pin_per_step ? 1 : 0);
    write_pod<std::uint8_t>(out, trained_ ? 1 : 0);
    for (const auto& m : members_) save_net(out, m.net);
    write_vec(out, normalizer_.mean);
    write_vec(out, normalizer_.std);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(elites_.size()));
    for (int e : elites_) write_pod<std::int32_t>(out, e);
}

EnsembleModel EnsembleModel::load(std::istream& in) {
    if (read_pod<std::uint32_t>(in) != kModelMagic)
        throw ContractViolation("EnsembleModel::load: bad magic");
    if (read_pod<std::uint32_t>(in) != kModelVersion)
        throw ContractViolation("EnsembleModel::load: unsupported version");
    EnsembleModel model;
    model.state_dim_ = read_pod<std::int32_t>(in);
    model.action_dim_ = read_pod<std::int32_t>(in);
    model.cfg_.ensemble_size = read_pod<std::int32_t>(in);
    model.cfg_.elite_count = read_pod<std::int32_t>(in);
    model.cfg_.log_std_min = read_pod<double>(in);
    model.cfg_.log_std_max = read_pod<double>(in);
    model.cfg_.learned_reward = read_pod<std::uint8_t>(in) != 0;
    model.cfg_.pin_per_step = read_pod<std::uint8_t>(in) != 0;
    const bool trained = read_pod<std::uint8_t>(in) != 0;
    for (int i = 0; i < model.cfg_.ensemble_size; ++i) {
        GaussianHead head;
        head.net = load_net(in);
        head.dim = model.state_dim_ + 1;
        head.state_dependent_std = true;
        head.log_std_min = model.cfg_.log_std_min;
        head.log_std_max = model.cfg_.log_std_max;
        model.members_.push_back(std::move(head));
        model.adam_.emplace_back();
    }
    model.normalizer_.mean = read_vec(in);
    model.normalizer_.std = read_vec(in);
    const auto n_elites = read_pod<std::uint32_t>(in);
    model.elites_.resize(n_elites);
    for (auto& e : model.elites_) e = read_pod<std::int32_t>(in);
    model.trained_ = trained;
    return model;
}

AnalyticDynamics::AnalyticDynamics(const Env& env)
    : state_dim_(env.spec().state_dim),
      action_dim_(env.spec().action_dim),
      env_(env.clone()) {
    auto fn = env.analytic_reward();
    if (!fn)
        throw ConfigurationError("AnalyticDynamics: environment " + env.spec().id +
                                 " exposes no analytic reward");
    reward_ = *fn;
}

void AnalyticDynamics::step_batch(int, const Eigen::MatrixXd& states,
                                  const Eigen::MatrixXd& actions, Rng&,
                                  Eigen::MatrixXd& next_states,
                                  Eigen::VectorXd& rewards) const {
    mean_step_batch(0, states, actions, next_states, rewards);
}

void AnalyticDynamics::mean_step_batch(int, const Eigen::MatrixXd& states,
                                       const Eigen::MatrixXd& actions,
                                       Eigen::MatrixXd& next_states,
                                       Eigen::VectorXd& rewards) const {
    const Eigen::Index b = states.rows();
    next_states.resize(b, state_dim_);
    rewards.resize(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        Eigen::VectorXd s = states.row(i).transpose();
        Eigen::VectorXd a = actions.row(i).transpose();
        Eigen::VectorXd sp = env_->dynamics(s, a);
        next_states.row(i) = sp.transpose();
        rewards(i) = reward_(s, a, sp);
    }
}

} // namespace mopac
