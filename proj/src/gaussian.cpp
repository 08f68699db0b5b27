#include "mopac/gaussian.hpp"

#include "mopac/errors.hpp"

namespace mopac {

GaussianHead::Output GaussianHead::forward(const Eigen::MatrixXd& input,
                                           ForwardCache* cache) const {
    Output out;
    Eigen::MatrixXd raw = mopac::forward(net, input, cache);
    if (state_dependent_std) {
        out.mean = raw.leftCols(dim);
        Eigen::MatrixXd raw_ls = raw.rightCols(dim);
        out.clamp_mask = ((raw_ls.array() > log_std_min) && (raw_ls.array() < log_std_max))
                             .cast<double>();
        out.log_std = raw_ls.cwiseMax(log_std_min).cwiseMin(log_std_max);
    } else {
        out.mean = std::move(raw);
        Eigen::RowVectorXd ls = log_std_param.transpose()
                                    .cwiseMax(log_std_min)
                                    .cwiseMin(log_std_max);
        out.log_std = ls.replicate(input.rows(), 1);
        out.clamp_mask = ((log_std_param.transpose().array() > log_std_min) &&
                          (log_std_param.transpose().array() < log_std_max))
                             .cast<double>()
                             .matrix()
                             .replicate(input.rows(), 1);
    }
    return out;
}

GaussianHead::Sample GaussianHead::sample(const Eigen::MatrixXd& input, Rng& rng,
                                          ForwardCache* cache) const {
    Sample s;
    s.out = forward(input, cache);
    s.noise.resize(s.out.mean.rows(), s.out.mean.cols());
    for (Eigen::Index r = 0; r < s.noise.rows(); ++r)
        for (Eigen::Index c = 0; c < s.noise.cols(); ++c) s.noise(r, c) = rng.normal();
    s.value = s.out.mean.array() + s.out.log_std.array().exp() * s.noise.array();
    return s;
}

Eigen::MatrixXd GaussianHead::output_gradient(const Output& out,
                                              const Eigen::MatrixXd& d_mean,
                                              const Eigen::MatrixXd& d_log_std,
                                              Eigen::VectorXd* log_std_param_grad) const {
    if (d_mean.cols() != dim || d_log_std.cols() != dim)
        throw ContractViolation("GaussianHead::output_gradient: dim mismatch");
    // Clamped entries get zero gradient.
    Eigen::MatrixXd masked_ls = d_log_std.array() * out.clamp_mask.array();
    if (state_dependent_std) {
        Eigen::MatrixXd g(d_mean.rows(), 2 * dim);
        g.leftCols(dim) = d_mean;
        g.rightCols(dim) = masked_ls;
        return g;
    }
    if (log_std_param_grad) *log_std_param_grad = masked_ls.colwise().sum().transpose();
    return d_mean;
}

GaussianHead make_gaussian_head(int input_dim, const std::vector<int>& hidden,
                                int dim, Activation hidden_act, Rng& rng,
                                bool state_dependent_std, double log_std_min,
                                double log_std_max) {
    GaussianHead head;
    head.dim = dim;
    head.state_dependent_std = state_dependent_std;
    head.log_std_min = log_std_min;
    head.log_std_max = log_std_max;
    std::vector<int> sizes;
    sizes.push_back(input_dim);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(state_dependent_std ? 2 * dim : dim);
    head.net = make_dense_net(sizes, hidden_act, Activation::Identity, rng);
    if (!state_dependent_std) head.log_std_param = Eigen::VectorXd::Zero(dim);
    return head;
}

} // namespace mopac
