#include "cfscm/vi.hpp"

#include <cmath>

#include "cfscm/rng.hpp"

namespace cfscm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::VectorXd BWGPModel::standardize_parents(const Eigen::VectorXd& raw) const {
    if (raw.size() == 0) return raw;
    return ((raw - parent_mean).array() / parent_sd.array()).matrix();
}

FlowEval BWGPModel::warp(const Eigen::VectorXd& phi) const {
    if (!flow_enabled) {
        return {targets, VectorXd::Zero(n())};
    }
    return flow_forward_batch(targets, inputs, phi, config);
}

double warped_nll_from_transformed(const VectorXd& z, const VectorXd& logdet,
                                   const MatrixXd& inputs,
                                   const KernelParams& kernel) {
    MatrixXd K = se_kernel_matrix(inputs, kernel);
    K.diagonal().array() += kernel.noise_variance();
    MatrixXd L = cholesky_with_jitter(K);
    VectorXd v = L.triangularView<Eigen::Lower>().solve(z);
    double quad = v.squaredNorm();
    double ld = 2.0 * L.diagonal().array().log().sum();
    const double n = static_cast<double>(z.size());
    return 0.5 * ld + 0.5 * quad - logdet.sum() + 0.5 * n * std::log(2.0 * M_PI);
}

double warped_nll(const MatrixXd& inputs, const VectorXd& targets,
                  const VectorXd& phi, const KernelParams& kernel,
                  const FlowConfig& config) {
    FlowEval fe = flow_forward_batch(targets, inputs, phi, config);
    return warped_nll_from_transformed(fe.z, fe.logdet, inputs, kernel);
}

double kl_mean_field(const VariationalPosterior& q, double prior_var) {
    if (prior_var <= 0.0) throw std::invalid_argument("prior_var must be positive");
    Eigen::ArrayXd s2 = (2.0 * q.log_s.array()).exp();
    Eigen::ArrayXd m2 = q.m.array().square();
    return 0.5 * ((s2 + m2) / prior_var - 1.0 - 2.0 * q.log_s.array() +
                  std::log(prior_var))
                     .sum();
}

namespace {

// shared context for one optimization step: factorization and dK/dtheta hooks
struct KernelContext {
    MatrixXd K0;    // kernel matrix, no noise
    MatrixXd L;     // chol of K0 + nv I
    MatrixXd Kinv;  // (K0 + nv I)^{-1}
    double logdet;

    void compute(const MatrixXd& inputs, const KernelParams& kernel) {
        K0 = se_kernel_matrix(inputs, kernel);
        MatrixXd K = K0;
        K.diagonal().array() += kernel.noise_variance();
        L = cholesky_with_jitter(K);
        const auto n = K.rows();
        Kinv = L.transpose().triangularView<Eigen::Upper>().solve(
            L.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n)));
        logdet = 2.0 * L.diagonal().array().log().sum();
    }

    VectorXd solve(const VectorXd& z) const {
        return L.transpose().triangularView<Eigen::Upper>().solve(
            L.triangularView<Eigen::Lower>().solve(z));
    }
};

// gradient of sum(M .* dK/dtheta_j) over the log-parametrized kernel entries
VectorXd kernel_param_contract(const MatrixXd& M, const MatrixXd& K0,
                               const MatrixXd& inputs, const KernelParams& kernel) {
    const int d = kernel.dim();
    VectorXd grad(d + 2);
    Eigen::ArrayXd ls = kernel.log_lengthscales.array().exp();
    const auto n = inputs.rows();
    for (int j = 0; j < d; ++j) {
        Eigen::ArrayXd xj = inputs.col(j).array();
        MatrixXd diff = xj.matrix().replicate(1, n) -
                        xj.matrix().transpose().replicate(n, 1);
        grad[j] = (M.array() * K0.array() * diff.array().square()).sum() /
                  (ls[j] * ls[j]);
    }
    grad[d] = (M.array() * K0.array()).sum();
    grad[d + 1] = M.trace() * kernel.noise_variance();
    return grad;
}

VectorXd draw_epsilons(int dim, int count, std::uint64_t seed, int sample) {
    Rng rng(split_seed(seed, 0xe15b0 + sample));
    VectorXd eps(dim);
    for (int i = 0; i < dim; ++i) eps[i] = rng.normal();
    (void)count;
    return eps;
}

}  // namespace

double elbo_estimate(const BWGPModel& model, const TrainConfig& config,
                     std::uint64_t seed) {
    if (config.mc_samples < 1) throw std::invalid_argument("need S >= 1");
    KernelContext ctx;
    ctx.compute(model.inputs, model.kernel);
    const double n = static_cast<double>(model.n());
    const double const_term = 0.5 * ctx.logdet + 0.5 * n * std::log(2.0 * M_PI);

    if (!model.flow_enabled) {
        VectorXd v = ctx.L.triangularView<Eigen::Lower>().solve(model.targets);
        return -(const_term + 0.5 * v.squaredNorm());
    }
    const int p = model.phi_dim();
    VectorXd s = model.q.stddev();
    double nll_sum = 0.0;
    for (int i = 0; i < config.mc_samples; ++i) {
        VectorXd eps = draw_epsilons(p, config.mc_samples, seed, i);
        VectorXd phi = model.q.m + s.cwiseProduct(eps);
        FlowEval fe = model.warp(phi);
        VectorXd v = ctx.L.triangularView<Eigen::Lower>().solve(fe.z);
        nll_sum += const_term + 0.5 * v.squaredNorm() - fe.logdet.sum();
    }
    return -nll_sum / config.mc_samples - kl_mean_field(model.q, config.prior_var);
}

ElboGradients elbo_gradients(const BWGPModel& model, const TrainConfig& config,
                             std::uint64_t seed) {
    if (config.mc_samples < 1) throw std::invalid_argument("need S >= 1");
    KernelContext ctx;
    ctx.compute(model.inputs, model.kernel);
    const int nn = model.n();
    const double n = static_cast<double>(nn);
    const double const_term = 0.5 * ctx.logdet + 0.5 * n * std::log(2.0 * M_PI);
    const int p = model.phi_dim();
    const int s_count = model.flow_enabled ? config.mc_samples : 1;

    ElboGradients out;
    out.dm = VectorXd::Zero(p);
    out.dlog_s = VectorXd::Zero(p);
    VectorXd s = model.flow_enabled ? VectorXd(model.q.stddev()) : VectorXd();

    MatrixXd alpha_outer = MatrixXd::Zero(nn, nn);
    double nll_sum = 0.0;
    for (int i = 0; i < s_count; ++i) {
        VectorXd phi(p);
        VectorXd eps;
        if (model.flow_enabled) {
            eps = draw_epsilons(p, s_count, seed, i);
            phi = model.q.m + s.cwiseProduct(eps);
        }
        FlowEval fe = model.warp(phi);
        VectorXd alpha = ctx.solve(fe.z);
        nll_sum += const_term + 0.5 * fe.z.dot(alpha) - fe.logdet.sum();
        alpha_outer.noalias() += alpha * alpha.transpose();

        if (model.flow_enabled) {
            // dNLL/dz = alpha, dNLL/dlogdet_i = -1
            VectorXd dphi = flow_backward_batch(
                model.targets, model.inputs, phi, model.config, alpha,
                VectorXd::Constant(nn, -1.0));
            // ELBO ascends: contribute -dNLL
            out.dm -= dphi;
            out.dlog_s -= dphi.cwiseProduct(eps).cwiseProduct(s);
        }
    }
    const double inv_s = 1.0 / s_count;
    out.nll_mean = nll_sum * inv_s;
    out.dm *= inv_s;
    out.dlog_s *= inv_s;

    // kernel gradient of -mean NLL: M = -(0.5 Kinv - 0.5 mean(alpha alpha'))
    MatrixXd M = 0.5 * (alpha_outer * inv_s - ctx.Kinv);
    out.dkernel = kernel_param_contract(M, ctx.K0, model.inputs, model.kernel);
    if (!config.optimize_noise) out.dkernel[model.kernel.dim() + 1] = 0.0;

    out.kl = model.flow_enabled ? kl_mean_field(model.q, config.prior_var) : 0.0;
    if (model.flow_enabled) {
        out.dm -= model.q.m / config.prior_var;
        Eigen::ArrayXd s2 = s.array().square();
        out.dlog_s -= (s2 / config.prior_var - 1.0).matrix();
    }
    out.value = -out.nll_mean - out.kl;
    if (!std::isfinite(out.value) || !out.dm.allFinite() ||
        !out.dkernel.allFinite())
        throw TrainError("non-finite ELBO gradient");
    return out;
}

std::vector<VectorXd> sample_phi(const VariationalPosterior& q, int n,
                                 std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("need n >= 1");
    std::vector<VectorXd> draws;
    draws.reserve(n);
    Rng rng(split_seed(seed, 0x5a3));
    VectorXd s = q.stddev();
    for (int i = 0; i < n; ++i) {
        VectorXd eps(q.m.size());
        for (int j = 0; j < eps.size(); ++j) eps[j] = rng.normal();
        draws.push_back(q.m + s.cwiseProduct(eps));
    }
    return draws;
}

namespace {

struct AdamState {
    VectorXd m1, m2;
    int t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    explicit AdamState(int dim) : m1(VectorXd::Zero(dim)), m2(VectorXd::Zero(dim)) {}

    VectorXd update(const VectorXd& grad, double lr) {
        ++t;
        m1 = beta1 * m1 + (1.0 - beta1) * grad;
        m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseProduct(grad);
        double c1 = 1.0 - std::pow(beta1, t);
        double c2 = 1.0 - std::pow(beta2, t);
        return (lr * (m1 / c1).array() / ((m2 / c2).array().sqrt() + eps)).matrix();
    }
};

}  // namespace

BWGPModel train_bwgp(const MatrixXd& parent_inputs, const VectorXd& targets,
                     const FlowConfig& flow_config, const TrainConfig& train_config,
                     bool flow_enabled) {
    if (targets.size() < 2) throw std::invalid_argument("train: need N >= 2");
    if (train_config.steps < 1 || train_config.lr <= 0.0)
        throw std::invalid_argument("train: invalid config");
    const int nn = static_cast<int>(targets.size());
    const int d = static_cast<int>(parent_inputs.cols());

    BWGPModel model;
    model.config = flow_config;
    model.config.input_dim = d;
    model.flow_enabled = flow_enabled;
    model.parent_mean = parent_inputs.colwise().mean();
    model.parent_sd.resize(d);
    for (int j = 0; j < d; ++j) {
        double var = (parent_inputs.col(j).array() - model.parent_mean[j])
                         .square()
                         .sum() /
                     std::max(nn - 1, 1);
        model.parent_sd[j] = std::sqrt(std::max(var, 1e-12));
    }
    model.target_mean = targets.mean();
    double tvar =
        (targets.array() - model.target_mean).square().sum() / std::max(nn - 1, 1);
    model.target_sd = std::sqrt(std::max(tvar, 1e-12));
    model.inputs = (parent_inputs.rowwise() - model.parent_mean.transpose());
    for (int j = 0; j < d; ++j) model.inputs.col(j) /= model.parent_sd[j];
    model.targets = (targets.array() - model.target_mean) / model.target_sd;

    model.kernel = KernelParams::isotropic(d, 0.0, 0.0, -1.0);
    const int p = model.phi_dim();
    if (flow_enabled) {
        model.q.m = VectorXd::Zero(p);
        // start near the identity warp with a narrow posterior
        model.q.log_s =
            VectorXd::Constant(p, 0.5 * std::log(train_config.prior_var) - 2.3);
    }

    const int kdim = model.kernel.n_params();
    AdamState adam(2 * p + kdim);
    VectorXd params(2 * p + kdim);
    auto pack = [&]() {
        if (p > 0) {
            params.segment(0, p) = model.q.m;
            params.segment(p, p) = model.q.log_s;
        }
        params.segment(2 * p, d) = model.kernel.log_lengthscales;
        params[2 * p + d] = model.kernel.log_signal_variance;
        params[2 * p + d + 1] = model.kernel.log_noise_variance;
    };
    auto unpack = [&]() {
        if (p > 0) {
            model.q.m = params.segment(0, p);
            model.q.log_s = params.segment(p, p);
        }
        model.kernel.log_lengthscales = params.segment(2 * p, d);
        model.kernel.log_signal_variance = params[2 * p + d];
        model.kernel.log_noise_variance = params[2 * p + d + 1];
    };
    pack();

    VectorXd last_good = params;
    const int trace_every = std::max(train_config.steps / 200, 1);
    for (int step = 0; step < train_config.steps; ++step) {
        ElboGradients g;
        try {
            // fresh epsilon draws per step
            g = elbo_gradients(model, train_config,
                               split_seed(train_config.seed, step));
        } catch (const TrainError&) {
            params = last_good;  // divergence: keep the last finite state
            unpack();
            break;
        }
        last_good = params;
        if (step % trace_every == 0 || step == train_config.steps - 1)
            model.trace.push_back({step, g.value, g.kl, g.nll_mean});
        VectorXd grad(2 * p + kdim);
        if (p > 0) {
            grad.segment(0, p) = g.dm;
            grad.segment(p, p) = g.dlog_s;
        }
        grad.segment(2 * p, kdim) = g.dkernel;
        params += adam.update(grad, train_config.lr);
        // keep the kernel in a numerically workable range
        for (int j = 2 * p; j < 2 * p + kdim; ++j)
            params[j] = std::clamp(params[j], -15.0, 15.0);
        unpack();
    }
    return model;
}

}  // namespace cfscm
