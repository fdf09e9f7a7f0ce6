#include "cfscm/gp.hpp"

#include <cmath>

namespace cfscm {

KernelParams KernelParams::isotropic(int dim, double log_ls, double log_sv,
                                     double log_nv) {
    KernelParams p;
    p.log_lengthscales = Eigen::VectorXd::Constant(std::max(dim, 0), log_ls);
    p.log_signal_variance = log_sv;
    p.log_noise_variance = log_nv;
    return p;
}

double se_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                 const KernelParams& params) {
    if (x.size() != y.size() || x.size() != params.dim())
        throw std::invalid_argument("se_kernel: dimension mismatch");
    Eigen::ArrayXd ls = params.log_lengthscales.array().exp();
    double q = ((x - y).array() / ls).square().sum();
    return params.signal_variance() * std::exp(-0.5 * q);
}

Eigen::MatrixXd se_kernel_matrix(const Eigen::MatrixXd& X, const KernelParams& params) {
    return se_kernel_cross(X, X, params);
}

Eigen::MatrixXd se_kernel_cross(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                                const KernelParams& params) {
    if (X.cols() != params.dim() || Z.cols() != params.dim())
        throw std::invalid_argument("kernel matrix: dimension mismatch");
    Eigen::ArrayXd inv_ls = (-params.log_lengthscales.array()).exp();
    Eigen::MatrixXd Xs = X.array().rowwise() * inv_ls.transpose();
    Eigen::MatrixXd Zs = Z.array().rowwise() * inv_ls.transpose();
    Eigen::VectorXd xn = Xs.rowwise().squaredNorm();
    Eigen::VectorXd zn = Zs.rowwise().squaredNorm();
    Eigen::MatrixXd sq = (-2.0 * Xs * Zs.transpose());
    sq.colwise() += xn;
    sq.rowwise() += zn.transpose();
    double sv = params.signal_variance();
    return (sq.array().max(0.0) * -0.5).exp() * sv;
}

Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& A, double* jitter_out) {
    const auto n = A.rows();
    double scale = A.diagonal().mean();
    if (scale <= 0.0) scale = 1.0;
    double jitter = 0.0;
    for (double rel = 0.0;;) {
        Eigen::MatrixXd B = A;
        if (jitter > 0.0) B.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(B);
        if (llt.info() == Eigen::Success) {
            if (jitter_out) *jitter_out = jitter;
            return llt.matrixL();
        }
        rel = (rel == 0.0) ? 1e-10 : rel * 10.0;
        if (rel > 1e-4) {
            throw FactorizationError(
                "Cholesky failed after max jitter (n=" + std::to_string(n) +
                ", diag mean=" + std::to_string(scale) + ")");
        }
        jitter = rel * scale;
    }
}

GPModel gp_fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
               const KernelParams& params) {
    if (inputs.rows() != targets.size())
        throw std::invalid_argument("gp_fit: inputs/targets size mismatch");
    if (targets.size() < 1) throw std::invalid_argument("gp_fit: need N >= 1");
    if (!targets.allFinite() || !inputs.allFinite())
        throw std::invalid_argument("gp_fit: non-finite data");
    GPModel m;
    m.inputs = inputs;
    m.targets = targets;
    m.params = params;
    Eigen::MatrixXd K = se_kernel_matrix(inputs, params);
    K.diagonal().array() += params.noise_variance();
    m.chol = cholesky_with_jitter(K, &m.jitter);
    m.alpha = m.chol.transpose().triangularView<Eigen::Upper>().solve(
        m.chol.triangularView<Eigen::Lower>().solve(targets));
    return m;
}

double gp_log_marginal(const GPModel& model) {
    const double n = static_cast<double>(model.n());
    double quad = model.targets.dot(model.alpha);
    double logdet = 2.0 * model.chol.diagonal().array().log().sum();
    return -0.5 * quad - 0.5 * logdet - 0.5 * n * std::log(2.0 * M_PI);
}

Eigen::VectorXd gp_log_marginal_gradient(const GPModel& model) {
    const int n = model.n();
    const int d = model.params.dim();
    Eigen::MatrixXd K = se_kernel_matrix(model.inputs, model.params);
    // Kinv via the stored factor
    Eigen::MatrixXd Kinv = model.chol.transpose().triangularView<Eigen::Upper>().solve(
        model.chol.triangularView<Eigen::Lower>().solve(
            Eigen::MatrixXd::Identity(n, n)));
    // dL/dK = 0.5 (alpha alpha^T - Kinv)
    Eigen::MatrixXd W = 0.5 * (model.alpha * model.alpha.transpose() - Kinv);
    Eigen::VectorXd grad(d + 2);
    Eigen::ArrayXd ls = model.params.log_lengthscales.array().exp();
    for (int j = 0; j < d; ++j) {
        Eigen::ArrayXd xj = model.inputs.col(j).array();
        // dK/d log(ls_j) = K .* sqdist_j / ls_j^2
        Eigen::MatrixXd diff = xj.matrix().replicate(1, n) -
                               xj.matrix().transpose().replicate(n, 1);
        Eigen::MatrixXd dK = K.array() * diff.array().square() / (ls[j] * ls[j]);
        grad[j] = (W.array() * dK.array()).sum();
    }
    grad[d] = (W.array() * K.array()).sum();  // dK/d log sv = K
    grad[d + 1] = W.trace() * model.params.noise_variance();
    return grad;
}

GaussianPosterior gp_predict(const GPModel& model, const Eigen::VectorXd& x_star) {
    Eigen::MatrixXd xs = x_star.transpose();
    Eigen::VectorXd kstar = se_kernel_cross(model.inputs, xs, model.params).col(0);
    double mean = kstar.dot(model.alpha);
    Eigen::VectorXd v = model.chol.triangularView<Eigen::Lower>().solve(kstar);
    double var = model.params.signal_variance() - v.squaredNorm();
    return {mean, std::max(var, 0.0)};
}

GaussianPosterior gp_noise_posterior(const GPModel& model_with_factum) {
    const int n = model_with_factum.n();
    if (n < 1) throw std::invalid_argument("noise posterior: empty model");
    const double sn = model_with_factum.params.noise_variance();
    double mu = sn * model_with_factum.alpha[n - 1];
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[n - 1] = 1.0;
    Eigen::VectorXd v =
        model_with_factum.chol.triangularView<Eigen::Lower>().solve(e);
    double kinv_ff = v.squaredNorm();
    double var = sn * (1.0 - sn * kinv_ff);
    return {mu, std::max(var, 0.0)};
}

}  // namespace cfscm
