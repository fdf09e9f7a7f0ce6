#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace cfscm {

struct KernelParams {
    Eigen::VectorXd log_lengthscales;
    double log_signal_variance = 0.0;
    double log_noise_variance = 0.0;

    int dim() const { return static_cast<int>(log_lengthscales.size()); }
    double signal_variance() const { return std::exp(log_signal_variance); }
    double noise_variance() const { return std::exp(log_noise_variance); }
    Eigen::VectorXd lengthscales() const { return log_lengthscales.array().exp(); }
    int n_params() const { return dim() + 2; }

    static KernelParams isotropic(int dim, double log_ls = 0.0,
                                  double log_sv = 0.0, double log_nv = 0.0);
};

struct FactorizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GaussianPosterior {
    double mean = 0.0;
    double variance = 0.0;
};

double se_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                 const KernelParams& params);

// k(X, X); noise variance not included
Eigen::MatrixXd se_kernel_matrix(const Eigen::MatrixXd& X, const KernelParams& params);
// k(X, Z) cross-covariance
Eigen::MatrixXd se_kernel_cross(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                                const KernelParams& params);

struct GPModel {
    Eigen::MatrixXd inputs;   // N x D
    Eigen::VectorXd targets;  // N
    KernelParams params;
    Eigen::MatrixXd chol;     // lower factor of K + sigma^2 I (+ jitter)
    Eigen::VectorXd alpha;    // (K + sigma^2 I)^{-1} targets
    double jitter = 0.0;

    int n() const { return static_cast<int>(targets.size()); }
};

// Lower-Cholesky with escalating jitter: 1e-10 * mean(diag K), x10 up to 1e-4,
// then FactorizationError.
Eigen::MatrixXd cholesky_with_jitter(const Eigen::MatrixXd& A, double* jitter_out = nullptr);

GPModel gp_fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
               const KernelParams& params);

double gp_log_marginal(const GPModel& model);

// d log marginal / d (log_lengthscales..., log_signal_variance, log_noise_variance)
Eigen::VectorXd gp_log_marginal_gradient(const GPModel& model);

GaussianPosterior gp_predict(const GPModel& model, const Eigen::VectorXd& x_star);

// Prop.-1-style noise posterior; the factum must be the last row of the model.
GaussianPosterior gp_noise_posterior(const GPModel& model_with_factum);

}  // namespace cfscm
