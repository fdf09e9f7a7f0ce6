#pragma once

#include <cstdint>
#include <vector>

#include "cfscm/flow.hpp"
#include "cfscm/gp.hpp"

namespace cfscm {

struct VariationalPosterior {
    Eigen::VectorXd m;
    Eigen::VectorXd log_s;

    Eigen::VectorXd stddev() const { return log_s.array().exp(); }
};

struct TrainConfig {
    double lr = 0.03;
    int steps = 1000;
    int mc_samples = 10;   // S
    double prior_var = 0.1;
    std::uint64_t seed = 0;
    bool optimize_noise = true;  // freeze flag for sigma_r
};

struct TraceRow {
    int step;
    double elbo;
    double kl;
    double nll_mean;
};

// One node's trained model. Data is stored standardized; the stats invert
// predictions back to the raw scale.
struct BWGPModel {
    FlowConfig config;
    bool flow_enabled = true;  // false = plain GP (identity warp, no q)
    VariationalPosterior q;
    KernelParams kernel;
    Eigen::MatrixXd inputs;   // N x D, standardized parents
    Eigen::VectorXd targets;  // N, standardized
    Eigen::VectorXd parent_mean, parent_sd;
    double target_mean = 0.0, target_sd = 1.0;
    std::vector<TraceRow> trace;

    int n() const { return static_cast<int>(targets.size()); }
    int phi_dim() const { return flow_enabled ? config.param_count() : 0; }
    Eigen::VectorXd standardize_parents(const Eigen::VectorXd& raw) const;
    double standardize_target(double raw) const { return (raw - target_mean) / target_sd; }
    double unstandardize_target(double std) const { return std * target_sd + target_mean; }
    // forward warp of the standardized targets for a fixed phi
    FlowEval warp(const Eigen::VectorXd& phi) const;
};

struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Negative log marginal of the warped GP for a fixed transformation:
// 0.5 log|K+s2I| + 0.5 z'(K+s2I)^{-1}z - sum_i logdet_i + N/2 log 2pi.
double warped_nll(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                  const Eigen::VectorXd& phi, const KernelParams& kernel,
                  const FlowConfig& config);

// Same value from pre-transformed targets; seam shared with the gradient path.
double warped_nll_from_transformed(const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& logdet,
                                   const Eigen::MatrixXd& inputs,
                                   const KernelParams& kernel);

double kl_mean_field(const VariationalPosterior& q, double prior_var);

double elbo_estimate(const BWGPModel& model, const TrainConfig& config,
                     std::uint64_t seed);

struct ElboGradients {
    double value = 0.0;
    double kl = 0.0;
    double nll_mean = 0.0;
    Eigen::VectorXd dm, dlog_s;
    Eigen::VectorXd dkernel;  // w.r.t. (log ls..., log sv, log nv)
};

// Pathwise gradients of the S-sample estimate, deterministic per seed
// (the same epsilon draws as elbo_estimate).
ElboGradients elbo_gradients(const BWGPModel& model, const TrainConfig& config,
                             std::uint64_t seed);

BWGPModel train_bwgp(const Eigen::MatrixXd& parent_inputs,
                     const Eigen::VectorXd& targets, const FlowConfig& flow_config,
                     const TrainConfig& train_config, bool flow_enabled = true);

std::vector<Eigen::VectorXd> sample_phi(const VariationalPosterior& q, int n,
                                        std::uint64_t seed);

}  // namespace cfscm
