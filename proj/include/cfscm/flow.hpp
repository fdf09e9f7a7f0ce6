#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace cfscm {

struct FlowConfig {
    int bins = 8;
    double bound = 3.0;
    int hidden_dims = 8;
    int input_dim = 0;

    int raw_outputs() const { return 3 * bins - 1; }
    // conditioner: input_dim -> hidden -> hidden -> raw_outputs, ReLU between
    int param_count() const {
        const int h = hidden_dims, o = raw_outputs(), d = input_dim;
        return h * d + h + h * h + h + o * h + o;
    }
    void validate() const {
        if (bins < 1 || bound <= 0.0 || hidden_dims < 1 || input_dim < 0)
            throw std::invalid_argument("invalid flow config");
    }
};

struct SplineKnots {
    Eigen::VectorXd widths;   // K, positive, sums to 2*bound
    Eigen::VectorXd heights;  // K, positive, sums to 2*bound
    Eigen::VectorXd derivs;   // K+1, positive; boundary entries pinned to 1
};

struct FlowParamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

SplineKnots conditioner(const Eigen::VectorXd& parents, const Eigen::VectorXd& phi,
                        const FlowConfig& config);

// Returns (z, log |dg/dx|). Identity with zero log-derivative outside the box.
std::pair<double, double> g_forward(double x, const Eigen::VectorXd& parents,
                                    const Eigen::VectorXd& phi,
                                    const FlowConfig& config);

double g_inverse(double z, const Eigen::VectorXd& parents,
                 const Eigen::VectorXd& phi, const FlowConfig& config);

// Reverse-mode gradient w.r.t. phi for one point, given upstream
// sensitivities (dL/dz, dL/dlogdet).
Eigen::VectorXd flow_param_gradients(double x, const Eigen::VectorXd& parents,
                                     const Eigen::VectorXd& phi,
                                     const FlowConfig& config, double dz,
                                     double dlogdet);

// Batched evaluation over N points (rows of `parents`).
struct FlowEval {
    Eigen::VectorXd z;
    Eigen::VectorXd logdet;
};

FlowEval flow_forward_batch(const Eigen::VectorXd& x, const Eigen::MatrixXd& parents,
                            const Eigen::VectorXd& phi, const FlowConfig& config);

Eigen::VectorXd flow_backward_batch(const Eigen::VectorXd& x,
                                    const Eigen::MatrixXd& parents,
                                    const Eigen::VectorXd& phi,
                                    const FlowConfig& config,
                                    const Eigen::VectorXd& dz,
                                    const Eigen::VectorXd& dlogdet);

// Spline primitives, exposed for testing.
std::pair<double, double> rq_spline_forward(double x, const SplineKnots& knots,
                                            double bound);
double rq_spline_inverse(double z, const SplineKnots& knots, double bound);

}  // namespace cfscm
