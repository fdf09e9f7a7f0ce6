#include "cfscm/flow.hpp"

#include <cmath>

namespace cfscm {

namespace {

// softplus shift so a zero raw output yields derivative 1
const double kDerivShift = std::log(std::exp(1.0) - 1.0);

double softplus(double a) {
    return a > 30.0 ? a : std::log1p(std::exp(a));
}
double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

struct ParamView {
    Eigen::Map<const Eigen::MatrixXd> W1, W2, W3;
    Eigen::Map<const Eigen::VectorXd> b1, b2, b3;
};

ParamView view_params(const Eigen::VectorXd& phi, const FlowConfig& cfg) {
    const int h = cfg.hidden_dims, d = cfg.input_dim, o = cfg.raw_outputs();
    if (phi.size() != cfg.param_count())
        throw FlowParamError("flow parameter vector has wrong length");
    const double* p = phi.data();
    Eigen::Map<const Eigen::MatrixXd> W1(p, h, d);
    p += h * d;
    Eigen::Map<const Eigen::VectorXd> b1(p, h);
    p += h;
    Eigen::Map<const Eigen::MatrixXd> W2(p, h, h);
    p += h * h;
    Eigen::Map<const Eigen::VectorXd> b2(p, h);
    p += h;
    Eigen::Map<const Eigen::MatrixXd> W3(p, o, h);
    p += o * h;
    Eigen::Map<const Eigen::VectorXd> b3(p, o);
    return {W1, W2, W3, b1, b2, b3};
}

struct ConditionerState {
    Eigen::MatrixXd z1, a1, z2, a2, raw;  // N x {h,h,h,h,o}
};

// rows of `parents` are points; raw outputs per point in rows of state.raw
void conditioner_batch(const Eigen::MatrixXd& parents, const Eigen::VectorXd& phi,
                       const FlowConfig& cfg, ConditionerState& st) {
    auto pv = view_params(phi, cfg);
    const auto n = parents.rows();
    if (parents.cols() != cfg.input_dim)
        throw std::invalid_argument("conditioner: parent dimension mismatch");
    st.z1 = (cfg.input_dim > 0)
                ? Eigen::MatrixXd(parents * pv.W1.transpose())
                : Eigen::MatrixXd::Zero(n, cfg.hidden_dims);
    st.z1.rowwise() += pv.b1.transpose();
    st.a1 = st.z1.cwiseMax(0.0);
    st.z2 = st.a1 * pv.W2.transpose();
    st.z2.rowwise() += pv.b2.transpose();
    st.a2 = st.z2.cwiseMax(0.0);
    st.raw = st.a2 * pv.W3.transpose();
    st.raw.rowwise() += pv.b3.transpose();
    if (!st.raw.allFinite())
        throw FlowParamError("conditioner produced non-finite activations");
}

struct KnotState {
    SplineKnots knots;
    Eigen::VectorXd softmax_w, softmax_h;  // for the backward pass
    Eigen::VectorXd deriv_raw;             // shifted raw derivative inputs
};

void raw_to_knots(const Eigen::VectorXd& raw, const FlowConfig& cfg, KnotState& ks) {
    const int k = cfg.bins;
    const double two_b = 2.0 * cfg.bound;
    const double eps = 1e-3 * two_b / k;  // minimum bin size
    const double amp = two_b - k * eps;

    auto normalized = [&](const Eigen::VectorXd& a) {
        Eigen::VectorXd e = (a.array() - a.maxCoeff()).exp();
        return Eigen::VectorXd(e / e.sum());
    };
    ks.softmax_w = normalized(raw.segment(0, k));
    ks.softmax_h = normalized(raw.segment(k, k));
    ks.knots.widths = (ks.softmax_w.array() * amp + eps).matrix();
    ks.knots.heights = (ks.softmax_h.array() * amp + eps).matrix();
    ks.knots.derivs.resize(k + 1);
    ks.knots.derivs[0] = 1.0;
    ks.knots.derivs[k] = 1.0;
    ks.deriv_raw = raw.segment(2 * k, k - 1).array() + kDerivShift;
    for (int i = 0; i < k - 1; ++i)
        ks.knots.derivs[i + 1] = softplus(ks.deriv_raw[i]);
}

struct BinGrads {
    // gradient w.r.t. widths (K), heights (K), derivs (K+1)
    Eigen::VectorXd gw, gh, gd;
};

// forward pass through one spline bin plus the analytic partials needed for
// reverse mode; returns (z, logdet)
std::pair<double, double> spline_point(double x, const SplineKnots& kn, double bound,
                                       double gz, double gld, BinGrads* grads) {
    const int k_bins = static_cast<int>(kn.widths.size());
    if (grads) {
        grads->gw = Eigen::VectorXd::Zero(k_bins);
        grads->gh = Eigen::VectorXd::Zero(k_bins);
        grads->gd = Eigen::VectorXd::Zero(k_bins + 1);
    }
    if (x <= -bound || x >= bound) return {x, 0.0};

    int k = 0;
    double xk = -bound;
    while (k < k_bins - 1 && x >= xk + kn.widths[k]) xk += kn.widths[k++];
    double yk = -bound;
    for (int j = 0; j < k; ++j) yk += kn.heights[j];

    const double w = kn.widths[k], h = kn.heights[k];
    const double d0 = kn.derivs[k], d1 = kn.derivs[k + 1];
    const double s = h / w;
    const double xi = (x - xk) / w;
    const double q = xi * (1.0 - xi);
    const double c = d0 + d1 - 2.0 * s;
    const double den = s + c * q;
    const double num = h * (s * xi * xi + d0 * q);
    const double z = yk + num / den;
    const double P = d1 * xi * xi + 2.0 * s * q + d0 * (1.0 - xi) * (1.0 - xi);
    const double ld = 2.0 * std::log(s) + std::log(P) - 2.0 * std::log(den);

    if (grads) {
        // partials treating (w, h, d0, d1, xi) as independent
        const double num_w = -h * s * xi * xi / w;
        const double num_h = 2.0 * s * xi * xi + d0 * q;
        const double num_d0 = h * q;
        const double num_xi = 2.0 * h * s * xi + h * d0 * (1.0 - 2.0 * xi);
        const double den_w = (s / w) * (2.0 * q - 1.0);
        const double den_h = (1.0 - 2.0 * q) / w;
        const double den_d0 = q, den_d1 = q;
        const double den_xi = c * (1.0 - 2.0 * xi);
        const double inv_den2 = 1.0 / (den * den);
        auto zpart = [&](double nv, double dv) {
            return (nv * den - num * dv) * inv_den2;
        };
        const double z_w = zpart(num_w, den_w);
        const double z_h = zpart(num_h, den_h);
        const double z_d0 = zpart(num_d0, den_d0);
        const double z_d1 = zpart(0.0, den_d1);
        const double z_xi = zpart(num_xi, den_xi);

        const double P_w = -2.0 * s * q / w;
        const double P_h = 2.0 * q / w;
        const double P_d0 = (1.0 - xi) * (1.0 - xi);
        const double P_d1 = xi * xi;
        const double P_xi = 2.0 * d1 * xi + 2.0 * s * (1.0 - 2.0 * xi) -
                            2.0 * d0 * (1.0 - xi);
        const double ld_w = -2.0 / w + P_w / P - 2.0 * den_w / den;
        const double ld_h = 2.0 / h + P_h / P - 2.0 * den_h / den;
        const double ld_d0 = P_d0 / P - 2.0 * den_d0 / den;
        const double ld_d1 = P_d1 / P - 2.0 * den_d1 / den;
        const double ld_xi = P_xi / P - 2.0 * den_xi / den;

        // chain xi = (x - xk)/w: d xi/d xk = -1/w, d xi/d w_k = -xi/w
        const double g_xi = gz * z_xi + gld * ld_xi;
        grads->gw[k] = gz * z_w + gld * ld_w - g_xi * xi / w;
        grads->gh[k] = gz * z_h + gld * ld_h;
        grads->gd[k] = gz * z_d0 + gld * ld_d0;
        grads->gd[k + 1] = gz * z_d1 + gld * ld_d1;
        const double g_xk = -g_xi / w;  // via xi
        const double g_yk = gz;
        for (int j = 0; j < k; ++j) {
            grads->gw[j] += g_xk;  // xk = -B + sum_{j<k} w_j
            grads->gh[j] += g_yk;
        }
    }
    return {z, ld};
}

}  // namespace

std::pair<double, double> rq_spline_forward(double x, const SplineKnots& knots,
                                            double bound) {
    return spline_point(x, knots, bound, 0.0, 0.0, nullptr);
}

double rq_spline_inverse(double z, const SplineKnots& knots, double bound) {
    const int k_bins = static_cast<int>(knots.widths.size());
    if (z <= -bound || z >= bound) return z;
    int k = 0;
    double yk = -bound;
    while (k < k_bins - 1 && z >= yk + knots.heights[k]) yk += knots.heights[k++];
    double xk = -bound;
    for (int j = 0; j < k; ++j) xk += knots.widths[j];
    const double w = knots.widths[k], h = knots.heights[k];
    const double d0 = knots.derivs[k], d1 = knots.derivs[k + 1];
    const double s = h / w;
    const double delta = z - yk;
    const double c = d0 + d1 - 2.0 * s;
    const double a = h * (s - d0) + delta * c;
    const double b = h * d0 - delta * c;
    const double cc = -s * delta;
    const double disc = std::sqrt(std::max(b * b - 4.0 * a * cc, 0.0));
    const double xi = 2.0 * cc / (-b - disc);
    return xk + xi * w;
}

SplineKnots conditioner(const Eigen::VectorXd& parents, const Eigen::VectorXd& phi,
                        const FlowConfig& config) {
    config.validate();
    ConditionerState st;
    conditioner_batch(parents.transpose(), phi, config, st);
    KnotState ks;
    raw_to_knots(st.raw.row(0).transpose(), config, ks);
    return ks.knots;
}

std::pair<double, double> g_forward(double x, const Eigen::VectorXd& parents,
                                    const Eigen::VectorXd& phi,
                                    const FlowConfig& config) {
    SplineKnots kn = conditioner(parents, phi, config);
    return rq_spline_forward(x, kn, config.bound);
}

double g_inverse(double z, const Eigen::VectorXd& parents,
                 const Eigen::VectorXd& phi, const FlowConfig& config) {
    SplineKnots kn = conditioner(parents, phi, config);
    return rq_spline_inverse(z, kn, config.bound);
}

FlowEval flow_forward_batch(const Eigen::VectorXd& x, const Eigen::MatrixXd& parents,
                            const Eigen::VectorXd& phi, const FlowConfig& config) {
    config.validate();
    const auto n = x.size();
    ConditionerState st;
    conditioner_batch(parents, phi, config, st);
    FlowEval out;
    out.z.resize(n);
    out.logdet.resize(n);
    KnotState ks;
    for (Eigen::Index i = 0; i < n; ++i) {
        raw_to_knots(st.raw.row(i).transpose(), config, ks);
        auto [z, ld] = rq_spline_forward(x[i], ks.knots, config.bound);
        out.z[i] = z;
        out.logdet[i] = ld;
    }
    return out;
}

Eigen::VectorXd flow_backward_batch(const Eigen::VectorXd& x,
                                    const Eigen::MatrixXd& parents,
                                    const Eigen::VectorXd& phi,
                                    const FlowConfig& config,
                                    const Eigen::VectorXd& dz,
                                    const Eigen::VectorXd& dlogdet) {
    config.validate();
    const auto n = x.size();
    const int k = config.bins;
    const int o = config.raw_outputs();
    ConditionerState st;
    conditioner_batch(parents, phi, config, st);

    const double two_b = 2.0 * config.bound;
    const double eps = 1e-3 * two_b / k;
    const double amp = two_b - k * eps;

    Eigen::MatrixXd draw = Eigen::MatrixXd::Zero(n, o);
    KnotState ks;
    BinGrads bg;
    for (Eigen::Index i = 0; i < n; ++i) {
        raw_to_knots(st.raw.row(i).transpose(), config, ks);
        spline_point(x[i], ks.knots, config.bound, dz[i], dlogdet[i], &bg);
        // softmax VJP for widths and heights (scaled by amp)
        auto softmax_vjp = [&](const Eigen::VectorXd& sm, const Eigen::VectorXd& g) {
            double dot = g.dot(sm);
            return Eigen::VectorXd(amp * (sm.array() * (g.array() - dot)).matrix());
        };
        draw.row(i).segment(0, k) = softmax_vjp(ks.softmax_w, bg.gw).transpose();
        draw.row(i).segment(k, k) = softmax_vjp(ks.softmax_h, bg.gh).transpose();
        for (int j = 0; j < k - 1; ++j)
            draw(i, 2 * k + j) = bg.gd[j + 1] * sigmoid(ks.deriv_raw[j]);
    }

    // MLP backward
    auto pv = view_params(phi, config);
    Eigen::MatrixXd da2 = draw * pv.W3;                                // N x h
    Eigen::MatrixXd dz2 = (st.z2.array() > 0.0).select(da2, 0.0);      // relu
    Eigen::MatrixXd da1 = dz2 * pv.W2;
    Eigen::MatrixXd dz1 = (st.z1.array() > 0.0).select(da1, 0.0);

    const int h = config.hidden_dims, d = config.input_dim;
    Eigen::VectorXd dphi = Eigen::VectorXd::Zero(config.param_count());
    double* p = dphi.data();
    if (d > 0) {
        Eigen::Map<Eigen::MatrixXd>(p, h, d) = dz1.transpose() * parents;
    }
    p += h * d;
    Eigen::Map<Eigen::VectorXd>(p, h) = dz1.colwise().sum().transpose();
    p += h;
    Eigen::Map<Eigen::MatrixXd>(p, h, h) = dz2.transpose() * st.a1;
    p += h * h;
    Eigen::Map<Eigen::VectorXd>(p, h) = dz2.colwise().sum().transpose();
    p += h;
    Eigen::Map<Eigen::MatrixXd>(p, o, h) = draw.transpose() * st.a2;
    p += o * h;
    Eigen::Map<Eigen::VectorXd>(p, o) = draw.colwise().sum().transpose();
    return dphi;
}

Eigen::VectorXd flow_param_gradients(double x, const Eigen::VectorXd& parents,
                                     const Eigen::VectorXd& phi,
                                     const FlowConfig& config, double dz,
                                     double dlogdet) {
    Eigen::VectorXd xv(1);
    xv[0] = x;
    Eigen::VectorXd dzv(1), dldv(1);
    dzv[0] = dz;
    dldv[0] = dlogdet;
    return flow_backward_batch(xv, parents.transpose(), phi, config, dzv, dldv);
}

}  // namespace cfscm
