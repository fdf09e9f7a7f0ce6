#include "cfscm/ensemble.hpp"

#include <algorithm>
#include <cmath>

namespace cfscm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd gather_parents(const Row& x, const std::vector<int>& parents) {
    VectorXd out(parents.size());
    for (std::size_t j = 0; j < parents.size(); ++j) out[j] = x[parents[j]];
    return out;
}

double linear_predict(const LinearNodeModel& m, const VectorXd& pa) {
    return m.coef.dot(pa) + m.intercept;
}

// training parents + factum parents stacked, standardized targets with the
// factum appended; shared by the standalone posterior and the cache
struct ConcatData {
    MatrixXd inputs;  // (N+1) x D
    VectorXd targets;  // N+1, standardized
};

ConcatData concat_with_factum(const BWGPModel& model, const VectorXd& parents_f,
                              double x_f) {
    const int n = model.n(), d = static_cast<int>(model.inputs.cols());
    ConcatData c;
    c.inputs.resize(n + 1, d);
    c.inputs.topRows(n) = model.inputs;
    c.inputs.row(n) = model.standardize_parents(parents_f).transpose();
    c.targets.resize(n + 1);
    c.targets.head(n) = model.targets;
    c.targets[n] = model.standardize_target(x_f);
    return c;
}

VectorXd chol_solve(const MatrixXd& L, const VectorXd& b) {
    VectorXd y = L.triangularView<Eigen::Lower>().solve(b);
    return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

// warped targets for one phi draw; identity when the flow is off
VectorXd warp_targets(const BWGPModel& model, const ConcatData& c,
                      const VectorXd& phi) {
    if (!model.flow_enabled) return c.targets;
    return flow_forward_batch(c.targets, c.inputs, phi, model.config).z;
}

NodeFactumCache build_node_cache(const BWGPModel& model, const VectorXd& parents_f,
                                 double x_f, int n_phi, std::uint64_t seed) {
    ConcatData c = concat_with_factum(model, parents_f, x_f);
    const int n = static_cast<int>(c.targets.size());
    const double s2 = model.kernel.noise_variance();

    NodeFactumCache out;
    out.inputs = c.inputs;
    MatrixXd K = se_kernel_matrix(c.inputs, model.kernel);
    K.diagonal().array() += s2;
    out.chol = cholesky_with_jitter(K);

    VectorXd e_last = VectorXd::Zero(n);
    e_last[n - 1] = 1.0;
    double kinv_nn = chol_solve(out.chol, e_last)[n - 1];
    out.noise_var_post = std::max(s2 * (1.0 - s2 * kinv_nn), 0.0);

    if (model.flow_enabled)
        out.phi = sample_phi(model.q, n_phi, seed);
    else
        out.phi.assign(1, VectorXd());
    out.alpha.reserve(out.phi.size());
    out.noise_mu.reserve(out.phi.size());
    for (const auto& phi : out.phi) {
        VectorXd z = warp_targets(model, c, phi);
        out.alpha.push_back(chol_solve(out.chol, z));
        out.noise_mu.push_back(s2 * out.alpha.back()[n - 1]);
    }
    return out;
}

// latent predictive at x* from a cached factorization
GaussianPosterior predict_from(const MatrixXd& inputs, const MatrixXd& L,
                               const VectorXd& alpha, const VectorXd& x_star,
                               const KernelParams& kernel) {
    MatrixXd kstar = se_kernel_cross(inputs, x_star.transpose(), kernel);
    VectorXd k = kstar.col(0);
    GaussianPosterior post;
    post.mean = k.dot(alpha);
    VectorXd w = L.triangularView<Eigen::Lower>().solve(k);
    post.variance = std::max(kernel.signal_variance() - w.squaredNorm(), 0.0);
    return post;
}

}  // namespace

SCMEnsemble train_ensemble(const CausalGraph& graph, const Dataset& data,
                           const EnsembleTrainOptions& options) {
    if (data.empty()) throw std::invalid_argument("empty training data");
    const int d = graph.size();
    const int n = static_cast<int>(data.size());

    SCMEnsemble out;
    out.graph = graph;
    out.order = topological_order(graph);
    out.node_models.resize(d);
    out.train_columns.assign(d, std::vector<double>(n));
    for (int r = 0; r < d; ++r)
        for (int i = 0; i < n; ++i) out.train_columns[r][i] = data[i][r];

    for (int r = 0; r < d; ++r) {
        if (graph.is_root(r)) continue;
        const auto& pa = graph.parents[r];
        MatrixXd X(n, pa.size());
        VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < pa.size(); ++j) X(i, j) = data[i][pa[j]];
            y[i] = data[i][r];
        }
        NodeModel nm;
        nm.kind = options.kind;
        if (options.kind == ModelKind::Linear) {
            MatrixXd design(n, pa.size() + 1);
            design.col(0).setOnes();
            design.rightCols(pa.size()) = X;
            VectorXd beta = design.colPivHouseholderQr().solve(y);
            nm.linear.intercept = beta[0];
            nm.linear.coef = beta.tail(pa.size());
            VectorXd resid = y - design * beta;
            int dof = std::max(n - static_cast<int>(pa.size()) - 1, 1);
            nm.linear.resid_sd = std::sqrt(resid.squaredNorm() / dof);
        } else {
            FlowConfig fc = options.flow;
            fc.input_dim = static_cast<int>(pa.size());
            TrainConfig tc = options.train;
            tc.seed = split_seed(options.train.seed, static_cast<std::uint64_t>(r));
            nm.bwgp = train_bwgp(X, y, fc, tc,
                                 /*flow_enabled=*/options.kind == ModelKind::BWGP);
        }
        out.node_models[r] = std::move(nm);
    }
    return out;
}

GaussianPosterior bwgp_noise_posterior(const BWGPModel& model,
                                       const VectorXd& parents_f, double x_f,
                                       const VectorXd& phi) {
    ConcatData c = concat_with_factum(model, parents_f, x_f);
    const int n = static_cast<int>(c.targets.size());
    const double s2 = model.kernel.noise_variance();
    MatrixXd K = se_kernel_matrix(c.inputs, model.kernel);
    K.diagonal().array() += s2;
    MatrixXd L = cholesky_with_jitter(K);

    VectorXd e_last = VectorXd::Zero(n);
    e_last[n - 1] = 1.0;
    double kinv_nn = chol_solve(L, e_last)[n - 1];
    VectorXd z = warp_targets(model, c, phi);
    VectorXd alpha = chol_solve(L, z);

    GaussianPosterior out;
    out.mean = s2 * alpha[n - 1];
    out.variance = std::max(s2 * (1.0 - s2 * kinv_nn), 0.0);
    return out;
}

FactumCache precompute_factum_cache(const SCMEnsemble& ensemble,
                                    const Factum& factum, int n_phi,
                                    std::uint64_t seed) {
    if (n_phi < 1) throw std::invalid_argument("phi pool must be >= 1");
    const int d = ensemble.graph.size();
    if (static_cast<int>(factum.x.size()) != d)
        throw std::invalid_argument("factum dimension mismatch");
    FactumCache cache;
    cache.x = factum.x;
    cache.pool_size = n_phi;
    cache.nodes.resize(d);
    for (int r = 0; r < d; ++r) {
        if (ensemble.graph.is_root(r)) continue;
        const auto& nm = ensemble.node_models[r];
        if (!nm) throw std::invalid_argument("untrained node model");
        if (nm->kind == ModelKind::Linear) continue;
        VectorXd pa = gather_parents(factum.x, ensemble.graph.parents[r]);
        cache.nodes[r] =
            build_node_cache(nm->bwgp, pa, factum.x[r], n_phi,
                             split_seed(seed, static_cast<std::uint64_t>(r)));
    }
    return cache;
}

Dataset counterfactual_sample(const SCMEnsemble& ensemble, const Factum& factum,
                              const Intervention& iv, int n, std::uint64_t seed,
                              const FactumCache* cache,
                              std::vector<int>* phi_index_out) {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    FactumCache local;
    if (cache == nullptr) {
        local = precompute_factum_cache(ensemble, factum, std::min(n, 200),
                                        split_seed(seed, 0xCACEull));
        cache = &local;
    }
    const int d = ensemble.graph.size();
    Dataset out(n, Row(d, 0.0));
    if (phi_index_out) phi_index_out->assign(n, 0);
    for (int i = 0; i < n; ++i) {
        Rng rng(split_seed(seed, static_cast<std::uint64_t>(i)));
        Row& x = out[i];
        for (int r : ensemble.order) {
            if (auto val = iv.value_for(r)) {
                x[r] = *val;
                continue;
            }
            if (ensemble.graph.is_root(r)) {
                x[r] = factum.x[r];
                continue;
            }
            const NodeModel& nm = *ensemble.node_models[r];
            VectorXd pa = gather_parents(x, ensemble.graph.parents[r]);
            if (nm.kind == ModelKind::Linear) {
                VectorXd pa_f = gather_parents(factum.x, ensemble.graph.parents[r]);
                double u_f = factum.x[r] - linear_predict(nm.linear, pa_f);
                x[r] = linear_predict(nm.linear, pa) + u_f;
                continue;
            }
            const BWGPModel& m = nm.bwgp;
            const NodeFactumCache& c = cache->nodes[r];
            // draw the pool entry from the per-sample stream so that single
            // samples across facta still mix over the phi posterior
            const int idx = static_cast<int>(rng.index(c.phi.size()));
            if (phi_index_out) (*phi_index_out)[i] = idx;
            VectorXd xs = m.standardize_parents(pa);
            auto f = predict_from(c.inputs, c.chol, c.alpha[idx], xs, m.kernel);
            double fstar = f.mean + std::sqrt(f.variance) * rng.normal();
            double ustar = c.noise_mu[idx] +
                           std::sqrt(c.noise_var_post) * rng.normal();
            double z = fstar + ustar;
            double x_std =
                m.flow_enabled ? g_inverse(z, xs, c.phi[idx], m.config) : z;
            x[r] = m.unstandardize_target(x_std);
        }
    }
    return out;
}

RootSource root_source_empirical(const SCMEnsemble& ensemble) {
    auto columns = ensemble.train_columns;
    return [columns](int node, Rng& rng) {
        const auto& col = columns[node];
        return col[rng.index(col.size())];
    };
}

RootSource root_source_ground_truth(const ClosedFormSCM& scm) {
    return [&scm](int node, Rng& rng) {
        Row empty(scm.graph().size(), 0.0);
        return scm.sample_node(node, empty, rng);
    };
}

Dataset interventional_sample(const SCMEnsemble& ensemble, const Intervention& iv,
                              int n, std::uint64_t seed, const RootSource& roots) {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    const int d = ensemble.graph.size();

    // per-node factorization and phi pool over training data only
    struct NodePrior {
        MatrixXd chol;
        std::vector<VectorXd> phi;
        std::vector<VectorXd> alpha;
    };
    std::vector<std::optional<NodePrior>> prior(d);
    for (int r = 0; r < d; ++r) {
        if (ensemble.graph.is_root(r) || iv.contains(r)) continue;
        const auto& nm = ensemble.node_models[r];
        if (!nm) throw std::invalid_argument("untrained node model");
        if (nm->kind == ModelKind::Linear) continue;
        const BWGPModel& m = nm->bwgp;
        NodePrior np;
        MatrixXd K = se_kernel_matrix(m.inputs, m.kernel);
        K.diagonal().array() += m.kernel.noise_variance();
        np.chol = cholesky_with_jitter(K);
        if (m.flow_enabled)
            np.phi = sample_phi(m.q, std::min(n, 200),
                                split_seed(seed, 0xCA7E00ull + r));
        else
            np.phi.assign(1, VectorXd());
        for (const auto& phi : np.phi) {
            VectorXd z = m.flow_enabled
                             ? flow_forward_batch(m.targets, m.inputs, phi, m.config).z
                             : m.targets;
            np.alpha.push_back(chol_solve(np.chol, z));
        }
        prior[r] = std::move(np);
    }

    Dataset out(n, Row(d, 0.0));
    for (int i = 0; i < n; ++i) {
        Rng rng(split_seed(seed, 0x17E0000ull + i));
        Row& x = out[i];
        for (int r : ensemble.order) {
            if (auto val = iv.value_for(r)) {
                x[r] = *val;
                continue;
            }
            if (ensemble.graph.is_root(r)) {
                x[r] = roots(r, rng);
                continue;
            }
            const NodeModel& nm = *ensemble.node_models[r];
            VectorXd pa = gather_parents(x, ensemble.graph.parents[r]);
            if (nm.kind == ModelKind::Linear) {
                x[r] = linear_predict(nm.linear, pa) +
                       nm.linear.resid_sd * rng.normal();
                continue;
            }
            const BWGPModel& m = nm.bwgp;
            const NodePrior& np = *prior[r];
            const int idx = static_cast<int>(rng.index(np.phi.size()));
            VectorXd xs = m.standardize_parents(pa);
            auto f = predict_from(m.inputs, np.chol, np.alpha[idx], xs, m.kernel);
            double fstar = f.mean + std::sqrt(f.variance) * rng.normal();
            double ustar = std::sqrt(m.kernel.noise_variance()) * rng.normal();
            double z = fstar + ustar;
            double x_std =
                m.flow_enabled ? g_inverse(z, xs, np.phi[idx], m.config) : z;
            x[r] = m.unstandardize_target(x_std);
        }
    }
    return out;
}

EnsembleSampler::EnsembleSampler(const SCMEnsemble& ensemble, RootSource roots,
                                 int cache_pool, std::uint64_t cache_seed)
    : ensemble_(ensemble),
      roots_(std::move(roots)),
      cache_pool_(cache_pool),
      cache_seed_(cache_seed) {}

Dataset EnsembleSampler::counterfactual(const Factum& factum,
                                        const Intervention& iv, int n,
                                        std::uint64_t seed) const {
    if (!cache_ || cache_->x != factum.x)
        cache_ = precompute_factum_cache(ensemble_, factum, cache_pool_,
                                         cache_seed_);
    return counterfactual_sample(ensemble_, factum, iv, n, seed, &*cache_);
}

Dataset EnsembleSampler::interventional(const Intervention& iv, int n,
                                        std::uint64_t seed) const {
    return interventional_sample(ensemble_, iv, n, seed, roots_);
}

Dataset OracleSampler::counterfactual(const Factum& factum, const Intervention& iv,
                                      int n, std::uint64_t /*seed*/) const {
    Row row = ground_truth_counterfactual(scm_, factum, iv);
    return Dataset(n, row);
}

Dataset OracleSampler::interventional(const Intervention& iv, int n,
                                      std::uint64_t seed) const {
    Rng rng(split_seed(seed, 0x0AC1Eull));
    return scm_.apply_intervention(iv).ancestral_sample(n, rng);
}

}  // namespace cfscm
