#pragma once

#include <memory>
#include <optional>

#include "cfscm/scm.hpp"
#include "cfscm/vi.hpp"

namespace cfscm {

enum class ModelKind { Linear, GP, BWGP };

struct LinearNodeModel {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    double resid_sd = 0.0;
};

struct NodeModel {
    ModelKind kind = ModelKind::GP;
    BWGPModel bwgp;         // GP (flow_enabled=false) or BW-GP
    LinearNodeModel linear;
};

// Learned per-node models over a shared graph.
struct SCMEnsemble {
    CausalGraph graph;
    std::vector<int> order;
    // indexed by node; roots hold no model (empty optional)
    std::vector<std::optional<NodeModel>> node_models;
    // training values per node; root columns double as the empirical root
    // distribution for interventional sampling
    std::vector<std::vector<double>> train_columns;
};

struct EnsembleTrainOptions {
    ModelKind kind = ModelKind::BWGP;
    FlowConfig flow;      // input_dim is overwritten per node
    TrainConfig train;
};

SCMEnsemble train_ensemble(const CausalGraph& graph, const Dataset& data,
                           const EnsembleTrainOptions& options);

// Noise posterior of one node given the factum, for a fixed warp phi.
// parents_f / x_f are raw (unstandardized); the returned posterior lives in
// the node's standardized warped space.
GaussianPosterior bwgp_noise_posterior(const BWGPModel& model,
                                       const Eigen::VectorXd& parents_f,
                                       double x_f, const Eigen::VectorXd& phi);

struct NodeFactumCache {
    Eigen::MatrixXd inputs;   // training parents + factum row, standardized
    Eigen::MatrixXd chol;     // lower factor of K + sigma^2 I over `inputs`
    double noise_var_post = 0.0;  // s_r, shared across phi
    std::vector<Eigen::VectorXd> phi;
    std::vector<Eigen::VectorXd> alpha;  // (K+s2I)^{-1} g_phi(targets) per draw
    std::vector<double> noise_mu;        // mu_r(phi) per draw
};

struct FactumCache {
    Row x;
    std::vector<NodeFactumCache> nodes;  // empty entry for roots/linear nodes
    int pool_size = 0;
};

FactumCache precompute_factum_cache(const SCMEnsemble& ensemble,
                                    const Factum& factum, int n_phi,
                                    std::uint64_t seed);

// Counterfactual samples under `iv` given the factum. Non-intervened roots
// keep their factual values. Builds a cache internally when none is passed.
Dataset counterfactual_sample(const SCMEnsemble& ensemble, const Factum& factum,
                              const Intervention& iv, int n, std::uint64_t seed,
                              const FactumCache* cache = nullptr,
                              std::vector<int>* phi_index_out = nullptr);

// Root draw for interventional sampling.
using RootSource = std::function<double(int node, Rng& rng)>;

RootSource root_source_empirical(const SCMEnsemble& ensemble);
RootSource root_source_ground_truth(const ClosedFormSCM& scm);

// Interventional (CATE) samples: noise from the prior, GP conditioned on
// training data only, roots drawn from `roots`.
Dataset interventional_sample(const SCMEnsemble& ensemble, const Intervention& iv,
                              int n, std::uint64_t seed, const RootSource& roots);

// Uniform sampling interface for the recourse search.
class CfSampler {
public:
    virtual ~CfSampler() = default;
    virtual int dim() const = 0;
    virtual Dataset counterfactual(const Factum& factum, const Intervention& iv,
                                   int n, std::uint64_t seed) const = 0;
    virtual Dataset interventional(const Intervention& iv, int n,
                                   std::uint64_t seed) const = 0;
};

// Learned ensemble; memoizes the factum cache of the most recent factum.
class EnsembleSampler : public CfSampler {
public:
    EnsembleSampler(const SCMEnsemble& ensemble, RootSource roots,
                    int cache_pool = 200, std::uint64_t cache_seed = 0);
    int dim() const override { return ensemble_.graph.size(); }
    Dataset counterfactual(const Factum& factum, const Intervention& iv, int n,
                           std::uint64_t seed) const override;
    Dataset interventional(const Intervention& iv, int n,
                           std::uint64_t seed) const override;

private:
    const SCMEnsemble& ensemble_;
    RootSource roots_;
    int cache_pool_;
    std::uint64_t cache_seed_;
    mutable std::optional<FactumCache> cache_;
};

// Ground truth: counterfactuals by noise replay, interventional by ancestral
// sampling of the intervened system.
class OracleSampler : public CfSampler {
public:
    explicit OracleSampler(const ClosedFormSCM& scm) : scm_(scm) {}
    int dim() const override { return scm_.graph().size(); }
    Dataset counterfactual(const Factum& factum, const Intervention& iv, int n,
                           std::uint64_t seed) const override;
    Dataset interventional(const Intervention& iv, int n,
                           std::uint64_t seed) const override;

private:
    const ClosedFormSCM& scm_;
};

}  // namespace cfscm
