#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfscm/graph.hpp"
#include "cfscm/rng.hpp"

namespace cfscm {

using Row = std::vector<double>;
using Dataset = std::vector<Row>;

// x_r = f(parent values, u_r); parent values arrive in graph parent order
using StructuralEquation = std::function<double(const Row&, double)>;
using NoiseSampler = std::function<double(Rng&)>;

struct Intervention {
    std::vector<int> targets;
    std::vector<double> values;

    bool contains(int node) const;
    std::optional<double> value_for(int node) const;
    static Intervention none() { return {}; }
};

struct Factum {
    Row x;
    std::optional<Row> u;
    std::optional<int> label;
};

class ClosedFormSCM {
public:
    ClosedFormSCM(CausalGraph graph, std::vector<StructuralEquation> equations,
                  std::vector<NoiseSampler> noise);

    const CausalGraph& graph() const { return graph_; }
    const std::vector<int>& order() const { return order_; }

    double evaluate_node(int node, const Row& x, double u) const;

    // Draws fresh noise for one node and evaluates its equation.
    double sample_node(int node, const Row& x, Rng& rng) const;

    // Generates rows in topological order, recording the noise draws.
    void ancestral_sample(int n, Rng& rng, Dataset& data, Dataset& noise) const;
    Dataset ancestral_sample(int n, Rng& rng) const;

    // Deterministic replay of one row from its noise record.
    Row replay(const Row& noise, const Intervention& iv = Intervention::none()) const;

    ClosedFormSCM apply_intervention(const Intervention& iv) const;

    // Optional ground-truth score used to derive binary labels.
    std::function<double(const Row&)> score;

private:
    CausalGraph graph_;
    std::vector<StructuralEquation> equations_;
    std::vector<NoiseSampler> noise_;
    std::vector<int> order_;
};

// Abduction-free counterfactual: replays the recorded noise through the
// intervened equations. Throws if the factum carries no noise record.
Row ground_truth_counterfactual(const ClosedFormSCM& scm, const Factum& factum,
                                const Intervention& iv);

// Support-shifting bijection of [0,1): u+phi, wrapped back below 1.
double zeta_phi(double u, double phi);

// Two-node family with identical observational law for every phi but
// phi-dependent counterfactuals.
ClosedFormSCM illustrative_scm(double phi);

// Configured ground-truth benchmark systems:
// linear3, nonlinear3, nonadditive3, semisynth7.
ClosedFormSCM benchmark_scm(const std::string& name);

}  // namespace cfscm
