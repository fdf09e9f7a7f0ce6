#include "cfscm/scm.hpp"

#include <cmath>
#include <stdexcept>

namespace cfscm {

bool Intervention::contains(int node) const {
    for (int t : targets)
        if (t == node) return true;
    return false;
}

std::optional<double> Intervention::value_for(int node) const {
    for (std::size_t i = 0; i < targets.size(); ++i)
        if (targets[i] == node) return values[i];
    return std::nullopt;
}

ClosedFormSCM::ClosedFormSCM(CausalGraph graph,
                             std::vector<StructuralEquation> equations,
                             std::vector<NoiseSampler> noise)
    : graph_(std::move(graph)),
      equations_(std::move(equations)),
      noise_(std::move(noise)) {
    if (equations_.size() != graph_.nodes.size() ||
        noise_.size() != graph_.nodes.size())
        throw std::invalid_argument("one equation and one noise distribution per node");
    order_ = topological_order(graph_);
}

double ClosedFormSCM::evaluate_node(int node, const Row& x, double u) const {
    Row pa;
    pa.reserve(graph_.parents[node].size());
    for (int p : graph_.parents[node]) pa.push_back(x[p]);
    return equations_[node](pa, u);
}

double ClosedFormSCM::sample_node(int node, const Row& x, Rng& rng) const {
    return evaluate_node(node, x, noise_[node](rng));
}

void ClosedFormSCM::ancestral_sample(int n, Rng& rng, Dataset& data,
                                     Dataset& noise) const {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    const int d = graph_.size();
    data.assign(n, Row(d, 0.0));
    noise.assign(n, Row(d, 0.0));
    for (int i = 0; i < n; ++i) {
        for (int v : order_) {
            double u = noise_[v](rng);
            noise[i][v] = u;
            data[i][v] = evaluate_node(v, data[i], u);
        }
    }
}

Dataset ClosedFormSCM::ancestral_sample(int n, Rng& rng) const {
    Dataset data, noise;
    ancestral_sample(n, rng, data, noise);
    return data;
}

Row ClosedFormSCM::replay(const Row& noise, const Intervention& iv) const {
    Row x(graph_.size(), 0.0);
    for (int v : order_) {
        if (auto val = iv.value_for(v)) {
            x[v] = *val;
        } else {
            x[v] = evaluate_node(v, x, noise[v]);
        }
    }
    return x;
}

ClosedFormSCM ClosedFormSCM::apply_intervention(const Intervention& iv) const {
    for (int t : iv.targets) {
        if (t < 0 || t >= graph_.size())
            throw GraphError("intervention target out of range");
    }
    CausalGraph g = graph_;
    auto eqs = equations_;
    auto noise = noise_;
    for (std::size_t i = 0; i < iv.targets.size(); ++i) {
        int t = iv.targets[i];
        double val = iv.values[i];
        g.parents[t].clear();
        eqs[t] = [val](const Row&, double) { return val; };
        noise[t] = [](Rng&) { return 0.0; };
    }
    ClosedFormSCM out(std::move(g), std::move(eqs), std::move(noise));
    out.score = score;
    return out;
}

Row ground_truth_counterfactual(const ClosedFormSCM& scm, const Factum& factum,
                                const Intervention& iv) {
    if (!factum.u)
        throw std::invalid_argument("factum carries no noise record");
    return scm.replay(*factum.u, iv);
}

double zeta_phi(double u, double phi) {
    if (u < 0.0 || u > 1.0 || phi < 0.0 || phi >= 1.0)
        throw std::domain_error("zeta_phi requires u in [0,1], phi in [0,1)");
    double v = u + phi;
    return v >= 1.0 ? v - 1.0 : v;
}

ClosedFormSCM illustrative_scm(double phi) {
    if (phi < 0.0 || phi >= 1.0)
        throw std::domain_error("phi must lie in [0,1)");
    CausalGraph g;
    g.nodes = {"X1", "X2"};
    g.parents = {{}, {0}};
    std::vector<StructuralEquation> eqs(2);
    eqs[0] = [](const Row&, double u) { return u; };
    eqs[1] = [phi](const Row& pa, double u) {
        return pa[0] < 0.5 ? u * pa[0] : zeta_phi(u, phi);
    };
    std::vector<NoiseSampler> noise(2);
    noise[0] = [](Rng& r) { return r.uniform(); };
    noise[1] = [](Rng& r) { return r.uniform(); };
    return ClosedFormSCM(std::move(g), std::move(eqs), std::move(noise));
}

namespace {

NoiseSampler std_normal() {
    return [](Rng& r) { return r.normal(); };
}

ClosedFormSCM make_linear3() {
    CausalGraph g;
    g.nodes = {"X1", "X2", "X3"};
    g.parents = {{}, {0}, {0, 1}};
    std::vector<StructuralEquation> eqs(3);
    eqs[0] = [](const Row&, double u) { return u; };
    eqs[1] = [](const Row& pa, double u) { return -pa[0] + u; };
    eqs[2] = [](const Row& pa, double u) { return 0.5 * (pa[0] + pa[1]) + u; };
    std::vector<NoiseSampler> noise = {std_normal(), std_normal(), std_normal()};
    ClosedFormSCM scm(std::move(g), std::move(eqs), std::move(noise));
    scm.score = [](const Row& x) { return x[0] + x[1] + x[2]; };
    return scm;
}

ClosedFormSCM make_nonlinear3() {
    CausalGraph g;
    g.nodes = {"X1", "X2", "X3"};
    g.parents = {{}, {0}, {0, 1}};
    std::vector<StructuralEquation> eqs(3);
    eqs[0] = [](const Row&, double u) { return u; };
    eqs[1] = [](const Row& pa, double u) { return 2.0 * std::tanh(pa[0]) + 0.5 * u; };
    eqs[2] = [](const Row& pa, double u) {
        return 2.0 * std::tanh(0.5 * (pa[0] + pa[1])) + 0.5 * u;
    };
    std::vector<NoiseSampler> noise = {std_normal(), std_normal(), std_normal()};
    ClosedFormSCM scm(std::move(g), std::move(eqs), std::move(noise));
    scm.score = [](const Row& x) { return x[1] + x[2]; };
    return scm;
}

ClosedFormSCM make_nonadditive3() {
    CausalGraph g;
    g.nodes = {"X1", "X2", "X3"};
    g.parents = {{}, {0}, {0, 1}};
    std::vector<StructuralEquation> eqs(3);
    eqs[0] = [](const Row&, double u) { return u; };
    // noise enters through a parent-dependent positive scale; sgn(u) makes
    // the conditional bimodal while x2 stays increasing in u for every x1
    eqs[1] = [](const Row& pa, double u) {
        double sgn = u >= 0.0 ? 1.0 : -1.0;
        return (0.3 + std::abs(pa[0])) * (0.8 * sgn + 0.3 * u);
    };
    eqs[2] = [](const Row& pa, double u) {
        return 0.5 * (pa[0] + pa[1]) + (0.3 + 0.4 * std::tanh(pa[1]) * std::tanh(pa[1])) * u;
    };
    std::vector<NoiseSampler> noise = {std_normal(), std_normal(), std_normal()};
    ClosedFormSCM scm(std::move(g), std::move(eqs), std::move(noise));
    scm.score = [](const Row& x) { return x[2]; };
    return scm;
}

// age/gender-style roots feeding a downstream loan-score node
ClosedFormSCM make_semisynth7() {
    CausalGraph g;
    g.nodes = {"age", "gender", "education", "income", "savings", "loan", "score"};
    g.parents = {{}, {}, {0, 1}, {0, 2}, {3, 0}, {3, 4}, {0, 3, 4, 5}};
    std::vector<StructuralEquation> eqs(7);
    eqs[0] = [](const Row&, double u) { return u; };
    eqs[1] = [](const Row&, double u) { return u; };
    eqs[2] = [](const Row& pa, double u) {
        return 0.5 * pa[0] + 0.3 * pa[1] + 0.6 * u;
    };
    eqs[3] = [](const Row& pa, double u) {
        return 0.4 * pa[0] + std::tanh(pa[1]) + 0.6 * u;
    };
    eqs[4] = [](const Row& pa, double u) {
        return 0.7 * pa[0] - 0.2 * pa[1] + 0.6 * u;
    };
    eqs[5] = [](const Row& pa, double u) {
        return 0.5 * pa[0] - 0.3 * pa[1] + 0.6 * u;
    };
    eqs[6] = [](const Row& pa, double u) {
        return std::tanh(0.8 * (-0.2 * pa[0] + pa[1] + pa[2] - pa[3])) + 0.3 * u;
    };
    std::vector<NoiseSampler> noise(7, std_normal());
    ClosedFormSCM scm(std::move(g), std::move(eqs), std::move(noise));
    scm.score = [](const Row& x) { return x[6]; };
    return scm;
}

}  // namespace

ClosedFormSCM benchmark_scm(const std::string& name) {
    if (name == "linear3") return make_linear3();
    if (name == "nonlinear3") return make_nonlinear3();
    if (name == "nonadditive3") return make_nonadditive3();
    if (name == "semisynth7") return make_semisynth7();
    throw std::invalid_argument("unknown benchmark SCM: " + name);
}

}  // namespace cfscm
