#include "cfscm/recourse.hpp"

#include <algorithm>
#include <cmath>

namespace cfscm {

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
    if (n == 1) return {0.5 * (lo + hi)};
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
    return out;
}

struct Candidate {
    double cost;
    std::uint32_t mask;
    std::vector<double> values;  // aligned with the mask's node list

    bool operator<(const Candidate& o) const {
        if (cost != o.cost) return cost < o.cost;
        if (mask != o.mask) return mask < o.mask;
        return values < o.values;
    }
};

std::vector<int> mask_nodes(std::uint32_t mask, const std::vector<int>& actionable) {
    std::vector<int> out;
    for (std::size_t b = 0; b < actionable.size(); ++b)
        if (mask & (1u << b)) out.push_back(actionable[b]);
    return out;
}

Intervention make_iv(const std::vector<int>& nodes,
                     const std::vector<double>& values) {
    Intervention iv;
    iv.targets = nodes;
    iv.values = values;
    return iv;
}

void product_grids(const std::vector<std::vector<double>>& grids,
                   std::uint32_t mask, const Row& factum_vals,
                   const std::vector<double>& node_ranges,
                   std::vector<Candidate>& out) {
    std::vector<std::size_t> idx(grids.size(), 0);
    while (true) {
        Candidate c;
        c.mask = mask;
        c.values.resize(grids.size());
        double sq = 0.0;
        for (std::size_t j = 0; j < grids.size(); ++j) {
            c.values[j] = grids[j][idx[j]];
            double delta = (c.values[j] - factum_vals[j]) / node_ranges[j];
            sq += delta * delta;
        }
        c.cost = std::sqrt(sq);
        out.push_back(std::move(c));
        std::size_t j = 0;
        while (j < grids.size() && ++idx[j] == grids[j].size()) idx[j++] = 0;
        if (j == grids.size()) break;
    }
}

}  // namespace

std::vector<std::pair<double, double>> value_bounds_from_data(const Dataset& data,
                                                              double pad) {
    if (data.empty()) throw std::invalid_argument("empty data");
    const std::size_t d = data[0].size();
    std::vector<std::pair<double, double>> out(d);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = data[0][j], hi = data[0][j];
        for (const auto& r : data) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
        }
        double p = pad * (hi - lo);
        out[j] = {lo - p, hi + p};
    }
    return out;
}

std::vector<double> ranges_from_data(const Dataset& data) {
    auto b = value_bounds_from_data(data, 0.0);
    std::vector<double> out(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) out[j] = b[j].second - b[j].first;
    return out;
}

double action_cost(const Intervention& iv, const Row& factum,
                   const std::vector<double>& ranges) {
    double sq = 0.0;
    for (std::size_t i = 0; i < iv.targets.size(); ++i) {
        int t = iv.targets[i];
        if (ranges[t] <= 0.0) throw std::invalid_argument("zero range");
        double delta = (iv.values[i] - factum[t]) / ranges[t];
        sq += delta * delta;
    }
    return std::sqrt(sq);
}

double success_probability(const CfSampler& model, const Factum& factum,
                           const Intervention& iv, const Classifier& h, int n,
                           std::uint64_t seed, RecourseMode mode) {
    Dataset samples = mode == RecourseMode::Cf
                          ? model.counterfactual(factum, iv, n, seed)
                          : model.interventional(iv, n, seed);
    int hits = 0;
    for (const auto& r : samples)
        if (classify_prob(h, r) >= 0.5) ++hits;
    return static_cast<double>(hits) / n;
}

RecourseResult find_recourse(const CfSampler& model, const Factum& factum,
                             const Classifier& h, const RecourseConfig& config) {
    if (config.actionable.empty())
        throw std::invalid_argument("empty actionable set");
    if (config.delta <= 0.0 || config.delta >= 1.0)
        throw std::invalid_argument("delta must lie in (0,1)");
    if (config.actionable.size() > 16)
        throw std::invalid_argument("actionable set too large");

    RecourseResult res;
    if (classify_prob(h, factum.x) >= 0.5) {
        res.feasible = true;
        res.success_prob = 1.0;
        return res;
    }

    // global candidate list over all non-empty intervention sets, cheapest
    // first; candidate sets larger than 3 nodes are skipped to keep the grid
    // enumerable
    const int max_set = 3;
    std::vector<Candidate> cands;
    const std::uint32_t n_masks = 1u << config.actionable.size();
    for (std::uint32_t mask = 1; mask < n_masks; ++mask) {
        if (__builtin_popcount(mask) > max_set) continue;
        auto nodes = mask_nodes(mask, config.actionable);
        std::vector<std::vector<double>> grids;
        Row fvals;
        std::vector<double> nranges;
        for (int r : nodes) {
            grids.push_back(linspace(config.bounds[r].first,
                                     config.bounds[r].second, config.grid_points));
            fvals.push_back(factum.x[r]);
            nranges.push_back(config.ranges[r]);
        }
        product_grids(grids, mask, fvals, nranges, cands);
    }
    std::sort(cands.begin(), cands.end());

    auto evaluate = [&](const Candidate& c, std::vector<int>& nodes_out,
                        Intervention& iv_out) {
        nodes_out = mask_nodes(c.mask, config.actionable);
        iv_out = make_iv(nodes_out, c.values);
        // common random numbers within one intervention set
        return success_probability(model, factum, iv_out, h, config.mc_samples,
                                   split_seed(config.seed, c.mask), config.mode);
    };

    const double target = 1.0 - config.delta;
    std::vector<int> nodes;
    Intervention iv;
    const Candidate* incumbent = nullptr;
    double incumbent_prob = 0.0;
    for (const auto& c : cands) {
        double p = evaluate(c, nodes, iv);
        if (p >= target) {
            incumbent = &c;
            incumbent_prob = p;
            break;
        }
    }
    if (!incumbent) return res;  // infeasible

    // one refinement pass around the incumbent, one coarse step per side
    auto inc_nodes = mask_nodes(incumbent->mask, config.actionable);
    std::vector<std::vector<double>> grids;
    Row fvals;
    std::vector<double> nranges;
    for (std::size_t j = 0; j < inc_nodes.size(); ++j) {
        int r = inc_nodes[j];
        double step = (config.bounds[r].second - config.bounds[r].first) /
                      std::max(config.grid_points - 1, 1);
        double lo = std::max(config.bounds[r].first, incumbent->values[j] - step);
        double hi = std::min(config.bounds[r].second, incumbent->values[j] + step);
        grids.push_back(linspace(lo, hi, config.grid_points));
        grids.back().push_back(incumbent->values[j]);  // keep the incumbent
        fvals.push_back(factum.x[r]);
        nranges.push_back(config.ranges[r]);
    }
    std::vector<Candidate> refined;
    product_grids(grids, incumbent->mask, fvals, nranges, refined);
    std::sort(refined.begin(), refined.end());

    res.coarse_cost = incumbent->cost;
    for (const auto& c : refined) {
        if (c.cost > incumbent->cost) break;  // incumbent already feasible
        double p = evaluate(c, nodes, iv);
        if (p >= target) {
            res.action.intervention = iv;
            res.cost = c.cost;
            res.success_prob = p;
            res.feasible = true;
            return res;
        }
    }
    // fall back to the incumbent itself
    res.action.intervention =
        make_iv(inc_nodes, incumbent->values);
    res.cost = incumbent->cost;
    res.success_prob = incumbent_prob;
    res.feasible = true;
    return res;
}

}  // namespace cfscm
