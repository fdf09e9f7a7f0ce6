#pragma once

#include "cfscm/classifier.hpp"
#include "cfscm/ensemble.hpp"

namespace cfscm {

enum class RecourseMode { Cf, Cate };

struct Action {
    Intervention intervention;
};

struct RecourseConfig {
    double delta = 0.05;
    std::vector<int> actionable;  // node indices eligible for intervention
    int grid_points = 10;
    int mc_samples = 100;
    RecourseMode mode = RecourseMode::Cf;
    std::uint64_t seed = 0;
    // per-node search bounds (lo, hi); indexed by node
    std::vector<std::pair<double, double>> bounds;
    // per-node cost-normalization ranges; indexed by node
    std::vector<double> ranges;
};

struct RecourseResult {
    Action action;
    double cost = 0.0;
    double success_prob = 0.0;
    bool feasible = false;
    double coarse_cost = 0.0;  // incumbent before grid refinement
};

// Search bounds from the training data span, padded by 20% on each side.
std::vector<std::pair<double, double>> value_bounds_from_data(const Dataset& data,
                                                              double pad = 0.2);
// Cost-normalization ranges (max - min per column).
std::vector<double> ranges_from_data(const Dataset& data);

// sqrt(sum_j ((theta_j - x_j^F) / range_j)^2) over the intervened nodes
double action_cost(const Intervention& iv, const Row& factum,
                   const std::vector<double>& ranges);

double success_probability(const CfSampler& model, const Factum& factum,
                           const Intervention& iv, const Classifier& h, int n,
                           std::uint64_t seed, RecourseMode mode);

RecourseResult find_recourse(const CfSampler& model, const Factum& factum,
                             const Classifier& h, const RecourseConfig& config);

}  // namespace cfscm
