#pragma once

#include <limits>
#include <optional>
#include <string>

#include "cfscm/metrics.hpp"
#include "cfscm/recourse.hpp"

namespace cfscm {

struct Hyperparams {
    int bins = 8;
    double bound = 6.0;
    int hidden = 10;
    double lr = 0.03;
    int steps = 5719;
    int mc_samples = 15;
    double prior_var = 0.1;
};

// per-system training defaults; the 7-variable system varies by classifier
Hyperparams default_hyperparams(const std::string& scm_name,
                                ClassifierKind classifier);

// classifier inputs and intervenable nodes for one benchmark system
struct TaskSetup {
    std::vector<int> features;
    std::vector<int> actionable;
    int score_node = -1;  // -1 when the score is a function, not a node
};
TaskSetup task_setup(const CausalGraph& graph);

struct ExperimentConfig {
    std::string scm = "linear3";
    std::vector<std::string> models = {"ORACLE", "LIN", "GP", "BWGP"};
    ClassifierKind classifier = ClassifierKind::LinearLogistic;
    int n_train = 250;
    int n_facta = 100;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int mc_constraint = 100;
    double delta = 0.05;
    std::optional<Hyperparams> hyper;  // overrides the per-system defaults
    bool write_models = false;
};

struct MetricsRow {
    std::string model, mode;
    double validity = 0.0;
    double cost_mean = 0.0, cost_sd = 0.0;
    double mmd_mean = std::numeric_limits<double>::quiet_NaN();
    double mmd_se = std::numeric_limits<double>::quiet_NaN();
    double cf_var = std::numeric_limits<double>::quiet_NaN();
};

std::vector<MetricsRow> run_benchmark(const ExperimentConfig& config);

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows);

struct IllustrativeConfig {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int steps = 4501;
    int n_interventional = 1000;
    int n_cf = 2000;
};

struct IllustrativeSummary {
    double mmd_bwgp = 0.0, mmd_gp = 0.0;  // interventional fit over [0,1]
    double band_coverage = 0.0;            // analytic phi-band coverage
    double cf_at_factum_bwgp = 0.0, cf_at_factum_gp = 0.0;
};

IllustrativeSummary illustrative_experiment(const IllustrativeConfig& config);

ExperimentConfig config_from_json(const std::string& path);

}  // namespace cfscm
