#include "cfscm/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cfscm/io.hpp"

namespace cfscm {

namespace {

struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what) {}
};

Dataset subselect(const Dataset& rows, const std::vector<int>& cols) {
    Dataset out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        Row s;
        s.reserve(cols.size());
        for (int c : cols) s.push_back(r[c]);
        out.push_back(std::move(s));
    }
    return out;
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var = v.size() > 1 ? var / (v.size() - 1) : 0.0;
    return {m, std::sqrt(var)};
}

std::string csv_cell(double v) {
    return std::isnan(v) ? std::string() : format_double(v);
}

ModelKind kind_from_name(const std::string& name) {
    if (name == "LIN") return ModelKind::Linear;
    if (name == "GP") return ModelKind::GP;
    if (name == "BWGP") return ModelKind::BWGP;
    throw std::invalid_argument("unknown model kind: " + name);
}

void write_trace(const std::string& path, const std::vector<TraceRow>& trace) {
    Dataset rows;
    for (const auto& t : trace)
        rows.push_back({static_cast<double>(t.step), t.elbo, t.kl, t.nll_mean});
    write_csv(path, {"step", "elbo", "kl", "nll_mean"}, rows);
}

void write_samples(const std::string& path,
                   const std::vector<std::string>& node_names,
                   const Dataset& samples, const std::vector<int>& phi_index,
                   const std::string& mode) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& n : node_names) out << n << ",";
    out << "phi_index,mode\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (double v : samples[i]) out << format_double(v) << ",";
        out << (i < phi_index.size() ? phi_index[i] : 0) << "," << mode << "\n";
    }
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * (v.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// mmd of a bootstrap-resampled model set against the fixed reference set
double bootstrap_mmd_se(const Dataset& model_set, const Dataset& ref, double bw,
                        std::uint64_t seed) {
    const int reps = 20;
    std::vector<double> vals;
    for (int k = 0; k < reps; ++k) {
        Rng rng(split_seed(seed, k));
        Dataset resampled;
        resampled.reserve(model_set.size());
        for (std::size_t i = 0; i < model_set.size(); ++i)
            resampled.push_back(model_set[rng.index(model_set.size())]);
        vals.push_back(mmd(resampled, ref, bw));
    }
    return mean_sd(vals).second;
}

}  // namespace

Hyperparams default_hyperparams(const std::string& scm_name,
                                ClassifierKind classifier) {
    Hyperparams hp;
    if (scm_name == "linear3") {
        hp = {8, 6.0, 10, 0.03, 5719, 15, 0.1};
    } else if (scm_name == "nonlinear3") {
        hp = {8, 1.0, 13, 0.03, 5719, 21, 0.1};
    } else if (scm_name == "nonadditive3") {
        // a tight spline box beats a wide one here: the standardized data
        // lives within +-3 and the bimodal conditional needs bin resolution
        hp = {8, 3.0, 10, 0.01, 6000, 20, 0.05};
    } else if (scm_name == "semisynth7") {
        switch (classifier) {
            case ClassifierKind::LinearLogistic:
                hp = {8, 27.0, 2, 0.04, 6982, 31, 0.03};
                break;
            case ClassifierKind::NonlinearLogistic:
                hp = {8, 3.0, 6, 0.008, 6198, 24, 0.01};
                break;
            case ClassifierKind::RandomForest:
                hp = {8, 21.0, 27, 0.05, 4956, 21, 0.02};
                break;
        }
    } else {
        throw std::invalid_argument("unknown benchmark SCM: " + scm_name);
    }
    return hp;
}

TaskSetup task_setup(const CausalGraph& graph) {
    TaskSetup s;
    for (int i = 0; i < graph.size(); ++i) {
        const std::string& n = graph.nodes[i];
        if (n == "score") {
            s.score_node = i;
            continue;
        }
        s.features.push_back(i);
        if (n != "age" && n != "gender") s.actionable.push_back(i);
    }
    return s;
}

std::vector<MetricsRow> run_benchmark(const ExperimentConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    auto path = [&](const std::string& f) { return config.out_dir + "/" + f; };

    auto scm = benchmark_scm(config.scm);
    auto setup = task_setup(scm.graph());
    Hyperparams hp =
        config.hyper.value_or(default_hyperparams(config.scm, config.classifier));
    const int d = scm.graph().size();

    // --- data ---
    Dataset train, train_noise;
    try {
        Rng rng(split_seed(config.seed, 1));
        scm.ancestral_sample(config.n_train, rng, train, train_noise);
    } catch (const std::exception& e) {
        throw StageError("data", e.what());
    }

    // --- classifier ---
    Classifier h;
    try {
        std::vector<int> labels;
        for (const auto& r : train) labels.push_back(scm.score(r) > 0.0 ? 1 : 0);
        h = train_classifier(subselect(train, setup.features), labels,
                             config.classifier, split_seed(config.seed, 2));
        h.feature_idx = setup.features;
    } catch (const std::exception& e) {
        throw StageError("classifier", e.what());
    }

    // --- facta: negatively classified observational draws ---
    std::vector<Factum> facta;
    try {
        Rng rng(split_seed(config.seed, 3));
        int guard = 0;
        while (static_cast<int>(facta.size()) < config.n_facta) {
            Dataset x, u;
            scm.ancestral_sample(64, rng, x, u);
            for (std::size_t i = 0;
                 i < x.size() && static_cast<int>(facta.size()) < config.n_facta;
                 ++i) {
                if (classify_prob(h, x[i]) >= 0.5) continue;
                Factum f;
                f.x = x[i];
                f.u = u[i];
                facta.push_back(std::move(f));
            }
            if (++guard > 4000)
                throw std::runtime_error("cannot collect negatively classified facta");
        }
    } catch (const std::exception& e) {
        throw StageError("facta", e.what());
    }

    // --- ground-truth references ---
    double bandwidth;
    Intervention eval_iv;
    Dataset gt_cf, gt_interventional;
    try {
        Rng ra(split_seed(config.seed, 4)), rb(split_seed(config.seed, 5));
        Dataset pooled = scm.ancestral_sample(1000, ra);
        Dataset second = scm.ancestral_sample(1000, rb);
        pooled.insert(pooled.end(), second.begin(), second.end());
        bandwidth = median_heuristic(pooled);

        int target = setup.actionable.front();
        auto [m, sd] = mean_sd([&] {
            std::vector<double> col;
            for (const auto& r : train) col.push_back(r[target]);
            return col;
        }());
        eval_iv = Intervention{{target}, {m + sd}};

        for (const auto& f : facta)
            gt_cf.push_back(ground_truth_counterfactual(scm, f, eval_iv));
        Rng rc(split_seed(config.seed, 6));
        gt_interventional =
            scm.apply_intervention(eval_iv).ancestral_sample(config.n_facta, rc);
    } catch (const std::exception& e) {
        throw StageError("references", e.what());
    }

    auto bounds = value_bounds_from_data(train);
    auto ranges = ranges_from_data(train);

    std::ofstream recourse_csv(path("recourse.csv"));
    recourse_csv << "factum,model,mode,targets,values,cost,success,feasible\n";

    std::vector<MetricsRow> metrics;
    for (std::size_t mi = 0; mi < config.models.size(); ++mi) {
        const std::string& name = config.models[mi];
        std::unique_ptr<CfSampler> sampler;
        SCMEnsemble ens;
        try {
            if (name == "ORACLE") {
                sampler = std::make_unique<OracleSampler>(scm);
            } else {
                EnsembleTrainOptions opt;
                opt.kind = kind_from_name(name);
                opt.flow = FlowConfig{.bins = hp.bins, .bound = hp.bound,
                                      .hidden_dims = hp.hidden, .input_dim = 0};
                opt.train = TrainConfig{.lr = hp.lr, .steps = hp.steps,
                                        .mc_samples = hp.mc_samples,
                                        .prior_var = hp.prior_var,
                                        .seed = split_seed(config.seed, 10 + mi)};
                ens = train_ensemble(scm.graph(), train, opt);
                if (opt.kind != ModelKind::Linear)
                    for (int r = 0; r < d; ++r)
                        if (ens.node_models[r])
                            write_trace(path("trace_" + name + "_" +
                                             scm.graph().nodes[r] + ".csv"),
                                        ens.node_models[r]->bwgp.trace);
                if (config.write_models)
                    save_ensemble(ens, path("model_" + name + ".json"));
                sampler = std::make_unique<EnsembleSampler>(
                    ens, root_source_ground_truth(scm), 200,
                    split_seed(config.seed, 20 + mi));
            }
        } catch (const std::exception& e) {
            throw StageError("train:" + name, e.what());
        }

        for (RecourseMode mode : {RecourseMode::Cf, RecourseMode::Cate}) {
            const std::string mode_name = mode == RecourseMode::Cf ? "cf" : "cate";
            MetricsRow row;
            row.model = name;
            row.mode = mode_name;
            try {
                RecourseConfig rc;
                rc.delta = config.delta;
                rc.actionable = setup.actionable;
                rc.mc_samples = config.mc_constraint;
                rc.mode = mode;
                rc.bounds = bounds;
                rc.ranges = ranges;

                int valid = 0;
                std::vector<double> costs;
                for (std::size_t fi = 0; fi < facta.size(); ++fi) {
                    rc.seed = split_seed(config.seed, 0xF000 + fi);
                    auto res = find_recourse(*sampler, facta[fi], h, rc);
                    if (res.feasible) {
                        costs.push_back(res.cost);
                        Row replay = ground_truth_counterfactual(
                            scm, facta[fi], res.action.intervention);
                        if (classify_prob(h, replay) >= 0.5) ++valid;
                    }
                    recourse_csv << fi << "," << name << "," << mode_name << ",";
                    for (std::size_t t = 0; t < res.action.intervention.targets.size(); ++t)
                        recourse_csv << (t ? "|" : "")
                                     << scm.graph().nodes[res.action.intervention.targets[t]];
                    recourse_csv << ",";
                    for (std::size_t t = 0; t < res.action.intervention.values.size(); ++t)
                        recourse_csv << (t ? "|" : "")
                                     << format_double(res.action.intervention.values[t]);
                    recourse_csv << "," << format_double(res.cost) << ","
                                 << format_double(res.success_prob) << ","
                                 << (res.feasible ? 1 : 0) << "\n";
                }
                row.validity = 100.0 * valid / facta.size();
                auto [cm, cs] = mean_sd(costs);
                row.cost_mean = cm;
                row.cost_sd = cs;
            } catch (const std::exception& e) {
                throw StageError("recourse:" + name + ":" + mode_name, e.what());
            }

            // distribution fit under the fixed evaluation intervention
            try {
                if (name != "ORACLE") {
                    Dataset model_set;
                    std::vector<int> phi_idx;
                    if (mode == RecourseMode::Cf) {
                        for (std::size_t fi = 0; fi < facta.size(); ++fi) {
                            std::vector<int> pidx;
                            auto s = sampler->counterfactual(
                                facta[fi], eval_iv, 1,
                                split_seed(config.seed, 0xA000 + fi));
                            model_set.push_back(s[0]);
                            phi_idx.push_back(0);
                        }
                        row.mmd_mean = mmd(model_set, gt_cf, bandwidth);
                        row.mmd_se = bootstrap_mmd_se(
                            model_set, gt_cf, bandwidth,
                            split_seed(config.seed, 0xB000 + mi));
                    } else {
                        model_set = sampler->interventional(
                            eval_iv, config.n_facta,
                            split_seed(config.seed, 0xC000 + mi));
                        phi_idx.assign(model_set.size(), 0);
                        row.mmd_mean = mmd(model_set, gt_interventional, bandwidth);
                        row.mmd_se = bootstrap_mmd_se(
                            model_set, gt_interventional, bandwidth,
                            split_seed(config.seed, 0xD000 + mi));
                    }
                    std::vector<std::vector<int>> ivs(model_set.size(),
                                                      eval_iv.targets);
                    row.cf_var = cf_variance(model_set, ivs);
                    write_samples(path("samples_" + name + "_" + mode_name + ".csv"),
                                  scm.graph().nodes, model_set, phi_idx, mode_name);
                }
            } catch (const std::exception& e) {
                throw StageError("metrics:" + name + ":" + mode_name, e.what());
            }
            metrics.push_back(std::move(row));
        }
    }
    write_metrics_csv(path("metrics.csv"), metrics);
    return metrics;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "model,mode,validity,cost_mean,cost_sd,mmd,mmd_se,cf_var\n";
    for (const auto& r : rows) {
        out << r.model << "," << r.mode << "," << format_double(r.validity) << ","
            << format_double(r.cost_mean) << "," << format_double(r.cost_sd) << ","
            << csv_cell(r.mmd_mean) << "," << csv_cell(r.mmd_se) << ","
            << csv_cell(r.cf_var) << "\n";
    }
}

IllustrativeSummary illustrative_experiment(const IllustrativeConfig& config) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    auto path = [&](const std::string& f) { return config.out_dir + "/" + f; };

    auto scm = illustrative_scm(0.0);

    // 174 training points restricted to the left part of the support
    Dataset train;
    {
        Rng rng(split_seed(config.seed, 1));
        while (train.size() < 174) {
            Dataset batch = scm.ancestral_sample(64, rng);
            for (auto& r : batch) {
                if (r[0] >= 0.6 || train.size() >= 174) continue;
                train.push_back(r);
            }
        }
        write_csv(path("train.csv"), scm.graph().nodes, train);
    }

    auto make = [&](ModelKind kind) {
        EnsembleTrainOptions opt;
        opt.kind = kind;
        opt.flow = FlowConfig{.bins = 8, .bound = 6.0, .hidden_dims = 10,
                              .input_dim = 0};
        opt.train = TrainConfig{.lr = 0.01, .steps = config.steps,
                                .mc_samples = 20, .prior_var = 0.05,
                                .seed = split_seed(config.seed, 2)};
        return train_ensemble(scm.graph(), train, opt);
    };
    auto gp = make(ModelKind::GP);
    auto bwgp = make(ModelKind::BWGP);

    // interventional fit over the full support
    RootSource uniform_root = [](int, Rng& rng) { return rng.uniform(); };
    IllustrativeSummary summary;
    Dataset gt_a, gt_b;
    {
        Rng ra(split_seed(config.seed, 3)), rb(split_seed(config.seed, 4));
        gt_a = scm.ancestral_sample(config.n_interventional, ra);
        gt_b = scm.ancestral_sample(config.n_interventional, rb);
        Dataset pooled = gt_a;
        pooled.insert(pooled.end(), gt_b.begin(), gt_b.end());
        double bw = median_heuristic(pooled);

        auto gp_samples = interventional_sample(
            gp, Intervention::none(), config.n_interventional,
            split_seed(config.seed, 5), uniform_root);
        auto bw_samples = interventional_sample(
            bwgp, Intervention::none(), config.n_interventional,
            split_seed(config.seed, 6), uniform_root);
        summary.mmd_gp = mmd(gp_samples, gt_a, bw);
        summary.mmd_bwgp = mmd(bw_samples, gt_a, bw);
        write_csv(path("interventional_truth.csv"), scm.graph().nodes, gt_a);
        write_csv(path("interventional_GP.csv"), scm.graph().nodes, gp_samples);
        write_csv(path("interventional_BWGP.csv"), scm.graph().nodes, bw_samples);
    }

    // counterfactuals for the factum, swept over the unobserved regime
    Factum factum;
    factum.x = {0.22, 0.08};
    const double u2 = factum.x[1] / factum.x[0];  // abducted from the left branch
    std::vector<double> xs;
    for (int i = 0; i <= 8; ++i) xs.push_back(0.6 + 0.05 * i);

    Dataset band_rows;  // x, phi, ground-truth counterfactual value
    std::vector<double> band_vals;
    for (int k = 0; k < 20; ++k) {
        double phi = k / 20.0;
        double v = zeta_phi(u2, phi);
        band_vals.push_back(v);
        for (double x : xs) band_rows.push_back({x, phi, v});
    }
    write_csv(path("cf_band_truth.csv"), {"x1", "phi", "x2"}, band_rows);

    double covered = 0.0, total = 0.0;
    for (auto [model, tag] : {std::pair<const SCMEnsemble*, const char*>{&gp, "GP"},
                              {&bwgp, "BWGP"}}) {
        Dataset rows;
        for (double x : xs) {
            Intervention iv{{0}, {x}};
            auto samples = counterfactual_sample(*model, factum, iv, config.n_cf,
                                                 split_seed(config.seed, 7));
            std::vector<double> x2;
            for (const auto& r : samples) x2.push_back(r[1]);
            double lo = quantile(x2, 0.005), hi = quantile(x2, 0.995);
            auto [m, sd] = mean_sd(x2);
            rows.push_back({x, lo, quantile(x2, 0.025), m, quantile(x2, 0.975), hi});
            if (std::string(tag) == "BWGP") {
                for (double v : band_vals) {
                    total += 1.0;
                    if (v >= lo && v <= hi) covered += 1.0;
                }
            }
        }
        write_csv(path(std::string("cf_") + tag + ".csv"),
                  {"x1", "q005", "q025", "mean", "q975", "q995"}, rows);
    }
    summary.band_coverage = covered / total;

    // counterfactual consistency at the factum's own value
    {
        Intervention iv{{0}, {factum.x[0]}};
        auto a = counterfactual_sample(gp, factum, iv, config.n_cf,
                                       split_seed(config.seed, 8));
        auto b = counterfactual_sample(bwgp, factum, iv, config.n_cf,
                                       split_seed(config.seed, 9));
        double ma = 0.0, mb = 0.0;
        for (const auto& r : a) ma += r[1];
        for (const auto& r : b) mb += r[1];
        summary.cf_at_factum_gp = ma / a.size();
        summary.cf_at_factum_bwgp = mb / b.size();
    }

    std::ofstream sum(path("summary.csv"));
    sum << "mmd_gp,mmd_bwgp,band_coverage,cf_at_factum_gp,cf_at_factum_bwgp\n"
        << format_double(summary.mmd_gp) << "," << format_double(summary.mmd_bwgp)
        << "," << format_double(summary.band_coverage) << ","
        << format_double(summary.cf_at_factum_gp) << ","
        << format_double(summary.cf_at_factum_bwgp) << "\n";
    return summary;
}

ExperimentConfig config_from_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    nlohmann::json j;
    f >> j;
    ExperimentConfig c;
    c.scm = j.value("scm", c.scm);
    if (j.contains("models"))
        c.models = j.at("models").get<std::vector<std::string>>();
    std::string cls = j.value("classifier", std::string("linear"));
    if (cls == "linear")
        c.classifier = ClassifierKind::LinearLogistic;
    else if (cls == "nonlinear")
        c.classifier = ClassifierKind::NonlinearLogistic;
    else if (cls == "forest")
        c.classifier = ClassifierKind::RandomForest;
    else
        throw std::invalid_argument("unknown classifier: " + cls);
    c.n_train = j.value("n_train", c.n_train);
    c.n_facta = j.value("n_facta", c.n_facta);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.mc_constraint = j.value("mc_constraint", c.mc_constraint);
    c.delta = j.value("delta", c.delta);
    c.write_models = j.value("write_models", c.write_models);
    if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        Hyperparams hp = default_hyperparams(c.scm, c.classifier);
        hp.bins = h.value("bins", hp.bins);
        hp.bound = h.value("bound", hp.bound);
        hp.hidden = h.value("hidden", hp.hidden);
        hp.lr = h.value("lr", hp.lr);
        hp.steps = h.value("steps", hp.steps);
        hp.mc_samples = h.value("mc_samples", hp.mc_samples);
        hp.prior_var = h.value("prior_var", hp.prior_var);
        c.hyper = hp;
    }
    return c;
}

}  // namespace cfscm
