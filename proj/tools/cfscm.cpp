#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "cfscm/benchmark.hpp"
#include "cfscm/io.hpp"

using namespace cfscm;

namespace {

Intervention parse_do(const std::string& spec, const CausalGraph& graph) {
    Intervention iv;
    if (spec.empty()) return iv;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("expected name=value: " + item);
        iv.targets.push_back(graph.index_of(item.substr(0, eq)));
        iv.values.push_back(std::stod(item.substr(eq + 1)));
    }
    return iv;
}

Row parse_row(const std::string& spec) {
    Row out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

ModelKind parse_kind(const std::string& name) {
    if (name == "LIN") return ModelKind::Linear;
    if (name == "GP") return ModelKind::GP;
    if (name == "BWGP") return ModelKind::BWGP;
    throw std::invalid_argument("unknown model kind: " + name);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uncertain-SCM counterfactual and recourse toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir = ".";
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "experiment config JSON");
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out", out_dir, "output directory");

    // fit
    auto* fit = app.add_subcommand("fit", "train an ensemble on fresh samples");
    std::string fit_scm = "linear3", fit_kind = "BWGP";
    int fit_n = 250, fit_steps = -1;
    fit->add_option("--scm", fit_scm);
    fit->add_option("--kind", fit_kind);
    fit->add_option("--n-train", fit_n);
    fit->add_option("--steps", fit_steps);

    // sample
    auto* sample = app.add_subcommand("sample", "observational samples with noise");
    std::string sample_scm = "linear3";
    int sample_n = 100;
    sample->add_option("--scm", sample_scm);
    sample->add_option("--n", sample_n);

    // counterfactual
    auto* cf = app.add_subcommand("counterfactual", "sample p(X_a | X^F) from a model");
    std::string cf_model, cf_factum, cf_do;
    int cf_n = 100;
    cf->add_option("--model", cf_model)->required();
    cf->add_option("--factum", cf_factum)->required();
    cf->add_option("--do", cf_do);
    cf->add_option("--n", cf_n);

    // recourse
    auto* rec = app.add_subcommand("recourse", "recourse search per the config");
    // benchmark
    auto* bench = app.add_subcommand("benchmark", "full table pipeline");
    // illustrative
    auto* illus = app.add_subcommand("illustrative", "two-node figure data");
    int illus_steps = 4501;
    illus->add_option("--steps", illus_steps);

    // eval-mmd
    auto* emmd = app.add_subcommand("eval-mmd", "two-sample MMD between CSVs");
    std::string mmd_x, mmd_y, mmd_ref;
    double mmd_bw = 0.0;
    bool mmd_squared = false;
    emmd->add_option("--x", mmd_x)->required();
    emmd->add_option("--y", mmd_y)->required();
    emmd->add_option("--bandwidth", mmd_bw);
    emmd->add_option("--ref", mmd_ref, "pooled reference CSV for the bandwidth");
    emmd->add_flag("--squared", mmd_squared);

    CLI11_PARSE(app, argc, argv);

    try {
        std::filesystem::create_directories(out_dir);
        if (*fit) {
            auto scm = benchmark_scm(fit_scm);
            Rng rng(split_seed(seed, 1));
            Dataset data = scm.ancestral_sample(fit_n, rng);
            EnsembleTrainOptions opt;
            opt.kind = parse_kind(fit_kind);
            Hyperparams hp =
                default_hyperparams(fit_scm, ClassifierKind::LinearLogistic);
            if (fit_steps > 0) hp.steps = fit_steps;
            opt.flow = FlowConfig{.bins = hp.bins, .bound = hp.bound,
                                  .hidden_dims = hp.hidden, .input_dim = 0};
            opt.train = TrainConfig{.lr = hp.lr, .steps = hp.steps,
                                    .mc_samples = hp.mc_samples,
                                    .prior_var = hp.prior_var,
                                    .seed = split_seed(seed, 2)};
            auto ens = train_ensemble(scm.graph(), data, opt);
            save_ensemble(ens, out_dir + "/model_" + fit_kind + ".json");
            std::cout << out_dir + "/model_" + fit_kind + ".json\n";
        } else if (*sample) {
            auto scm = benchmark_scm(sample_scm);
            Rng rng(split_seed(seed, 1));
            Dataset data, noise;
            scm.ancestral_sample(sample_n, rng, data, noise);
            std::vector<std::string> header = scm.graph().nodes;
            for (const auto& n : scm.graph().nodes) header.push_back("u_" + n);
            Dataset rows;
            for (std::size_t i = 0; i < data.size(); ++i) {
                Row r = data[i];
                r.insert(r.end(), noise[i].begin(), noise[i].end());
                rows.push_back(std::move(r));
            }
            write_csv(out_dir + "/samples.csv", header, rows);
            std::cout << out_dir + "/samples.csv\n";
        } else if (*cf) {
            auto ens = load_ensemble(cf_model);
            Factum f;
            f.x = parse_row(cf_factum);
            Intervention iv = parse_do(cf_do, ens.graph);
            std::vector<int> phi_idx;
            auto samples = counterfactual_sample(ens, f, iv, cf_n, seed, nullptr,
                                                 &phi_idx);
            std::vector<std::string> header = ens.graph.nodes;
            header.push_back("phi_index");
            Dataset rows;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                Row r = samples[i];
                r.push_back(phi_idx[i]);
                rows.push_back(std::move(r));
            }
            write_csv(out_dir + "/counterfactual.csv", header, rows);
            std::cout << out_dir + "/counterfactual.csv\n";
        } else if (*rec || *bench) {
            ExperimentConfig cfg;
            if (!config_path.empty()) cfg = config_from_json(config_path);
            if (seed != 0) cfg.seed = seed;
            if (out_dir != ".") cfg.out_dir = out_dir;
            if (*rec && cfg.models.size() > 1) cfg.models.resize(1);
            auto metrics = run_benchmark(cfg);
            for (const auto& r : metrics)
                std::cout << r.model << " " << r.mode << " validity "
                          << r.validity << " cost " << r.cost_mean << "\n";
        } else if (*illus) {
            IllustrativeConfig cfg;
            cfg.seed = seed;
            cfg.out_dir = out_dir;
            cfg.steps = illus_steps;
            auto s = illustrative_experiment(cfg);
            std::cout << "mmd_gp " << s.mmd_gp << " mmd_bwgp " << s.mmd_bwgp
                      << " band_coverage " << s.band_coverage << "\n";
        } else if (*emmd) {
            Dataset x = read_csv(mmd_x), y = read_csv(mmd_y);
            double bw = mmd_bw;
            if (bw <= 0.0) {
                Dataset pooled = mmd_ref.empty() ? x : read_csv(mmd_ref);
                if (mmd_ref.empty())
                    pooled.insert(pooled.end(), y.begin(), y.end());
                bw = median_heuristic(pooled);
            }
            double v = mmd_squared ? mmd2(x, y, bw) : mmd(x, y, bw);
            std::cout << format_double(v) << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
