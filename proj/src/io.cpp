#include "cfscm/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cfscm {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Dataset& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (std::size_t j = 0; j < header.size(); ++j)
        out << (j ? "," : "") << header[j];
    out << "\n";
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < r.size(); ++j)
            out << (j ? "," : "") << format_double(r[j]);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

Dataset read_csv(const std::string& path, std::vector<std::string>* header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty csv: " + path);
    if (header) {
        header->clear();
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header->push_back(cell);
    }
    Dataset rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Row r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd json_to_vec(const json& j) {
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
    json out;
    out["rows"] = m.rows();
    out["cols"] = m.cols();
    json flat = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    out["data"] = std::move(flat);
    return out;
}

Eigen::MatrixXd json_to_mat(const json& j) {
    Eigen::MatrixXd m(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto& flat = j.at("data");
    int k = 0;
    for (int i = 0; i < m.rows(); ++i)
        for (int c = 0; c < m.cols(); ++c) m(i, c) = flat[k++].get<double>();
    return m;
}

json bwgp_to_json(const BWGPModel& m) {
    json out;
    out["flow_enabled"] = m.flow_enabled;
    out["config"] = {{"bins", m.config.bins},
                     {"bound", m.config.bound},
                     {"hidden_dims", m.config.hidden_dims},
                     {"input_dim", m.config.input_dim}};
    out["kernel"] = {{"log_lengthscales", vec_to_json(m.kernel.log_lengthscales)},
                     {"log_signal_variance", m.kernel.log_signal_variance},
                     {"log_noise_variance", m.kernel.log_noise_variance}};
    if (m.flow_enabled)
        out["q"] = {{"m", vec_to_json(m.q.m)}, {"log_s", vec_to_json(m.q.log_s)}};
    out["inputs"] = mat_to_json(m.inputs);
    out["targets"] = vec_to_json(m.targets);
    out["parent_mean"] = vec_to_json(m.parent_mean);
    out["parent_sd"] = vec_to_json(m.parent_sd);
    out["target_mean"] = m.target_mean;
    out["target_sd"] = m.target_sd;
    return out;
}

BWGPModel bwgp_from_json(const json& j) {
    BWGPModel m;
    m.flow_enabled = j.at("flow_enabled").get<bool>();
    const auto& c = j.at("config");
    m.config = FlowConfig{.bins = c.at("bins").get<int>(),
                          .bound = c.at("bound").get<double>(),
                          .hidden_dims = c.at("hidden_dims").get<int>(),
                          .input_dim = c.at("input_dim").get<int>()};
    const auto& k = j.at("kernel");
    m.kernel.log_lengthscales = json_to_vec(k.at("log_lengthscales"));
    m.kernel.log_signal_variance = k.at("log_signal_variance").get<double>();
    m.kernel.log_noise_variance = k.at("log_noise_variance").get<double>();
    if (m.flow_enabled) {
        m.q.m = json_to_vec(j.at("q").at("m"));
        m.q.log_s = json_to_vec(j.at("q").at("log_s"));
    }
    m.inputs = json_to_mat(j.at("inputs"));
    m.targets = json_to_vec(j.at("targets"));
    m.parent_mean = json_to_vec(j.at("parent_mean"));
    m.parent_sd = json_to_vec(j.at("parent_sd"));
    m.target_mean = j.at("target_mean").get<double>();
    m.target_sd = j.at("target_sd").get<double>();
    return m;
}

}  // namespace

void save_ensemble(const SCMEnsemble& ensemble, const std::string& path) {
    json out;
    out["nodes"] = ensemble.graph.nodes;
    out["parents"] = ensemble.graph.parents;
    out["train_columns"] = ensemble.train_columns;
    json models = json::array();
    for (const auto& nm : ensemble.node_models) {
        if (!nm) {
            models.push_back(nullptr);
            continue;
        }
        json m;
        switch (nm->kind) {
            case ModelKind::Linear: m["kind"] = "linear"; break;
            case ModelKind::GP: m["kind"] = "gp"; break;
            case ModelKind::BWGP: m["kind"] = "bwgp"; break;
        }
        if (nm->kind == ModelKind::Linear) {
            m["coef"] = vec_to_json(nm->linear.coef);
            m["intercept"] = nm->linear.intercept;
            m["resid_sd"] = nm->linear.resid_sd;
        } else {
            m["bwgp"] = bwgp_to_json(nm->bwgp);
        }
        models.push_back(std::move(m));
    }
    out["models"] = std::move(models);
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << out.dump(1);
}

SCMEnsemble load_ensemble(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    json in;
    f >> in;
    SCMEnsemble e;
    e.graph.nodes = in.at("nodes").get<std::vector<std::string>>();
    e.graph.parents = in.at("parents").get<std::vector<std::vector<int>>>();
    e.order = topological_order(e.graph);
    e.train_columns =
        in.at("train_columns").get<std::vector<std::vector<double>>>();
    for (const auto& m : in.at("models")) {
        if (m.is_null()) {
            e.node_models.emplace_back();
            continue;
        }
        NodeModel nm;
        std::string kind = m.at("kind").get<std::string>();
        if (kind == "linear") {
            nm.kind = ModelKind::Linear;
            nm.linear.coef = json_to_vec(m.at("coef"));
            nm.linear.intercept = m.at("intercept").get<double>();
            nm.linear.resid_sd = m.at("resid_sd").get<double>();
        } else {
            nm.kind = kind == "gp" ? ModelKind::GP : ModelKind::BWGP;
            nm.bwgp = bwgp_from_json(m.at("bwgp"));
        }
        e.node_models.emplace_back(std::move(nm));
    }
    return e;
}

}  // namespace cfscm
