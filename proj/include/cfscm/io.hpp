#pragma once

#include <string>

#include "cfscm/ensemble.hpp"

namespace cfscm {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV with a header row; numbers written with full round-trip precision so
// reruns are byte-identical.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Dataset& rows);
Dataset read_csv(const std::string& path, std::vector<std::string>* header = nullptr);

std::string format_double(double v);

// Ensemble round trip through JSON (graph, per-node models, posteriors).
void save_ensemble(const SCMEnsemble& ensemble, const std::string& path);
SCMEnsemble load_ensemble(const std::string& path);

}  // namespace cfscm
