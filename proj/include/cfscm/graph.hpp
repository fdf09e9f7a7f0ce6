#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cfscm {

struct CausalGraph {
    std::vector<std::string> nodes;
    // parents[i] holds indices into `nodes`
    std::vector<std::vector<int>> parents;

    int size() const { return static_cast<int>(nodes.size()); }
    int index_of(const std::string& name) const;
    bool is_root(int node) const { return parents[node].empty(); }
    std::vector<int> descendants(int node) const;
};

struct GraphError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Kahn's algorithm; throws GraphError naming an offending edge on a cycle.
std::vector<int> topological_order(const CausalGraph& graph);

}  // namespace cfscm
