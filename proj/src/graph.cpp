#include "cfscm/graph.hpp"

#include <algorithm>
#include <queue>

namespace cfscm {

int CausalGraph::index_of(const std::string& name) const {
    auto it = std::find(nodes.begin(), nodes.end(), name);
    if (it == nodes.end()) throw GraphError("unknown node: " + name);
    return static_cast<int>(it - nodes.begin());
}

std::vector<int> CausalGraph::descendants(int node) const {
    const int d = size();
    std::vector<bool> seen(d, false);
    std::queue<int> frontier;
    frontier.push(node);
    while (!frontier.empty()) {
        int cur = frontier.front();
        frontier.pop();
        for (int v = 0; v < d; ++v) {
            if (seen[v]) continue;
            for (int p : parents[v]) {
                if (p == cur) {
                    seen[v] = true;
                    frontier.push(v);
                    break;
                }
            }
        }
    }
    std::vector<int> out;
    for (int v = 0; v < d; ++v)
        if (seen[v]) out.push_back(v);
    return out;
}

std::vector<int> topological_order(const CausalGraph& graph) {
    const int d = graph.size();
    if (static_cast<int>(graph.parents.size()) != d)
        throw GraphError("parent list size does not match node count");
    std::vector<int> indegree(d, 0);
    for (int v = 0; v < d; ++v) {
        for (int p : graph.parents[v]) {
            if (p < 0 || p >= d) throw GraphError("parent index out of range");
            ++indegree[v];
        }
    }
    std::vector<int> order;
    order.reserve(d);
    std::vector<int> ready;
    for (int v = 0; v < d; ++v)
        if (indegree[v] == 0) ready.push_back(v);
    // smallest index first keeps the order deterministic
    while (!ready.empty()) {
        std::sort(ready.begin(), ready.end(), std::greater<int>());
        int v = ready.back();
        ready.pop_back();
        order.push_back(v);
        for (int w = 0; w < d; ++w) {
            for (int p : graph.parents[w]) {
                if (p == v && --indegree[w] == 0) ready.push_back(w);
            }
        }
    }
    if (static_cast<int>(order.size()) != d) {
        for (int v = 0; v < d; ++v) {
            if (indegree[v] > 0) {
                for (int p : graph.parents[v]) {
                    throw GraphError("cycle detected through edge " +
                                     graph.nodes[p] + " -> " + graph.nodes[v]);
                }
            }
        }
        throw GraphError("cycle detected");
    }
    return order;
}

}  // namespace cfscm
