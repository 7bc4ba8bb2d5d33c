#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lcot/common/audit.hpp"
#include "lcot/plato/article.hpp"

namespace lcot::graph {

// Simple undirected graph: sorted, duplicate-free adjacency, no self-loops.
class Graph {
public:
    Graph() = default;
    explicit Graph(int n) : adj_(std::size_t(n)) {}
    static Graph from_edges(int n, const std::vector<std::pair<int, int>>& edges);

    int size() const { return int(adj_.size()); }
    std::size_t edge_count() const { return edges_; }
    std::size_t degree(int v) const { return adj_[std::size_t(v)].size(); }
    double mean_degree() const { return adj_.empty() ? 0.0 : 2.0 * double(edges_) / double(adj_.size()); }
    const std::vector<int>& neighbors(int v) const { return adj_[std::size_t(v)]; }
    bool has_edge(int a, int b) const;
    std::vector<std::pair<int, int>> edges() const;  // a < b, sorted

    // Subgraph on `members` (sorted); vertex k of the result is members[k].
    Graph induced(const std::vector<int>& members) const;
    // Connected components, each sorted, ordered by size descending then smallest vertex.
    std::vector<std::vector<int>> components() const;

private:
    std::vector<std::vector<int>> adj_;
    std::size_t edges_ = 0;
};

struct KeywordGraph {
    std::vector<std::string> nodes;             // normalized keywords, sorted
    std::vector<std::pair<int, int>> edges;     // directed, sorted, unique
    std::vector<std::vector<int>> out_neighbors;
    std::size_t skipped_references = 0;         // keywords that name no entry

    int index_of(const std::string& keyword) const;  // -1 when absent
    // Edge present iff either direction is present.
    Graph symmetrized() const;
};

// One node per page; edge page -> keyword whenever the keyword is itself a page.
KeywordGraph build_graph(const std::vector<plato::KeywordSet>& pages, AuditLog* log = nullptr);

// nodes.json (array of names) and edges.txt ("src dst" vertex indices per line).
void write_keyword_graph(const KeywordGraph& g, const std::filesystem::path& dir);
KeywordGraph read_keyword_graph(const std::filesystem::path& dir);

// Degree-preserving randomization by double edge swaps.
Graph rewire(const Graph& g, std::uint64_t seed, std::size_t swaps_per_edge = 10);

// Generators for tests and demos.
Graph two_cliques(int size, int bridges = 1);
// Four cliques of `size`; cliques 0-1 and 2-3 form pairs joined by `pair_edges`
// edges each, the pairs joined by `cross_edges`.
Graph paired_cliques(int size = 10, int pair_edges = 40, int cross_edges = 2);
struct PlantedGraph {
    Graph graph;
    std::vector<int> labels;
};
// Equal blocks; expected within-block and between-block degree per vertex.
PlantedGraph planted_partition(int n, int blocks, double in_degree, double out_degree, std::uint64_t seed);
Graph erdos_renyi(int n, double p, std::uint64_t seed);

} // namespace lcot::graph
