#include "lcot/graph/graph.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "lcot/common/error.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/text.hpp"

namespace lcot::graph {

Graph Graph::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n < 0) throw validation_error("negative vertex count");
    Graph g(n);
    for (auto [a, b] : edges) {
        if (a < 0 || b < 0 || a >= n || b >= n) throw validation_error("edge references a missing vertex");
        if (a == b) continue;
        g.adj_[std::size_t(a)].push_back(b);
        g.adj_[std::size_t(b)].push_back(a);
    }
    std::size_t ends = 0;
    for (auto& list : g.adj_) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
        ends += list.size();
    }
    g.edges_ = ends / 2;
    return g;
}

bool Graph::has_edge(int a, int b) const {
    const auto& l = adj_[std::size_t(a)];
    return std::binary_search(l.begin(), l.end(), b);
}

std::vector<std::pair<int, int>> Graph::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(edges_);
    for (int a = 0; a < size(); ++a)
        for (int b : adj_[std::size_t(a)])
            if (a < b) out.emplace_back(a, b);
    return out;
}

Graph Graph::induced(const std::vector<int>& members) const {
    std::vector<int> local(adj_.size(), -1);
    for (std::size_t k = 0; k < members.size(); ++k) local[std::size_t(members[k])] = int(k);
    std::vector<std::pair<int, int>> e;
    for (std::size_t k = 0; k < members.size(); ++k)
        for (int b : adj_[std::size_t(members[k])])
            if (local[std::size_t(b)] > int(k)) e.emplace_back(int(k), local[std::size_t(b)]);
    return from_edges(int(members.size()), e);
}

std::vector<std::vector<int>> Graph::components() const {
    std::vector<int> comp(adj_.size(), -1);
    std::vector<std::vector<int>> out;
    for (int s = 0; s < size(); ++s) {
        if (comp[std::size_t(s)] >= 0) continue;
        std::vector<int> members{s}, stack{s};
        comp[std::size_t(s)] = int(out.size());
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w : adj_[std::size_t(v)])
                if (comp[std::size_t(w)] < 0) {
                    comp[std::size_t(w)] = int(out.size());
                    members.push_back(w);
                    stack.push_back(w);
                }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
    return out;
}

int KeywordGraph::index_of(const std::string& keyword) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), keyword);
    return it != nodes.end() && *it == keyword ? int(it - nodes.begin()) : -1;
}

Graph KeywordGraph::symmetrized() const { return Graph::from_edges(int(nodes.size()), edges); }

KeywordGraph build_graph(const std::vector<plato::KeywordSet>& pages, AuditLog* log) {
    KeywordGraph g;
    for (const auto& p : pages) {
        auto k = normalize_keyword(p.source_page);
        if (k.empty()) throw validation_error("keyword page without a name");
        g.nodes.push_back(k);
    }
    std::sort(g.nodes.begin(), g.nodes.end());
    if (std::adjacent_find(g.nodes.begin(), g.nodes.end()) != g.nodes.end())
        throw validation_error("duplicate keyword page: " + *std::adjacent_find(g.nodes.begin(), g.nodes.end()));

    std::set<std::pair<int, int>> edges;
    for (const auto& p : pages) {
        int src = g.index_of(normalize_keyword(p.source_page));
        for (const auto& kw : p.keywords) {
            int dst = g.index_of(normalize_keyword(kw));
            if (dst < 0) {
                ++g.skipped_references;
                audit(log, "build_graph", p.source_page, "keyword names no entry: " + kw);
                continue;
            }
            if (dst != src) edges.emplace(src, dst);
        }
    }
    g.edges.assign(edges.begin(), edges.end());
    g.out_neighbors.resize(g.nodes.size());
    for (auto [a, b] : g.edges) g.out_neighbors[std::size_t(a)].push_back(b);
    return g;
}

void write_keyword_graph(const KeywordGraph& g, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::string edges;
    for (auto [a, b] : g.edges) edges += std::to_string(a) + " " + std::to_string(b) + "\n";
    write_file_atomic(dir / "edges.txt", edges);
    write_file_atomic(dir / "nodes.json", json(g.nodes).dump(1) + "\n");
}

KeywordGraph read_keyword_graph(const std::filesystem::path& dir) {
    KeywordGraph g;
    g.nodes = read_json_file(dir / "nodes.json").get<std::vector<std::string>>();
    if (!std::is_sorted(g.nodes.begin(), g.nodes.end()))
        throw Error(ErrorCode::integrity, "node manifest is not sorted: " + (dir / "nodes.json").string());
    std::istringstream in(read_file(dir / "edges.txt"));
    std::string line;
    int lineno = 0;
    std::set<std::pair<int, int>> edges;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::istringstream row(line);
        long a = -1, b = -1;
        std::string extra;
        if (!(row >> a >> b) || (row >> extra) || a < 0 || b < 0 || a >= long(g.nodes.size()) ||
            b >= long(g.nodes.size()) || a == b)
            throw parse_error("bad edge at edges.txt:" + std::to_string(lineno), line);
        edges.emplace(int(a), int(b));
    }
    g.edges.assign(edges.begin(), edges.end());
    g.out_neighbors.resize(g.nodes.size());
    for (auto [a, b] : g.edges) g.out_neighbors[std::size_t(a)].push_back(b);
    return g;
}

Graph rewire(const Graph& g, std::uint64_t seed, std::size_t swaps_per_edge) {
    auto edges = g.edges();
    if (edges.size() < 2) return g;
    std::set<std::pair<int, int>> present(edges.begin(), edges.end());
    auto key = [](int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); };
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
    std::bernoulli_distribution flip(0.5);
    for (std::size_t attempt = 0, n = swaps_per_edge * edges.size(); attempt < n; ++attempt) {
        std::size_t i = pick(rng), j = pick(rng);
        if (i == j) continue;
        auto [a, b] = edges[i];
        auto [c, d] = edges[j];
        if (flip(rng)) std::swap(c, d);
        // a-b, c-d  ->  a-d, c-b
        if (a == d || c == b) continue;
        auto e1 = key(a, d), e2 = key(c, b);
        if (present.contains(e1) || present.contains(e2)) continue;
        present.erase(edges[i]);
        present.erase(edges[j]);
        present.insert(e1);
        present.insert(e2);
        edges[i] = e1;
        edges[j] = e2;
    }
    return Graph::from_edges(g.size(), edges);
}

Graph two_cliques(int size, int bridges) {
    std::vector<std::pair<int, int>> e;
    for (int c = 0; c < 2; ++c)
        for (int a = 0; a < size; ++a)
            for (int b = a + 1; b < size; ++b) e.emplace_back(c * size + a, c * size + b);
    for (int k = 0; k < bridges; ++k) e.emplace_back(k % size, size + (k % size));
    return Graph::from_edges(2 * size, e);
}

Graph paired_cliques(int size, int pair_edges, int cross_edges) {
    std::vector<std::pair<int, int>> e;
    for (int c = 0; c < 4; ++c)
        for (int a = 0; a < size; ++a)
            for (int b = a + 1; b < size; ++b) e.emplace_back(c * size + a, c * size + b);
    // Spread the pair links so every vertex gets a similar share.
    for (int pair = 0; pair < 2; ++pair) {
        int left = 2 * pair * size, right = left + size;
        for (int k = 0; k < pair_edges; ++k) e.emplace_back(left + k % size, right + (k + k / size) % size);
    }
    for (int k = 0; k < cross_edges; ++k) e.emplace_back(size + k % size, 2 * size + k % size);
    return Graph::from_edges(4 * size, e);
}

PlantedGraph planted_partition(int n, int blocks, double in_degree, double out_degree, std::uint64_t seed) {
    if (blocks < 1 || n < blocks) throw validation_error("planted partition needs n >= blocks >= 1");
    PlantedGraph out;
    out.labels.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) out.labels[std::size_t(i)] = i * blocks / n;
    double block = double(n) / blocks;
    double p_in = block > 1 ? in_degree / (block - 1) : 0;
    double p_out = blocks > 1 ? out_degree / (n - block) : 0;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::pair<int, int>> e;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (u(rng) < (out.labels[std::size_t(a)] == out.labels[std::size_t(b)] ? p_in : p_out)) e.emplace_back(a, b);
    out.graph = Graph::from_edges(n, e);
    return out;
}

Graph erdos_renyi(int n, double p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<std::pair<int, int>> e;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (u(rng) < p) e.emplace_back(a, b);
    return Graph::from_edges(n, e);
}

} // namespace lcot::graph
