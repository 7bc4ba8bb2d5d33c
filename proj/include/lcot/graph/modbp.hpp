#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "lcot/graph/graph.hpp"

namespace lcot::graph {

inline constexpr int kDefaultMaxIter = 500;
inline constexpr double kDefaultTol = 1e-6;
inline constexpr double kDefaultDamping = 0.1;
inline constexpr int kDefaultNullSamples = 20;
inline constexpr int kMinNullSamples = 5;
inline constexpr int kDefaultMinSize = 10;

// log(q / (sqrt(c) - 1) + 1) clamped to [0.1, 5].
double default_beta(int q, double mean_degree);

// Messages are stored per directed edge in the order of Graph::neighbors:
// edge (i, k-th neighbor) occupies slot offset(i) + k.
struct BPState {
    int q = 0;
    double beta = 0;
    std::vector<std::size_t> offsets;
    std::vector<double> messages;   // (offsets[i] + k) * q + t
    std::vector<double> marginals;  // i * q + t
    double free_energy_proxy = 0;
};

struct BPOptions {
    int q = 2;
    std::optional<double> beta;  // default_beta when unset
    int max_iter = kDefaultMaxIter;
    double tol = kDefaultTol;
    double damping = kDefaultDamping;
    std::uint64_t seed = 1;
    std::function<void(const BPState&)> on_sweep;
};

struct Partition {
    std::vector<int> labels;
    int q = 0;
    double beta = 0;
    double retrieval_modularity = 0;
    bool converged = false;
    int iterations = 0;

    int group_count() const;
    std::vector<std::vector<int>> groups() const;  // non-empty, by label
};

// Newman modularity of `labels` on g.
double modularity(const Graph& g, const std::vector<int>& labels);

// Normalized mutual information with arithmetic-mean normalization.
double nmi(const std::vector<int>& a, const std::vector<int>& b);

Partition modbp_partition(const Graph& g, const BPOptions& options);

enum class StructureTest { structured, structureless, too_small };
std::string_view to_string(StructureTest t);
StructureTest parse_structure_test(std::string_view s);

struct StructureResult {
    StructureTest test = StructureTest::structureless;
    double observed = 0;
    double null_mean = 0;
    double null_std = 0;
};

// Structured iff the observed modularity exceeds null_mean + 2 null_std over
// n_null degree-preserving rewirings clustered with the same q and beta.
StructureResult detect_structure(const Graph& g, const Partition& partition, int n_null = kDefaultNullSamples,
                                 std::uint64_t seed = 1, int min_size = kDefaultMinSize);

struct SelectOptions {
    int q_max = 5;
    int restarts = 5;
    int n_null = kDefaultNullSamples;
    int min_size = kDefaultMinSize;
    std::uint64_t seed = 1;
    std::optional<double> beta;
};

struct Selection {
    bool structured = false;
    int q = 0;
    Partition partition;
    StructureResult structure;
};

// Candidates q = 2..q_max (best of `restarts` seeds each) ranked by modularity,
// then fewer non-empty groups; the first that passes detect_structure wins.
// Selection::q is the number of non-empty groups of the winner.
Selection select_q(const Graph& g, const SelectOptions& options = {});

} // namespace lcot::graph
