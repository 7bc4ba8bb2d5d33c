#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/common/audit.hpp"
#include "lcot/gateway/gateway.hpp"
#include "lcot/graph/modbp.hpp"

namespace lcot::graph {

inline constexpr int kDefaultMaxDepth = 25;

struct HierarchyOptions {
    int q_max = 5;
    int restarts = 5;
    int n_null = kDefaultNullSamples;
    int min_size = kDefaultMinSize;
    int max_depth = kDefaultMaxDepth;
    std::uint64_t seed = 1;
};

struct Community {
    std::string id;  // "0" for the root, children append ".k"
    int level = 0;   // root is level 0
    std::vector<int> members;  // sorted vertex ids
    StructureTest structure_test = StructureTest::structureless;
    bool depth_limited = false;
    int q = 0;
    double modularity = 0;
    std::string title;
    std::vector<Community> children;

    bool is_leaf() const { return children.empty(); }
};

struct CommunityTree {
    Community root;
    std::vector<std::string> names;  // vertex id -> keyword

    int depth() const;  // deepest level
    std::size_t leaf_count() const;
    // Communities at a level, in id order.
    std::vector<const Community*> level(int l) const;
};

void to_json(nlohmann::json& j, const CommunityTree& t);
void from_json(const nlohmann::json& j, CommunityTree& t);

// Top-down recursion. A node stops when it is smaller than min_size, sits at
// max_depth, or its giant component shows no structure. Components below
// min_size become leaves directly; several large components split as they are.
CommunityTree build_hierarchy(const Graph& g, std::vector<std::string> names, const HierarchyOptions& options = {});

// Titles every community with at least min_size members; a backend failure
// leaves that community untitled and audited.
void summarize_communities(CommunityTree& tree, const gateway::Gateway& gw, const std::string& backend_id,
                           int min_size = kDefaultMinSize, AuditLog* log = nullptr);

} // namespace lcot::graph
