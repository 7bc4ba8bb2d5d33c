#include "lcot/graph/hierarchy.hpp"

#include <algorithm>
#include <map>

#include "lcot/common/error.hpp"
#include "lcot/common/hash.hpp"
#include "lcot/common/text.hpp"

namespace lcot::graph {
namespace {

constexpr std::size_t kTitleMembers = 40;

struct Builder {
    const Graph& g;
    const HierarchyOptions& opt;

    static std::vector<int> lift(const std::vector<int>& local, const std::vector<int>& members) {
        std::vector<int> out;
        out.reserve(local.size());
        for (int v : local) out.push_back(members[std::size_t(v)]);
        std::sort(out.begin(), out.end());
        return out;
    }

    void adopt(Community& c, std::vector<std::vector<int>> parts) {
        std::stable_sort(parts.begin(), parts.end(), [](const auto& a, const auto& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return a.front() < b.front();
        });
        for (std::size_t k = 0; k < parts.size(); ++k)
            c.children.push_back(build(std::move(parts[k]), c.level + 1, c.id + "." + std::to_string(k)));
    }

    Community build(std::vector<int> members, int level, std::string id) {
        Community c;
        c.id = std::move(id);
        c.level = level;
        c.members = std::move(members);
        if (int(c.members.size()) < opt.min_size) {
            c.structure_test = StructureTest::too_small;
            return c;
        }
        if (level >= opt.max_depth) {
            c.depth_limited = true;
            return c;
        }
        auto sub = g.induced(c.members);
        auto comps = sub.components();
        std::size_t large = 0;
        for (const auto& comp : comps) large += int(comp.size()) >= opt.min_size;

        if (comps.size() > 1 && large != 1) {
            // Disconnected pieces are communities in their own right.
            std::vector<int> labels(c.members.size());
            std::vector<std::vector<int>> parts;
            for (std::size_t k = 0; k < comps.size(); ++k) {
                for (int v : comps[k]) labels[std::size_t(v)] = int(k);
                parts.push_back(lift(comps[k], c.members));
            }
            c.structure_test = StructureTest::structured;
            c.q = int(comps.size());
            c.modularity = modularity(sub, labels);
            adopt(c, std::move(parts));
            return c;
        }

        const auto& giant_local = comps.front();
        auto giant = g.induced(lift(giant_local, c.members));
        auto giant_members = lift(giant_local, c.members);
        SelectOptions so;
        so.q_max = opt.q_max;
        so.restarts = opt.restarts;
        so.n_null = opt.n_null;
        so.min_size = opt.min_size;
        so.seed = mix64(opt.seed ^ fnv1a64(c.id));
        auto sel = select_q(giant, so);
        c.structure_test = sel.structure.test;
        if (!sel.structured) return c;

        c.structure_test = StructureTest::structured;
        c.q = sel.q;
        c.modularity = sel.partition.retrieval_modularity;
        std::vector<std::vector<int>> parts;
        for (const auto& grp : sel.partition.groups()) parts.push_back(lift(grp, giant_members));
        for (std::size_t k = 1; k < comps.size(); ++k) parts.push_back(lift(comps[k], c.members));
        adopt(c, std::move(parts));
        return c;
    }
};

void collect(const Community& c, int level, std::vector<const Community*>& out) {
    if (c.level == level) {
        out.push_back(&c);
        return;
    }
    for (const auto& ch : c.children) collect(ch, level, out);
}

int deepest(const Community& c) {
    int d = c.level;
    for (const auto& ch : c.children) d = std::max(d, deepest(ch));
    return d;
}

std::size_t leaves(const Community& c) {
    if (c.is_leaf()) return 1;
    std::size_t n = 0;
    for (const auto& ch : c.children) n += leaves(ch);
    return n;
}

nlohmann::json node_json(const Community& c, const std::vector<std::string>& names) {
    nlohmann::json members = nlohmann::json::array();
    for (int v : c.members) members.push_back(names[std::size_t(v)]);
    nlohmann::json children = nlohmann::json::array();
    for (const auto& ch : c.children) children.push_back(node_json(ch, names));
    nlohmann::json j = {{"id", c.id},
                        {"level", c.level},
                        {"size", c.members.size()},
                        {"members", std::move(members)},
                        {"structure_test", to_string(c.structure_test)},
                        {"depth_limited", c.depth_limited},
                        {"q", c.q},
                        {"modularity", c.modularity},
                        {"children", std::move(children)}};
    j["title"] = c.title.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.title);
    return j;
}

Community node_from_json(const nlohmann::json& j, const std::map<std::string, int>& index) {
    Community c;
    c.id = j.at("id").get<std::string>();
    c.level = j.at("level").get<int>();
    for (const auto& m : j.at("members")) {
        auto it = index.find(m.get<std::string>());
        if (it == index.end()) throw parse_error("community " + c.id + " names an unknown keyword");
        c.members.push_back(it->second);
    }
    std::sort(c.members.begin(), c.members.end());
    c.structure_test = parse_structure_test(j.at("structure_test").get<std::string>());
    c.depth_limited = j.value("depth_limited", false);
    c.q = j.value("q", 0);
    c.modularity = j.value("modularity", 0.0);
    if (j.contains("title") && j["title"].is_string()) c.title = j["title"].get<std::string>();
    for (const auto& ch : j.at("children")) c.children.push_back(node_from_json(ch, index));
    return c;
}

void titles(Community& c, const gateway::Gateway& gw, const std::string& backend_id, int min_size,
            const std::vector<std::string>& names, AuditLog* log) {
    for (auto& ch : c.children) titles(ch, gw, backend_id, min_size, names, log);
    c.title.clear();
    if (int(c.members.size()) < min_size) return;
    std::vector<std::string> words;
    for (int v : c.members) words.push_back(names[std::size_t(v)]);
    std::sort(words.begin(), words.end());
    std::string prompt = "Role: community-titler\nCommunity: " + c.id + "\nSize: " + std::to_string(words.size()) +
                         "\nMembers:";
    for (std::size_t i = 0; i < words.size() && i < kTitleMembers; ++i) prompt += (i ? "; " : " ") + words[i];
    prompt += "\n\nGive a short title, a few words, naming the scientific area these keywords share.\n";
    try {
        auto reply = gw.complete(backend_id, gateway::make_request("You name clusters of scientific keywords.", prompt, 0.0));
        for (const auto& line : split_lines(reply.text)) {
            auto t = trim(line);
            if (starts_with_ci(t, "title:")) t = trim(t.substr(6));
            if (!t.empty()) {
                c.title = t;
                break;
            }
        }
        if (c.title.empty()) audit(log, "summarize_communities", c.id, "backend returned an empty title");
    } catch (const Error& e) {
        audit(log, "summarize_communities", c.id, std::string("left untitled: ") + e.what());
    }
}

} // namespace

int CommunityTree::depth() const { return deepest(root); }

std::size_t CommunityTree::leaf_count() const { return leaves(root); }

std::vector<const Community*> CommunityTree::level(int l) const {
    std::vector<const Community*> out;
    collect(root, l, out);
    return out;
}

void to_json(nlohmann::json& j, const CommunityTree& t) {
    j = {{"format", "lcot-community-tree"},
         {"version", 1},
         {"levels", t.depth() + 1},
         {"leaves", t.leaf_count()},
         {"root", node_json(t.root, t.names)}};
}

void from_json(const nlohmann::json& j, CommunityTree& t) {
    if (j.value("format", "") != "lcot-community-tree") throw parse_error("not a community tree");
    const auto& root = j.at("root");
    t.names = root.at("members").get<std::vector<std::string>>();
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < t.names.size(); ++i) index[t.names[i]] = int(i);
    t.root = node_from_json(root, index);
}

CommunityTree build_hierarchy(const Graph& g, std::vector<std::string> names, const HierarchyOptions& options) {
    if (g.size() == 0) throw validation_error("cannot cluster an empty graph");
    if (names.empty()) {
        for (int i = 0; i < g.size(); ++i) names.push_back(std::to_string(i));
    }
    if (int(names.size()) != g.size()) throw validation_error("one name per vertex is required");
    if (options.min_size < 1 || options.max_depth < 0) throw validation_error("bad hierarchy bounds");
    CommunityTree t;
    t.names = std::move(names);
    std::vector<int> all(static_cast<std::size_t>(g.size()));
    for (int i = 0; i < g.size(); ++i) all[std::size_t(i)] = i;
    Builder b{g, options};
    t.root = b.build(std::move(all), 0, "0");
    return t;
}

void summarize_communities(CommunityTree& tree, const gateway::Gateway& gw, const std::string& backend_id,
                           int min_size, AuditLog* log) {
    titles(tree.root, gw, backend_id, min_size, tree.names, log);
}

} // namespace lcot::graph
