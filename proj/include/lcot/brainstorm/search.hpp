#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/brainstorm/index.hpp"
#include "lcot/common/audit.hpp"
#include "lcot/gateway/gateway.hpp"
#include "lcot/store/knowledge_store.hpp"

namespace lcot::brainstorm {

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;
inline constexpr double kDefaultAlpha = 0.7;
inline constexpr double kExpansionWeight = 0.5;
inline constexpr std::size_t kMaxExpansionTerms = 8;

struct QueryTerm {
    std::string term;
    double weight = 1.0;
};

enum class ExpansionSource { deterministic, llm };

struct ExpandedQuery {
    std::string target;
    std::vector<QueryTerm> terms;
    ExpansionSource source = ExpansionSource::deterministic;
};

void to_json(nlohmann::json& j, const ExpandedQuery& q);

struct SearchHit {
    std::string qa_id;
    double relevance = 0.0;  // raw weighted BM25
    double norm = 0.0;       // relevance / max relevance in the result set
    double xdisc = 0.0;
    double score = 0.0;
    std::string course_id;
    std::string snippet;
};

void to_json(nlohmann::json& j, const SearchHit& h);
void from_json(const nlohmann::json& j, SearchHit& h);

struct Scaffold {
    std::string target;
    std::vector<SearchHit> what_why;
    std::vector<SearchHit> application;
};

void to_json(nlohmann::json& j, const Scaffold& s);

// Target tokens (and the whole target as a phrase when multiword) at weight
// 1.0. With a backend, up to 8 suggested terms are appended at weight 0.5; any
// backend failure falls back to the deterministic expansion.
ExpandedQuery expand_query(const std::string& target, const gateway::Gateway* gw = nullptr,
                           const std::string& backend_id = {}, AuditLog* log = nullptr);

std::string build_expansion_prompt(const std::string& target);

// Weighted BM25 contribution of one term in one document.
double bm25_term(double tf, double doc_length, double avg_doc_length, double idf);
double bm25_idf(double doc_count, double df);

// Top-k by alpha * norm(relevance) (xdisc is zero until rank_cross_domain),
// ties by ascending qa_id. Unknown terms give an empty result.
std::vector<SearchHit> search(const Index& index, const ExpandedQuery& query, std::size_t k,
                              double alpha = kDefaultAlpha);

// Greedy re-ranking: at each step every remaining hit gets
// xdisc = (1 - is_home) / (1 + log(1 + n_c)) with n_c the number of hits of its
// course already placed, and the highest alpha*norm + (1-alpha)*xdisc is taken
// next (ties keep input order). Repeated courses decay, so equal-relevance hits
// interleave across courses.
std::vector<SearchHit> rank_cross_domain(const std::vector<SearchHit>& hits, const Index& index,
                                         const std::string& home_course, double alpha = kDefaultAlpha,
                                         AuditLog* log = nullptr);

// Routes hits by stored category (reductionist -> what_why, application ->
// application). An optional backend may override individual hits with lines
// "<qa_id>: what_why|application". Unknown qa_ids are dropped and audited.
Scaffold categorize(const std::string& target, const std::vector<SearchHit>& hits, const store::KnowledgeStore& store,
                    const gateway::Gateway* gw = nullptr, const std::string& backend_id = {},
                    AuditLog* log = nullptr);

std::string build_categorize_prompt(const std::string& target, const std::vector<SearchHit>& hits,
                                    const store::KnowledgeStore& store);

// Window of at most max_bytes around the first occurrence of any query term,
// clipped to the question or to the chain so it is a substring of one of them.
std::string make_snippet(const IndexedDoc& doc, const ExpandedQuery& query, std::size_t max_bytes = 240);

} // namespace lcot::brainstorm
