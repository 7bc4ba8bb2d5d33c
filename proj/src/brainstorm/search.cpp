#include "lcot/brainstorm/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "lcot/common/error.hpp"
#include "lcot/common/text.hpp"

namespace lcot::brainstorm {
namespace {

constexpr const char* kExpanderSystem = "You map a scientific concept to the vocabulary of neighbouring fields.";
constexpr const char* kCategorizerSystem = "You sort worked science problems by the kind of understanding they build.";

void add_term(std::vector<QueryTerm>& terms, const std::string& term, double weight) {
    if (term.empty()) return;
    for (auto& t : terms) {
        if (t.term == term) {
            t.weight = std::max(t.weight, weight);
            return;
        }
    }
    terms.push_back({term, weight});
}

// "- tunneling", "2. qcd vacuum," -> bare suggestion text.
std::string clean_suggestion(std::string line) {
    line = trim(line);
    std::size_t i = 0;
    while (i < line.size() && (std::isdigit(static_cast<unsigned char>(line[i])) ||
                               std::string_view("-*.)#\t ").find(line[i]) != std::string_view::npos))
        ++i;
    line = line.substr(i);
    while (!line.empty() && std::string_view(",;.").find(line.back()) != std::string_view::npos) line.pop_back();
    return normalize_keyword(line);
}

} // namespace

void to_json(nlohmann::json& j, const ExpandedQuery& q) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : q.terms) terms.push_back({{"term", t.term}, {"weight", t.weight}});
    j = {{"target", q.target},
         {"terms", std::move(terms)},
         {"source", q.source == ExpansionSource::llm ? "llm" : "deterministic"}};
}

void to_json(nlohmann::json& j, const SearchHit& h) {
    j = {{"qa_id", h.qa_id},   {"relevance", h.relevance}, {"norm", h.norm},      {"xdisc", h.xdisc},
         {"score", h.score},   {"course_id", h.course_id}, {"snippet", h.snippet}};
}

void from_json(const nlohmann::json& j, SearchHit& h) {
    h.qa_id = j.at("qa_id").get<std::string>();
    h.relevance = j.value("relevance", 0.0);
    h.norm = j.value("norm", 0.0);
    h.xdisc = j.value("xdisc", 0.0);
    h.score = j.value("score", 0.0);
    h.course_id = j.value("course_id", "");
    h.snippet = j.value("snippet", "");
}

void to_json(nlohmann::json& j, const Scaffold& s) {
    j = {{"target", s.target}, {"what_why", s.what_why}, {"application", s.application}};
}

std::string build_expansion_prompt(const std::string& target) {
    return "Role: expander\nTarget: " + target +
           "\n\nList up to " + std::to_string(kMaxExpansionTerms) +
           " related technical terms under which derivations involving the target are likely to appear, "
           "including terms from other disciplines. One term per line, no commentary.\n";
}

ExpandedQuery expand_query(const std::string& target, const gateway::Gateway* gw, const std::string& backend_id,
                           AuditLog* log) {
    ExpandedQuery q;
    q.target = trim(target);
    auto tokens = tokenize_terms(q.target);
    if (tokens.empty()) throw validation_error("search target has no searchable words", target);
    for (const auto& t : tokens) add_term(q.terms, t, 1.0);
    if (tokens.size() > 1) add_term(q.terms, normalize_keyword(q.target), 1.0);
    if (!gw || backend_id.empty()) return q;

    std::string reply;
    try {
        auto req = gateway::make_request(kExpanderSystem, build_expansion_prompt(q.target), gateway::kSolverTemperature);
        reply = gw->complete(backend_id, req).text;
    } catch (const Error& e) {
        audit(log, "expand_query", q.target, std::string("backend failed, using deterministic terms: ") + e.what());
        return q;
    }
    std::size_t taken = 0;
    std::size_t before = q.terms.size();
    for (const auto& line : split_lines(reply)) {
        if (taken >= kMaxExpansionTerms) break;
        auto s = clean_suggestion(line);
        if (s.empty()) continue;
        ++taken;
        auto parts = tokenize_terms(s);
        for (const auto& p : parts) add_term(q.terms, p, kExpansionWeight);
        if (parts.size() > 1) add_term(q.terms, s, kExpansionWeight);
    }
    if (q.terms.size() > before) q.source = ExpansionSource::llm;
    return q;
}

double bm25_idf(double doc_count, double df) { return std::log(1.0 + (doc_count - df + 0.5) / (df + 0.5)); }

double bm25_term(double tf, double doc_length, double avg_doc_length, double idf) {
    return idf * (tf * (kBm25K1 + 1.0)) / (tf + kBm25K1 * (1.0 - kBm25B + kBm25B * doc_length / avg_doc_length));
}

std::vector<SearchHit> search(const Index& index, const ExpandedQuery& query, std::size_t k, double alpha) {
    if (k < 1) throw validation_error("k must be >= 1");
    if (alpha < 0.0 || alpha > 1.0) throw validation_error("alpha must lie in [0,1]");
    const double n = double(index.doc_count());
    std::vector<double> acc(index.doc_count(), 0.0);
    std::vector<char> touched(index.doc_count(), 0);
    for (const auto& qt : query.terms) {
        auto it = index.postings.find(qt.term);
        if (it == index.postings.end() || qt.weight <= 0) continue;
        double idf = bm25_idf(n, double(it->second.size()));
        for (const auto& p : it->second) {
            acc[p.doc] += qt.weight * bm25_term(double(p.tf), double(index.docs[p.doc].length), index.avg_doc_length, idf);
            touched[p.doc] = 1;
        }
    }
    std::vector<SearchHit> hits;
    double max_rel = 0;
    for (std::size_t d = 0; d < acc.size(); ++d) {
        if (!touched[d]) continue;
        SearchHit h;
        h.qa_id = index.docs[d].qa_id;
        h.course_id = index.docs[d].course_id;
        h.relevance = acc[d];
        max_rel = std::max(max_rel, acc[d]);
        hits.push_back(std::move(h));
    }
    for (auto& h : hits) {
        h.norm = max_rel > 0 ? h.relevance / max_rel : 0.0;
        h.score = alpha * h.norm;
    }
    std::stable_sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.qa_id < b.qa_id;
    });
    if (hits.size() > k) hits.resize(k);
    for (auto& h : hits) h.snippet = make_snippet(*index.find(h.qa_id), query);
    return hits;
}

std::vector<SearchHit> rank_cross_domain(const std::vector<SearchHit>& hits, const Index& index,
                                         const std::string& home_course, double alpha, AuditLog* log) {
    if (alpha < 0.0 || alpha > 1.0) throw validation_error("alpha must lie in [0,1]");
    std::vector<SearchHit> pending = hits;
    std::vector<std::optional<std::string>> course(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
        if (const auto* doc = index.find(pending[i].qa_id)) {
            course[i] = doc->course_id;
            pending[i].course_id = doc->course_id;
        } else {
            audit(log, "rank_cross_domain", pending[i].qa_id, "hit has no known course; xdisc set to 0");
        }
    }
    std::map<std::string, std::size_t> placed;
    std::vector<char> used(pending.size(), 0);
    std::vector<SearchHit> out;
    out.reserve(pending.size());
    for (std::size_t step = 0; step < pending.size(); ++step) {
        std::size_t best = pending.size();
        double best_score = 0, best_x = 0;
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (used[i]) continue;
            double x = 0.0;
            if (course[i] && *course[i] != home_course) x = 1.0 / (1.0 + std::log(1.0 + double(placed[*course[i]])));
            double s = alpha * pending[i].norm + (1.0 - alpha) * x;
            if (best == pending.size() || s > best_score) {
                best = i;
                best_score = s;
                best_x = x;
            }
        }
        used[best] = 1;
        pending[best].xdisc = best_x;
        pending[best].score = best_score;
        if (course[best]) ++placed[*course[best]];
        out.push_back(std::move(pending[best]));
    }
    return out;
}

std::string build_categorize_prompt(const std::string& target, const std::vector<SearchHit>& hits,
                                    const store::KnowledgeStore& store) {
    std::string p = "Role: categorizer\nTarget: " + target + "\n\n";
    p += "Label each problem what_why if it explains or derives the target from first principles, or application "
         "if it uses the target in a concrete setting. Reply with one line per problem: <id>: what_why|application.\n\n";
    for (const auto& h : hits) {
        if (!store.contains(h.qa_id)) continue;
        p += "Item " + h.qa_id + ": " + collapse_whitespace(store.get(h.qa_id).question) + "\n";
    }
    return p;
}

Scaffold categorize(const std::string& target, const std::vector<SearchHit>& hits, const store::KnowledgeStore& store,
                    const gateway::Gateway* gw, const std::string& backend_id, AuditLog* log) {
    Scaffold s;
    s.target = target;
    std::map<std::string, Category> overrides;
    if (gw && !backend_id.empty() && !hits.empty()) {
        try {
            auto req = gateway::make_request(kCategorizerSystem, build_categorize_prompt(target, hits, store),
                                             gateway::kSolverTemperature);
            for (const auto& line : split_lines(gw->complete(backend_id, req).text)) {
                auto colon = line.find(':');
                if (colon == std::string::npos) continue;
                auto id = trim(line.substr(0, colon));
                auto label = case_fold(trim(line.substr(colon + 1)));
                if (label == "what_why") overrides[id] = Category::reductionist;
                else if (label == "application") overrides[id] = Category::application;
            }
        } catch (const Error& e) {
            audit(log, "categorize", target, std::string("override backend failed, using stored categories: ") + e.what());
        }
    }
    std::set<std::string> seen;
    for (const auto& h : hits) {
        if (!store.contains(h.qa_id)) {
            audit(log, "categorize", h.qa_id, "hit does not resolve in the store; dropped");
            continue;
        }
        if (!seen.insert(h.qa_id).second) continue;
        Category c = store.get(h.qa_id).category;
        if (auto it = overrides.find(h.qa_id); it != overrides.end()) c = it->second;
        (c == Category::reductionist ? s.what_why : s.application).push_back(h);
    }
    return s;
}

std::string make_snippet(const IndexedDoc& doc, const ExpandedQuery& query, std::size_t max_bytes) {
    std::set<std::string> wanted;
    for (const auto& t : query.terms)
        for (auto& part : tokenize_terms(t.term)) wanted.insert(std::move(part));

    std::string_view text = doc.text;
    std::size_t qbytes = std::min<std::size_t>(doc.question_bytes, text.size());
    struct Region {
        std::size_t begin, end;
    };
    Region regions[] = {{0, qbytes}, {std::min(qbytes + 1, text.size()), text.size()}};
    for (const auto& r : regions) {
        std::string_view part = text.substr(r.begin, r.end - r.begin);
        for (const auto& tok : tokenize(part)) {
            if (!wanted.contains(tok.term)) continue;
            std::size_t lead = max_bytes / 3;
            std::size_t start = tok.begin > lead ? tok.begin - lead : 0;
            start = utf8_floor(part, start);
            std::size_t end = std::min(part.size(), start + max_bytes);
            end = utf8_floor(part, end);
            if (end < tok.end) end = std::min(part.size(), tok.end);
            return trim(part.substr(start, end - start));
        }
    }
    std::string_view question = text.substr(0, qbytes);
    return trim(question.substr(0, utf8_floor(question, std::min(question.size(), max_bytes))));
}

} // namespace lcot::brainstorm
