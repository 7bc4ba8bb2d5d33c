#include "lcot/plato/article.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include "lcot/common/error.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/text.hpp"

namespace lcot::plato {
namespace {

constexpr const char* kAuthorSystem =
    "You write encyclopedia articles that explain science through the derivations behind it.";
constexpr const char* kExtractorSystem = "You pick out the technical concepts an article depends on.";
constexpr std::size_t kDerivationBytes = 1200;

std::string clip(const std::string& s, std::size_t max_bytes) {
    auto flat = collapse_whitespace(s);
    if (flat.size() <= max_bytes) return flat;
    return flat.substr(0, utf8_floor(flat, max_bytes)) + " ...";
}

std::string absence_statement(const std::string& keyword, std::string_view heading) {
    if (heading == kPrinciples)
        return "The verified knowledge base does not yet hold derivations that explain " + keyword +
               " from first principles, so this section is left without content rather than filled with unverified "
               "material.";
    return "The verified knowledge base does not yet hold worked problems that apply " + keyword +
           " in other fields, so this section is left without content rather than filled with unverified material.";
}

bool same_heading(std::string_view a, std::string_view b) { return case_fold(trim(a)) == case_fold(trim(b)); }

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a",     "about", "above", "after", "again", "all",   "also",  "an",    "and",   "any",   "are",   "as",
        "at",    "be",    "because", "been", "before", "being", "between", "both", "but",  "by",    "can",   "could",
        "did",   "do",    "does",  "each",  "even",  "for",   "from",  "further", "had", "has",   "have",  "here",
        "how",   "however", "if",  "in",    "into",  "is",    "it",    "its",   "just",  "less",  "like",  "many",
        "may",   "more",  "most",  "much",  "must",  "no",    "not",   "now",   "of",    "on",    "one",   "only",
        "or",    "other", "our",   "out",   "over",  "same",  "see",   "should", "so",   "some",  "such",  "than",
        "that",  "the",   "their", "them",  "then",  "there", "these", "they",  "this",  "those", "through", "to",
        "two",   "under", "up",    "us",    "use",   "used",  "using", "very",  "was",   "we",    "were",  "what",
        "when",  "where", "which", "while", "who",   "why",   "will",  "with",  "within", "without", "would", "you",
        "your",  "section", "knowledge", "base", "yet", "content", "rather", "filled", "left", "verified", "material"};
    return words;
}

KeywordSet tfidf_keywords(const Article& article, std::size_t n, const brainstorm::Index* corpus) {
    KeywordSet out;
    out.source_page = article.keyword;
    auto self = normalize_keyword(article.keyword);
    std::map<std::string, double> tf;
    for (const auto& term : tokenize_terms(article.body_text())) {
        if (term.size() < 3 || stopwords().contains(term) || term == self) continue;
        if (std::all_of(term.begin(), term.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            continue;
        tf[term] += 1;
    }
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [term, f] : tf) {
        double idf = 1.0;
        if (corpus && corpus->doc_count() > 0)
            idf = brainstorm::bm25_idf(double(corpus->doc_count()), double(corpus->df(term)));
        scored.emplace_back(f * idf, term);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; i < scored.size() && out.keywords.size() < n; ++i) out.keywords.push_back(scored[i].second);
    return out;
}

Error staged(const char* stage, const Error& e) {
    return Error(e.code(), std::string(stage) + ": " + e.what(), e.detail());
}

} // namespace

void StyleGuide::validate() const {
    if (trim(name).empty()) throw validation_error("style guide needs a name");
    if (directives.empty()) throw validation_error("style guide " + name + " has no directives");
    for (const auto& d : directives)
        if (trim(d).empty()) throw validation_error("style guide " + name + " has an empty directive");
}

StyleGuide StyleGuide::pedagogical_default() {
    return {"pedagogical-default",
            {"Write for a curious reader with some undergraduate science, not for specialists.",
             "Start each idea from a physical or intuitive picture, then bring in the formalism that makes it precise.",
             "Show where every key result comes from; never state an equation without the reasoning that produces it.",
             "Prefer one carefully developed analogy to several loose ones, and say where the analogy breaks down.",
             "Write equations in inline LaTeX and define every symbol the first time it appears.",
             "Point out links to other disciplines whenever the supplied derivations support them."}};
}

void to_json(nlohmann::json& j, const StyleGuide& s) { j = {{"name", s.name}, {"directives", s.directives}}; }

void from_json(const nlohmann::json& j, StyleGuide& s) {
    s.name = j.at("name").get<std::string>();
    s.directives = j.at("directives").get<std::vector<std::string>>();
    s.validate();
}

StyleGuide load_style_guide(const std::filesystem::path& path) { return read_json_file(path).get<StyleGuide>(); }

const Section* Article::section(std::string_view heading) const {
    for (const auto& s : sections)
        if (same_heading(s.heading, heading)) return &s;
    return nullptr;
}

std::vector<std::string> Article::cited_qa_ids() const {
    std::set<std::string> ids;
    for (const auto& [h, list] : provenance) ids.insert(list.begin(), list.end());
    return {ids.begin(), ids.end()};
}

std::string Article::body_text() const {
    std::string out;
    for (const auto& s : sections) out += s.body + "\n\n";
    return out;
}

std::string Article::render() const {
    std::string out = "# " + keyword + "\n";
    for (const auto& s : sections) out += "\n## " + s.heading + "\n\n" + s.body + "\n";
    return out;
}

void to_json(nlohmann::json& j, const Article& a) {
    nlohmann::json sections = nlohmann::json::array();
    for (const auto& s : a.sections) sections.push_back({{"heading", s.heading}, {"body", s.body}});
    j = {{"keyword", a.keyword},         {"language", a.language},       {"sections", std::move(sections)},
         {"provenance", a.provenance},   {"model_name", a.model_name},   {"grounded", a.grounded},
         {"home_course", a.home_course}, {"discipline", a.discipline}};
}

void from_json(const nlohmann::json& j, Article& a) {
    a.keyword = j.at("keyword").get<std::string>();
    a.language = j.value("language", "en");
    a.sections.clear();
    for (const auto& s : j.at("sections")) a.sections.push_back({s.at("heading"), s.at("body")});
    a.provenance = j.value("provenance", std::map<std::string, std::vector<std::string>>{});
    a.model_name = j.value("model_name", "");
    a.grounded = j.value("grounded", false);
    a.home_course = j.value("home_course", "");
    a.discipline = j.value("discipline", "");
}

void to_json(nlohmann::json& j, const KeywordSet& k) {
    j = {{"keywords", k.keywords}, {"source_page", k.source_page}};
}

std::vector<ContextBlock> build_context(const brainstorm::Scaffold& scaffold, const store::KnowledgeStore& store) {
    std::vector<ContextBlock> blocks;
    auto add = [&](const std::vector<brainstorm::SearchHit>& hits, std::size_t budget, std::string_view section) {
        for (std::size_t i = 0; i < hits.size() && i < budget; ++i) {
            const auto& q = store.get(hits[i].qa_id);
            ContextBlock b;
            b.label = "S" + std::to_string(blocks.size() + 1);
            b.qa_id = q.qa_id;
            b.section = section;
            b.question = collapse_whitespace(q.question);
            b.derivation = clip(q.chain_text, kDerivationBytes);
            b.answer = collapse_whitespace(q.answer.text());
            blocks.push_back(std::move(b));
        }
    };
    add(scaffold.what_why, kWhatWhyBudget, kPrinciples);
    add(scaffold.application, kApplicationBudget, kApplications);
    return blocks;
}

std::string build_author_prompt(const std::string& keyword, const std::string& language, const StyleGuide& style,
                                const std::vector<ContextBlock>& blocks) {
    std::string p = "Role: author\nKeyword: " + keyword + "\nLanguage: " + language + "\nStyle: " + style.name + "\n";
    for (const auto& d : style.directives) p += "Directive: " + d + "\n";
    p += "\nWrite an encyclopedia article about the keyword in the requested language. Use exactly these sections, "
         "each opened by a line of the form \"## <heading>\":";
    for (auto h : kStandardSections) p += " " + std::string(h) + ";";
    p.back() = '.';
    p += "\nBuild the article on the numbered context blocks below. Cite a block by writing its label in square "
         "brackets, for example [S2], wherever you rely on it. Blocks listed for Principles and Mechanisms explain the "
         "keyword; blocks listed for Cross-Domain Applications show it at work in other settings. If a section has no "
         "blocks, state that the knowledge base has no coverage for it instead of inventing material.\n\n";
    p += "<context>\n";
    if (!blocks.empty()) {
        for (auto section : {kPrinciples, kApplications}) {
            p += "Cite in " + std::string(section) + ":";
            for (const auto& b : blocks)
                if (b.section == section) p += " [" + b.label + "]";
            p += "\n";
        }
        for (const auto& b : blocks) {
            const char* kind = b.section == kPrinciples ? "What-why" : "Application";
            p += std::string(kind) + " [" + b.label + "]: " + b.question + "\n";
            p += "Derivation [" + b.label + "]: " + b.derivation + "\n";
            p += "Answer [" + b.label + "]: " + b.answer + "\n";
        }
    }
    p += "</context>\n";
    return p;
}

Article parse_article(const std::string& text, const std::string& keyword, const std::string& language,
                      const std::vector<ContextBlock>& blocks, bool grounded) {
    Article a;
    a.keyword = keyword;
    a.language = language;
    a.grounded = grounded;

    for (const auto& line : split_lines(text)) {
        auto t = trim(line);
        if (t.rfind("## ", 0) == 0) {
            std::string heading = trim(t.substr(3));
            for (auto std_heading : kStandardSections)
                if (same_heading(heading, std_heading)) heading = std::string(std_heading);
            a.sections.push_back({heading, {}});
        } else if (!a.sections.empty()) {
            a.sections.back().body += line + "\n";
        }
    }
    for (auto& s : a.sections) s.body = trim(s.body);
    for (auto h : kStandardSections)
        if (!a.section(h)) throw parse_error("author output lacks the section \"" + std::string(h) + "\"", text);

    std::map<std::string, const ContextBlock*> by_label;
    std::map<std::string_view, std::size_t> side_size;
    for (const auto& b : blocks) {
        by_label[b.label] = &b;
        ++side_size[b.section];
    }
    static const std::regex cite(R"(\[S(\d+)\])");
    for (auto& s : a.sections) {
        if (grounded && (s.heading == kPrinciples || s.heading == kApplications) && side_size[s.heading] == 0) {
            s.body = absence_statement(keyword, s.heading);
            continue;
        }
        std::vector<std::string> ids;
        for (std::sregex_iterator it(s.body.begin(), s.body.end(), cite), end; it != end; ++it) {
            std::string label = "S" + (*it)[1].str();
            auto found = by_label.find(label);
            if (found == by_label.end())
                throw validation_error("section \"" + s.heading + "\" cites [" + label + "], which is not in the scaffold",
                                       text);
            if (std::find(ids.begin(), ids.end(), found->second->qa_id) == ids.end())
                ids.push_back(found->second->qa_id);
        }
        if (!ids.empty()) a.provenance[s.heading] = std::move(ids);
    }
    if (grounded) {
        for (auto core : {kPrinciples, kApplications}) {
            if (side_size[core] > 0 && !a.provenance.contains(std::string(core)))
                throw validation_error("section \"" + std::string(core) + "\" cites none of its scaffold blocks", text);
        }
    }
    return a;
}

Article synthesize(const std::string& keyword, const brainstorm::Scaffold& scaffold, const store::KnowledgeStore& store,
                   const StyleGuide& style, const std::string& language, const gateway::Gateway& gw,
                   const std::string& backend_id) {
    if (normalize_keyword(scaffold.target) != normalize_keyword(keyword))
        throw validation_error("scaffold target \"" + scaffold.target + "\" does not match keyword \"" + keyword + "\"");
    if (scaffold.what_why.empty() && scaffold.application.empty())
        throw validation_error("grounded synthesis needs a non-empty scaffold for \"" + keyword + "\"");
    style.validate();
    auto blocks = build_context(scaffold, store);
    auto req = gateway::make_request(kAuthorSystem, build_author_prompt(keyword, language, style, blocks),
                                     gateway::kAuthorTemperature);
    auto resp = gw.complete(backend_id, req);
    auto article = parse_article(resp.text, keyword, language, blocks, true);
    article.model_name = gw.spec(backend_id).model_name;
    return article;
}

Article baseline_generate(const std::string& keyword, const StyleGuide& style, const std::string& language,
                          const gateway::Gateway& gw, const std::string& backend_id) {
    style.validate();
    auto req = gateway::make_request(kAuthorSystem, build_author_prompt(keyword, language, style, {}),
                                     gateway::kAuthorTemperature);
    auto resp = gw.complete(backend_id, req);
    auto article = parse_article(resp.text, keyword, language, {}, false);
    article.model_name = gw.spec(backend_id).model_name;
    return article;
}

KeywordSet extract_keywords(const Article& article, std::size_t n, const gateway::Gateway* gw,
                            const std::string& backend_id, const brainstorm::Index* corpus, AuditLog* log) {
    if (trim(article.body_text()).empty()) throw validation_error("cannot extract keywords from an empty article");
    if (!gw || backend_id.empty()) return tfidf_keywords(article, n, corpus);

    std::string reply;
    try {
        std::string prompt = "Role: keyword-extractor\nKeyword: " + article.keyword + "\nCount: " + std::to_string(n) +
                             "\n\nList the most relevant technical concepts this article relies on, other than the "
                             "keyword itself, one per line.\n\n<article>\n" + article.render() + "</article>\n";
        reply = gw->complete(backend_id, gateway::make_request(kExtractorSystem, prompt, gateway::kSolverTemperature)).text;
    } catch (const Error& e) {
        audit(log, "extract_keywords", article.keyword, std::string("backend failed, using tf-idf: ") + e.what());
        return tfidf_keywords(article, n, corpus);
    }
    KeywordSet out;
    out.source_page = article.keyword;
    auto self = normalize_keyword(article.keyword);
    for (const auto& line : split_lines(reply)) {
        if (out.keywords.size() >= n) break;
        std::string s = trim(line);
        std::size_t i = 0;
        while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) ||
                                std::string_view("-*.)#\t ").find(s[i]) != std::string_view::npos))
            ++i;
        auto k = normalize_keyword(s.substr(i));
        if (k.empty() || k == self) continue;
        if (std::find(out.keywords.begin(), out.keywords.end(), k) == out.keywords.end()) out.keywords.push_back(k);
    }
    if (out.keywords.empty()) {
        audit(log, "extract_keywords", article.keyword, "backend returned no usable keywords, using tf-idf");
        return tfidf_keywords(article, n, corpus);
    }
    return out;
}

Article generate_page_workflow(const std::string& keyword, const brainstorm::Index& index,
                               const store::KnowledgeStore& store, const StyleGuide& style, const std::string& language,
                               const gateway::Gateway& gw, const PageBackends& backends, const PageOptions& options,
                               AuditLog* log) {
    brainstorm::ExpandedQuery query;
    try {
        query = brainstorm::expand_query(keyword, backends.expander.empty() ? nullptr : &gw, backends.expander, log);
    } catch (const Error& e) {
        throw staged("expand_query", e);
    }
    std::vector<brainstorm::SearchHit> hits;
    try {
        hits = brainstorm::search(index, query, std::max<std::size_t>(1, options.pool), options.alpha);
    } catch (const Error& e) {
        throw staged("search", e);
    }
    if (hits.empty()) throw Error(ErrorCode::no_coverage, "search: no coverage for \"" + keyword + "\"");

    // The home field is the course of the most relevant chain.
    auto top = std::max_element(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
        if (a.relevance != b.relevance) return a.relevance < b.relevance;
        return a.qa_id > b.qa_id;
    });
    std::string home = top->course_id;
    try {
        hits = brainstorm::rank_cross_domain(hits, index, home, options.alpha, log);
    } catch (const Error& e) {
        throw staged("rank_cross_domain", e);
    }
    brainstorm::Scaffold scaffold;
    try {
        scaffold = brainstorm::categorize(keyword, hits, store, backends.categorizer.empty() ? nullptr : &gw,
                                          backends.categorizer, log);
    } catch (const Error& e) {
        throw staged("categorize", e);
    }
    Article article;
    try {
        article = synthesize(keyword, scaffold, store, style, language, gw, backends.author);
    } catch (const Error& e) {
        throw staged("synthesize", e);
    }
    article.home_course = home;
    if (store.curriculum().has_course(home))
        article.discipline = std::string(to_string(store.curriculum().course(home).discipline));
    return article;
}

} // namespace lcot::plato
