#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/brainstorm/search.hpp"
#include "lcot/common/audit.hpp"
#include "lcot/gateway/gateway.hpp"
#include "lcot/store/knowledge_store.hpp"

namespace lcot::plato {

inline constexpr std::string_view kTakeaways = "Key Takeaways";
inline constexpr std::string_view kIntroduction = "Introduction";
inline constexpr std::string_view kPrinciples = "Principles and Mechanisms";
inline constexpr std::string_view kApplications = "Cross-Domain Applications";
inline constexpr std::array<std::string_view, 4> kStandardSections = {kTakeaways, kIntroduction, kPrinciples,
                                                                      kApplications};
inline constexpr std::size_t kWhatWhyBudget = 20;
inline constexpr std::size_t kApplicationBudget = 30;
inline constexpr std::size_t kDefaultKeywordCount = 10;

struct StyleGuide {
    std::string name;
    std::vector<std::string> directives;

    void validate() const;
    static StyleGuide pedagogical_default();
};

void to_json(nlohmann::json& j, const StyleGuide& s);
void from_json(const nlohmann::json& j, StyleGuide& s);
StyleGuide load_style_guide(const std::filesystem::path& path);

struct Section {
    std::string heading;
    std::string body;
};

struct Article {
    std::string keyword;
    std::string language;
    std::vector<Section> sections;
    std::map<std::string, std::vector<std::string>> provenance;  // heading -> qa_ids, first-citation order
    std::string model_name;
    bool grounded = false;
    // Set by the page workflow from the top hit; empty for baseline articles.
    std::string home_course;
    std::string discipline;

    const Section* section(std::string_view heading) const;
    std::vector<std::string> cited_qa_ids() const;
    // Section bodies joined, without headings.
    std::string body_text() const;
    // Markdown rendering with a title line and "## " section headings.
    std::string render() const;
};

void to_json(nlohmann::json& j, const Article& a);
void from_json(const nlohmann::json& j, Article& a);

struct KeywordSet {
    std::vector<std::string> keywords;
    std::string source_page;
};

void to_json(nlohmann::json& j, const KeywordSet& k);

// One numbered scaffold entry handed to the author model.
struct ContextBlock {
    std::string label;  // "S1", "S2", ...
    std::string qa_id;
    std::string_view section;  // kPrinciples or kApplications
    std::string question;
    std::string derivation;
    std::string answer;
};

// Applies the 20 + 30 budget in rank order. what_why blocks are numbered first.
std::vector<ContextBlock> build_context(const brainstorm::Scaffold& scaffold, const store::KnowledgeStore& store);

// The grounded and baseline prompts differ only inside <context>...</context>.
std::string build_author_prompt(const std::string& keyword, const std::string& language, const StyleGuide& style,
                                const std::vector<ContextBlock>& blocks);

// Splits "## " headed output into sections and resolves [Sn] citations into
// provenance. Fails on missing standard sections, on citations of unknown
// blocks, and on an uncited core section whose scaffold side is non-empty.
// Sections whose scaffold side is empty are replaced by a statement of absent
// coverage.
Article parse_article(const std::string& text, const std::string& keyword, const std::string& language,
                      const std::vector<ContextBlock>& blocks, bool grounded);

Article synthesize(const std::string& keyword, const brainstorm::Scaffold& scaffold, const store::KnowledgeStore& store,
                   const StyleGuide& style, const std::string& language, const gateway::Gateway& gw,
                   const std::string& backend_id);

Article baseline_generate(const std::string& keyword, const StyleGuide& style, const std::string& language,
                          const gateway::Gateway& gw, const std::string& backend_id);

// LLM extraction with a tf-idf fallback (idf from `corpus` when given) on
// backend failure or when no backend is configured. The article's own keyword
// is never returned.
KeywordSet extract_keywords(const Article& article, std::size_t n = kDefaultKeywordCount,
                            const gateway::Gateway* gw = nullptr, const std::string& backend_id = {},
                            const brainstorm::Index* corpus = nullptr, AuditLog* log = nullptr);

struct PageBackends {
    std::string author;
    std::string expander;     // optional
    std::string categorizer;  // optional
};

struct PageOptions {
    std::size_t pool = 200;
    double alpha = brainstorm::kDefaultAlpha;
};

// expand_query -> search -> rank_cross_domain -> categorize -> synthesize.
// Stage failures are rethrown with the stage name prefixed; an empty search
// result is a no_coverage error.
Article generate_page_workflow(const std::string& keyword, const brainstorm::Index& index,
                               const store::KnowledgeStore& store, const StyleGuide& style, const std::string& language,
                               const gateway::Gateway& gw, const PageBackends& backends, const PageOptions& options = {},
                               AuditLog* log = nullptr);

} // namespace lcot::plato
