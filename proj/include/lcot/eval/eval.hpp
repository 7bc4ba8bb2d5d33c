#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/common/audit.hpp"
#include "lcot/gateway/gateway.hpp"
#include "lcot/plato/article.hpp"

namespace lcot::eval {

inline constexpr std::string_view kUnattributed = "unattributed";
inline constexpr const char* kJudgeSystem = "You are a strict scientific reviewer of encyclopedia articles.";

enum class Variant { plato, baseline };

std::string_view to_string(Variant v);
void to_json(nlohmann::json& j, Variant v);
void from_json(const nlohmann::json& j, Variant& v);

struct FactCheck {
    std::size_t claims = 0;
    std::size_t errors = 0;
};

struct EvalReport {
    std::string keyword;
    Variant variant = Variant::plato;
    std::string discipline;
    std::size_t knowledge_points = 0;
    std::size_t claims = 0;
    std::size_t errors = 0;
    std::size_t words = 0;
    std::string judge_model;

    double error_rate() const { return claims ? double(errors) / double(claims) : 0.0; }
    double kp_per_1000_words() const { return words ? 1000.0 * double(knowledge_points) / double(words) : 0.0; }
};

void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

struct DisciplineRow {
    std::string discipline;
    std::size_t pairs = 0;
    double plato_knowledge_points = 0;
    double baseline_knowledge_points = 0;
    double plato_error_rate = 0;
    double baseline_error_rate = 0;
    double plato_kp_per_1000_words = 0;
    double baseline_kp_per_1000_words = 0;

    // Null when the baseline rate is zero.
    std::optional<double> reduction_ratio() const;
};

struct ComparisonReport {
    std::vector<DisciplineRow> rows;  // sorted by discipline
    DisciplineRow overall;            // discipline "all"
    std::vector<EvalReport> reports;  // plato then baseline per pair, keyword order
    std::string judge_model;

    std::string to_csv() const;
};

void to_json(nlohmann::json& j, const DisciplineRow& r);
void to_json(nlohmann::json& j, const ComparisonReport& r);

// Judge replies with a numbered list, or NONE. An article without body text
// scores 0 without consulting the judge.
std::size_t count_knowledge_points(const plato::Article& article, const gateway::Gateway& gw,
                                   const std::string& judge_backend);

// Judge replies with one "CLAIM: <text> VERDICT: correct|incorrect" line per
// claim, or NONE. An incorrect verdict on text that does not occur in the
// article is discarded together with its claim and audited.
FactCheck count_factual_errors(const plato::Article& article, const gateway::Gateway& gw,
                               const std::string& judge_backend, AuditLog* log = nullptr);

std::size_t word_count(const plato::Article& article);

EvalReport evaluate_article(const plato::Article& article, Variant variant, const gateway::Gateway& gw,
                            const std::string& judge_backend, AuditLog* log = nullptr);

// Pairs articles by normalized keyword; unpaired or duplicated keywords are
// excluded with an audit entry. Discipline comes from the grounded article's
// home course, then the baseline's, then "unattributed".
ComparisonReport compare(const std::vector<plato::Article>& plato_articles,
                         const std::vector<plato::Article>& baseline_articles, const gateway::Gateway& gw,
                         const std::string& judge_backend, AuditLog* log = nullptr, std::size_t workers = 4);

// Reads every *.json article in a directory, in file name order.
std::vector<plato::Article> load_articles(const std::filesystem::path& dir);

std::string build_knowledge_prompt(const plato::Article& article);
std::string build_fact_prompt(const plato::Article& article);

} // namespace lcot::eval
