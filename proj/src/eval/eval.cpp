#include "lcot/eval/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <regex>
#include <set>

#include "lcot/common/error.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/parallel.hpp"
#include "lcot/common/text.hpp"

namespace lcot::eval {
namespace {

// Case-folded, whitespace-collapsed, without surrounding quotes or a final period.
std::string claim_key(std::string_view s) {
    std::string t = trim(s);
    while (!t.empty() && (t.front() == '"' || t.front() == '\'')) t.erase(t.begin());
    while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '.')) t.pop_back();
    return case_fold(collapse_whitespace(t));
}

bool has_body(const plato::Article& a) { return !trim(a.body_text()).empty(); }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

double mean(const std::vector<double>& xs) {
    double s = 0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / double(xs.size());
}

DisciplineRow aggregate(const std::string& name, const std::vector<const EvalReport*>& plato,
                        const std::vector<const EvalReport*>& baseline) {
    DisciplineRow row;
    row.discipline = name;
    row.pairs = plato.size();
    auto col = [](const std::vector<const EvalReport*>& rs, auto f) {
        std::vector<double> xs;
        for (auto* r : rs) xs.push_back(f(*r));
        return mean(xs);
    };
    auto kp = [](const EvalReport& r) { return double(r.knowledge_points); };
    auto rate = [](const EvalReport& r) { return r.error_rate(); };
    auto density = [](const EvalReport& r) { return r.kp_per_1000_words(); };
    row.plato_knowledge_points = col(plato, kp);
    row.baseline_knowledge_points = col(baseline, kp);
    row.plato_error_rate = col(plato, rate);
    row.baseline_error_rate = col(baseline, rate);
    row.plato_kp_per_1000_words = col(plato, density);
    row.baseline_kp_per_1000_words = col(baseline, density);
    return row;
}

} // namespace

std::string_view to_string(Variant v) { return v == Variant::plato ? "plato" : "baseline"; }

void to_json(nlohmann::json& j, Variant v) { j = std::string(to_string(v)); }

void from_json(const nlohmann::json& j, Variant& v) {
    auto s = j.get<std::string>();
    if (s == "plato") v = Variant::plato;
    else if (s == "baseline") v = Variant::baseline;
    else throw parse_error("unknown article variant: " + s);
}

void to_json(nlohmann::json& j, const EvalReport& r) {
    j = {{"keyword", r.keyword},
         {"variant", r.variant},
         {"discipline", r.discipline},
         {"knowledge_points", r.knowledge_points},
         {"claims", r.claims},
         {"errors", r.errors},
         {"error_rate", r.error_rate()},
         {"words", r.words},
         {"kp_per_1000_words", r.kp_per_1000_words()},
         {"judge_model", r.judge_model}};
}

void from_json(const nlohmann::json& j, EvalReport& r) {
    r.keyword = j.at("keyword").get<std::string>();
    r.variant = j.at("variant").get<Variant>();
    r.discipline = j.value("discipline", "");
    r.knowledge_points = j.at("knowledge_points").get<std::size_t>();
    r.claims = j.at("claims").get<std::size_t>();
    r.errors = j.at("errors").get<std::size_t>();
    r.words = j.value("words", std::size_t{0});
    r.judge_model = j.value("judge_model", "");
    if (r.errors > r.claims) throw validation_error("eval report for " + r.keyword + " has more errors than claims");
}

std::optional<double> DisciplineRow::reduction_ratio() const {
    if (baseline_error_rate <= 0) return std::nullopt;
    return (baseline_error_rate - plato_error_rate) / baseline_error_rate;
}

void to_json(nlohmann::json& j, const DisciplineRow& r) {
    auto ratio = r.reduction_ratio();
    j = {{"discipline", r.discipline},
         {"pairs", r.pairs},
         {"plato_knowledge_points", r.plato_knowledge_points},
         {"baseline_knowledge_points", r.baseline_knowledge_points},
         {"plato_error_rate", r.plato_error_rate},
         {"baseline_error_rate", r.baseline_error_rate},
         {"reduction_ratio", ratio ? nlohmann::json(*ratio) : nlohmann::json(nullptr)},
         {"plato_kp_per_1000_words", r.plato_kp_per_1000_words},
         {"baseline_kp_per_1000_words", r.baseline_kp_per_1000_words}};
}

void to_json(nlohmann::json& j, const ComparisonReport& r) {
    j = {{"judge_model", r.judge_model}, {"rows", r.rows}, {"overall", r.overall}, {"reports", r.reports}};
}

std::string ComparisonReport::to_csv() const {
    std::string out = "discipline,pairs,plato_knowledge_points,baseline_knowledge_points,plato_error_rate,"
                      "baseline_error_rate,reduction_ratio,plato_kp_per_1000_words,baseline_kp_per_1000_words\n";
    auto line = [&](const DisciplineRow& r) {
        auto ratio = r.reduction_ratio();
        out += r.discipline + "," + std::to_string(r.pairs) + "," + fmt(r.plato_knowledge_points) + "," +
               fmt(r.baseline_knowledge_points) + "," + fmt(r.plato_error_rate) + "," + fmt(r.baseline_error_rate) +
               "," + (ratio ? fmt(*ratio) : "") + "," + fmt(r.plato_kp_per_1000_words) + "," +
               fmt(r.baseline_kp_per_1000_words) + "\n";
    };
    for (const auto& r : rows) line(r);
    line(overall);
    return out;
}

std::string build_knowledge_prompt(const plato::Article& article) {
    return "Role: knowledge-point-judge\nKeyword: " + article.keyword +
           "\n\nList every distinct concept, law, method or result a reader could learn from the article below. "
           "Write one per line as a numbered list (\"1. ...\"). Reply NONE if there are none.\n\n<article>\n" +
           article.render() + "</article>\n";
}

std::string build_fact_prompt(const plato::Article& article) {
    return "Role: fact-judge\nKeyword: " + article.keyword +
           "\n\nSplit the article below into atomic claims, one declarative sentence-level assertion each, quoting "
           "the article's wording. Judge each claim and write one line per claim in the form "
           "\"CLAIM: <claim> VERDICT: correct\" or \"CLAIM: <claim> VERDICT: incorrect\". Reply NONE if the article "
           "makes no claims.\n\n<article>\n" +
           article.render() + "</article>\n";
}

std::size_t count_knowledge_points(const plato::Article& article, const gateway::Gateway& gw,
                                   const std::string& judge_backend) {
    if (!has_body(article)) return 0;
    auto reply = gw.complete(judge_backend, gateway::make_request(kJudgeSystem, build_knowledge_prompt(article), 0.0))
                     .text;
    static const std::regex item(R"(^\s*\d+\s*[.)]\s*(.+?)\s*$)");
    std::set<std::string> unique;
    bool none = false;
    for (const auto& line : split_lines(reply)) {
        std::smatch m;
        if (std::regex_match(line, m, item)) {
            auto key = claim_key(m[1].str());
            if (!key.empty()) unique.insert(key);
        } else if (case_fold(trim(line)) == "none") {
            none = true;
        }
    }
    if (unique.empty() && !none) throw parse_error("knowledge-point judge gave no numbered list", reply);
    return unique.size();
}

FactCheck count_factual_errors(const plato::Article& article, const gateway::Gateway& gw,
                               const std::string& judge_backend, AuditLog* log) {
    if (!has_body(article)) return {};
    auto reply =
        gw.complete(judge_backend, gateway::make_request(kJudgeSystem, build_fact_prompt(article), 0.0)).text;
    static const std::regex claim(R"(^\s*CLAIM:\s*(.*?)\s*VERDICT:\s*(\w+)\s*\.?\s*$)", std::regex::icase);
    const std::string haystack = case_fold(collapse_whitespace(article.body_text()));
    FactCheck out;
    bool none = false;
    for (const auto& line : split_lines(reply)) {
        auto t = trim(line);
        if (t.empty()) continue;
        if (case_fold(t) == "none") {
            none = true;
            continue;
        }
        if (!starts_with_ci(t, "CLAIM:")) continue;
        std::smatch m;
        if (!std::regex_match(t, m, claim)) throw parse_error("fact judge claim without a verdict: " + t, reply);
        auto verdict = case_fold(m[2].str());
        if (verdict != "correct" && verdict != "incorrect")
            throw parse_error("fact judge verdict must be correct or incorrect: " + t, reply);
        if (verdict == "incorrect") {
            auto key = claim_key(m[1].str());
            if (key.empty() || haystack.find(key) == std::string::npos) {
                audit(log, "count_factual_errors", article.keyword, "flagged claim not in article: " + m[1].str());
                continue;
            }
            ++out.errors;
        }
        ++out.claims;
    }
    if (out.claims == 0 && !none) throw parse_error("fact judge gave no per-claim verdicts", reply);
    return out;
}

std::size_t word_count(const plato::Article& article) { return tokenize_terms(article.body_text()).size(); }

EvalReport evaluate_article(const plato::Article& article, Variant variant, const gateway::Gateway& gw,
                            const std::string& judge_backend, AuditLog* log) {
    EvalReport r;
    r.keyword = article.keyword;
    r.variant = variant;
    r.discipline = article.discipline;
    r.knowledge_points = count_knowledge_points(article, gw, judge_backend);
    auto fc = count_factual_errors(article, gw, judge_backend, log);
    r.claims = fc.claims;
    r.errors = fc.errors;
    r.words = word_count(article);
    r.judge_model = gw.spec(judge_backend).model_name;
    return r;
}

ComparisonReport compare(const std::vector<plato::Article>& plato_articles,
                         const std::vector<plato::Article>& baseline_articles, const gateway::Gateway& gw,
                         const std::string& judge_backend, AuditLog* log, std::size_t workers) {
    if (plato_articles.empty() || baseline_articles.empty())
        throw validation_error("comparison needs grounded and baseline articles");
    auto by_keyword = [&](const std::vector<plato::Article>& articles, const char* side) {
        std::map<std::string, const plato::Article*> out;
        std::set<std::string> dup;
        for (const auto& a : articles) {
            auto k = normalize_keyword(a.keyword);
            if (!out.emplace(k, &a).second) dup.insert(k);
        }
        for (const auto& k : dup) {
            audit(log, "compare", k, std::string("duplicate ") + side + " article, keyword excluded");
            out.erase(k);
        }
        return std::make_pair(out, dup);
    };
    auto [plato, plato_dup] = by_keyword(plato_articles, "plato");
    auto [baseline, baseline_dup] = by_keyword(baseline_articles, "baseline");

    std::vector<std::pair<const plato::Article*, const plato::Article*>> pairs;
    for (const auto& [k, a] : plato) {
        auto it = baseline.find(k);
        if (it == baseline.end()) {
            if (!baseline_dup.contains(k)) audit(log, "compare", k, "no baseline article, keyword excluded");
            continue;
        }
        pairs.emplace_back(a, it->second);
    }
    for (const auto& [k, a] : baseline)
        if (!plato.contains(k) && !plato_dup.contains(k))
            audit(log, "compare", k, "no grounded article, keyword excluded");
    if (pairs.empty()) throw validation_error("no keyword has both a grounded and a baseline article");

    std::vector<EvalReport> reports(2 * pairs.size());
    std::vector<AuditLog> logs(reports.size());
    parallel_for(reports.size(), workers, [&](std::size_t i) {
        const auto& [p, b] = pairs[i / 2];
        reports[i] = i % 2 == 0 ? evaluate_article(*p, Variant::plato, gw, judge_backend, &logs[i])
                                : evaluate_article(*b, Variant::baseline, gw, judge_backend, &logs[i]);
    });
    for (const auto& l : logs)
        if (log) log->insert(log->end(), l.begin(), l.end());

    ComparisonReport out;
    out.judge_model = gw.spec(judge_backend).model_name;
    std::map<std::string, std::pair<std::vector<const EvalReport*>, std::vector<const EvalReport*>>> groups;
    std::vector<const EvalReport*> all_p, all_b;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        std::string d = pairs[i].first->discipline;
        if (d.empty()) d = pairs[i].second->discipline;
        if (d.empty()) d = kUnattributed;
        reports[2 * i].discipline = reports[2 * i + 1].discipline = d;
        groups[d].first.push_back(&reports[2 * i]);
        groups[d].second.push_back(&reports[2 * i + 1]);
        all_p.push_back(&reports[2 * i]);
        all_b.push_back(&reports[2 * i + 1]);
    }
    for (const auto& [d, g] : groups) out.rows.push_back(aggregate(d, g.first, g.second));
    out.overall = aggregate("all", all_p, all_b);
    out.reports = std::move(reports);
    return out;
}

std::vector<plato::Article> load_articles(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw validation_error("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<plato::Article> out;
    for (const auto& f : files) {
        try {
            out.push_back(read_json_file(f).get<plato::Article>());
        } catch (const nlohmann::json::exception& e) {
            throw parse_error(f.string() + ": " + e.what());
        }
    }
    if (out.empty()) throw validation_error("no article files in " + dir.string());
    return out;
}

} // namespace lcot::eval
