#include "lcot/socrates/prompts.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "lcot/common/error.hpp"
#include "lcot/common/parallel.hpp"
#include "lcot/common/text.hpp"

namespace lcot::socrates {
namespace {

constexpr const char* kPlannerSystem =
    "You design first-principles science problems for a verified knowledge base.";
constexpr const char* kGeneratorSystem =
    "You write precise science questions whose final answers can be checked mechanically.";
constexpr const char* kCheckerSystem =
    "You are a strict referee who screens science questions before anyone attempts them.";

std::string padded(std::size_t i, int width) {
    std::ostringstream ss;
    ss << std::setw(width) << std::setfill('0') << i;
    return ss.str();
}

nlohmann::json fenced_json(const std::string& text, const char* what) {
    auto block = first_fenced_block(text);
    if (!block.found) throw parse_error(std::string(what) + " output has no fenced JSON block", text);
    try {
        return nlohmann::json::parse(block.body);
    } catch (const nlohmann::json::parse_error& e) {
        throw parse_error(std::string(what) + " output is not valid JSON: " + e.what(), text);
    }
}

std::string string_field(const nlohmann::json& item, const char* key) {
    if (!item.contains(key) || !item.at(key).is_string()) return {};
    return trim(item.at(key).get<std::string>());
}

} // namespace

void to_json(nlohmann::json& j, const PromptThumbnail& t) {
    j = {{"thumbnail_id", t.thumbnail_id},
         {"topic_id", t.topic_id},
         {"category", t.category},
         {"sketch", t.sketch},
         {"target_level", t.target_level}};
}

void from_json(const nlohmann::json& j, PromptThumbnail& t) {
    t.thumbnail_id = j.at("thumbnail_id").get<std::string>();
    t.topic_id = j.at("topic_id").get<std::string>();
    t.category = j.at("category").get<Category>();
    t.sketch = j.at("sketch").get<std::string>();
    t.target_level = j.at("target_level").get<TargetLevel>();
}

void to_json(nlohmann::json& j, const PromptSpec& p) {
    j = {{"prompt_id", p.prompt_id},
         {"thumbnail_id", p.thumbnail_id},
         {"topic_id", p.topic_id},
         {"text", p.text},
         {"category", p.category},
         {"answer_type", p.answer_type},
         {"target_level", p.target_level}};
    if (!p.reference_solution.empty()) j["reference_solution"] = p.reference_solution;
    if (!p.reference_answer.empty()) j["reference_answer"] = p.reference_answer;
}

void from_json(const nlohmann::json& j, PromptSpec& p) {
    p.prompt_id = j.at("prompt_id").get<std::string>();
    p.thumbnail_id = j.at("thumbnail_id").get<std::string>();
    p.topic_id = j.at("topic_id").get<std::string>();
    p.text = j.at("text").get<std::string>();
    p.category = j.at("category").get<Category>();
    p.answer_type = j.at("answer_type").get<AnswerKind>();
    p.target_level = j.at("target_level").get<TargetLevel>();
    p.reference_solution = j.value("reference_solution", std::string{});
    p.reference_answer = j.value("reference_answer", std::string{});
}

void to_json(nlohmann::json& j, const SanitationReport& r) {
    j = {{"prompt_id", r.prompt_id}, {"verdict", r.verdict == SanitationVerdict::keep ? "keep" : "reject"}};
    if (!r.reason.empty()) j["reason"] = r.reason;
}

void from_json(const nlohmann::json& j, SanitationReport& r) {
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.verdict = j.at("verdict").get<std::string>() == "reject" ? SanitationVerdict::reject : SanitationVerdict::keep;
    r.reason = j.value("reason", std::string{});
}

void to_json(nlohmann::json& j, const SkipRecord& s) {
    j = {{"thumbnail_id", s.thumbnail_id}, {"item_index", s.item_index}, {"reason", s.reason}, {"raw", s.raw}};
}

std::string build_planner_prompt(const Course& course, const Topic& topic, int n, const PlannerOptions& options) {
    const int reductionist = static_cast<int>(std::lround(n * std::clamp(options.reductionist_fraction, 0.0, 1.0)));
    std::ostringstream p;
    p << "Role: planner\n"
      << "Course: " << course.title << "\n"
      << "Discipline: " << to_string(course.discipline) << "\n"
      << "Topic: " << topic.title << "\n"
      << "Count: " << n << "\n"
      << "Reductionist count: " << reductionist << "\n"
      << "Application count: " << (n - reductionist) << "\n"
      << "Target levels: high_school, undergraduate, graduate\n\n"
      << "Propose problem thumbnails for this topic. A reductionist thumbnail asks to explain a concept or derive "
         "a result starting from stated first principles. An application thumbnail asks how a principle is used "
         "in a concrete experimental or technological setting. Spread the thumbnails over the target levels so "
         "the same result is reached from different depths.\n"
      << "Reply with one ```json fenced block holding a list of objects with keys \"category\" "
         "(\"reductionist\" or \"application\"), \"sketch\" (one sentence) and \"target_level\".\n";
    return p.str();
}

std::string build_generator_prompt(const Topic& topic, const PromptThumbnail& thumbnail) {
    std::ostringstream p;
    p << "Role: generator\n"
      << "Topic: " << topic.title << "\n"
      << "Category: " << to_string(thumbnail.category) << "\n"
      << "Target level: " << to_string(thumbnail.target_level) << "\n"
      << "Sketch: " << thumbnail.sketch << "\n\n"
      << "Expand the sketch into concrete, self-contained questions. Every question must end in an answer that "
         "can be checked mechanically: a number (numeric), a closed-form expression (symbolic), one option letter "
         "(multiple_choice) or a program (code).\n"
      << "Reply with one ```json fenced block holding a list of objects with keys \"question\", \"answer_type\" "
         "and optionally \"solution\" and \"answer\".\n";
    return p.str();
}

std::string build_checker_prompt(const PromptSpec& prompt) {
    std::ostringstream p;
    p << "Role: checker\n"
      << "Question: " << prompt.text << "\n\n"
      << "Screen the question for scientific inaccuracies, flawed assumptions or unreasonable values before "
         "anyone tries to solve it.\n"
      << "Reply with a line \"VERDICT: keep\" or \"VERDICT: reject\", followed by a line \"REASON: ...\".\n";
    return p.str();
}

std::vector<PromptThumbnail> plan_thumbnails(const Curriculum& curriculum, const Topic& topic, int n,
                                             const gateway::Gateway& gw, const std::string& backend_id,
                                             const PlannerOptions& options) {
    if (n < 1) throw validation_error("plan_thumbnails: n must be >= 1");
    const Course& course = curriculum.course(topic.course_id);
    auto req = gateway::make_request(kPlannerSystem, build_planner_prompt(course, topic, n, options), gateway::kAuthorTemperature);
    auto resp = gw.complete(backend_id, req);

    auto list = fenced_json(resp.text, "planner");
    if (!list.is_array()) throw parse_error("planner output must be a JSON list", resp.text);
    std::vector<PromptThumbnail> proposed;
    for (const auto& item : list) {
        if (!item.is_object()) throw parse_error("planner list item is not an object", resp.text);
        auto category = parse_category(string_field(item, "category"));
        auto level = parse_target_level(string_field(item, "target_level"));
        auto sketch = string_field(item, "sketch");
        if (!category || !level || sketch.empty())
            throw parse_error("planner item malformed: " + item.dump(), resp.text);
        PromptThumbnail t;
        t.topic_id = topic.topic_id;
        t.category = *category;
        t.sketch = std::move(sketch);
        t.target_level = *level;
        proposed.push_back(std::move(t));
    }

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < proposed.size() && keep.size() < static_cast<std::size_t>(n); ++i) keep.push_back(i);
    if (n >= 2 && proposed.size() > keep.size()) {
        auto has = [&](Category c) {
            return std::any_of(keep.begin(), keep.end(), [&](std::size_t i) { return proposed[i].category == c; });
        };
        for (Category c : {Category::reductionist, Category::application}) {
            if (has(c)) continue;
            auto it = std::find_if(proposed.begin() + static_cast<std::ptrdiff_t>(keep.size()), proposed.end(),
                                   [&](const PromptThumbnail& t) { return t.category == c; });
            if (it != proposed.end()) keep.back() = static_cast<std::size_t>(it - proposed.begin());
        }
    }
    std::vector<PromptThumbnail> out;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        auto t = proposed[keep[k]];
        t.thumbnail_id = topic.topic_id + "/t" + padded(k, 3);
        out.push_back(std::move(t));
    }
    return out;
}

GenerationResult generate_prompts(const Curriculum& curriculum, const PromptThumbnail& thumbnail,
                                  const gateway::Gateway& gw, const std::string& backend_id) {
    if (thumbnail.sketch.empty() || thumbnail.thumbnail_id.empty())
        throw validation_error("generate_prompts: invalid thumbnail");
    const Topic& topic = curriculum.topic(thumbnail.topic_id);
    auto req = gateway::make_request(kGeneratorSystem, build_generator_prompt(topic, thumbnail), gateway::kAuthorTemperature);
    auto resp = gw.complete(backend_id, req);

    auto list = fenced_json(resp.text, "generator");
    if (!list.is_array()) throw parse_error("generator output must be a JSON list", resp.text);
    GenerationResult result;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& item = list[i];
        auto skip = [&](std::string reason) {
            result.skipped.push_back({thumbnail.thumbnail_id, i, std::move(reason), item.dump()});
        };
        if (!item.is_object()) { skip("item is not an object"); continue; }
        auto question = string_field(item, "question");
        if (question.empty()) { skip("missing question"); continue; }
        auto type_text = string_field(item, "answer_type");
        if (type_text.empty()) { skip("missing answer_type"); continue; }
        auto kind = parse_answer_kind(type_text);
        if (!kind) { skip("unverifiable answer_type " + type_text); continue; }
        PromptSpec p;
        p.prompt_id = thumbnail.thumbnail_id + "/p" + padded(i, 2);
        p.thumbnail_id = thumbnail.thumbnail_id;
        p.topic_id = thumbnail.topic_id;
        p.text = std::move(question);
        p.category = thumbnail.category;
        p.answer_type = *kind;
        p.target_level = thumbnail.target_level;
        p.reference_solution = string_field(item, "solution");
        p.reference_answer = string_field(item, "answer");
        result.prompts.push_back(std::move(p));
    }
    return result;
}

SanitizeResult sanitize_prompts(const std::vector<PromptSpec>& prompts, const gateway::Gateway& gw,
                                const std::string& checker_backend_id, const std::string& generator_backend_id,
                                std::size_t workers) {
    if (checker_backend_id == generator_backend_id)
        throw validation_error("sanitize_prompts: checker backend must differ from generator backend " +
                               generator_backend_id);
    if (!gw.contains(checker_backend_id)) throw validation_error("unknown checker backend " + checker_backend_id);

    enum class Outcome { keep, reject, recheck };
    std::vector<std::pair<Outcome, std::string>> outcomes(prompts.size());
    parallel_for(prompts.size(), workers, [&](std::size_t i) {
        try {
            auto req = gateway::make_request(kCheckerSystem, build_checker_prompt(prompts[i]), gateway::kSolverTemperature);
            auto text = gw.complete(checker_backend_id, req).text;
            std::string verdict, reason;
            for (const auto& line : split_lines(text)) {
                auto t = trim(line);
                if (verdict.empty() && starts_with_ci(t, "VERDICT:")) verdict = case_fold(trim(t.substr(8)));
                else if (reason.empty() && starts_with_ci(t, "REASON:")) reason = trim(t.substr(7));
            }
            if (verdict.rfind("keep", 0) == 0) outcomes[i] = {Outcome::keep, {}};
            else if (verdict.rfind("reject", 0) == 0)
                outcomes[i] = {Outcome::reject, reason.empty() ? "checker gave no reason" : reason};
            else outcomes[i] = {Outcome::recheck, "recheck: checker verdict unparseable"};
        } catch (const Error& e) {
            outcomes[i] = {Outcome::recheck, std::string("recheck: ") + e.what()};
        }
    });

    SanitizeResult result;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto& [outcome, reason] = outcomes[i];
        if (outcome == Outcome::keep) {
            result.kept.push_back(prompts[i]);
            continue;
        }
        result.rejected.push_back({prompts[i].prompt_id, SanitationVerdict::reject, reason});
        if (outcome == Outcome::recheck) result.recheck.push_back(prompts[i].prompt_id);
    }
    return result;
}

void verify_provenance(const std::vector<PromptSpec>& prompts, const std::vector<PromptThumbnail>& thumbnails,
                       const Curriculum& curriculum) {
    std::map<std::string, const PromptThumbnail*> by_id;
    for (const auto& t : thumbnails) by_id[t.thumbnail_id] = &t;
    for (const auto& p : prompts) {
        auto it = by_id.find(p.thumbnail_id);
        if (it == by_id.end()) throw validation_error("prompt " + p.prompt_id + " has no thumbnail " + p.thumbnail_id);
        if (it->second->topic_id != p.topic_id)
            throw validation_error("prompt " + p.prompt_id + " topic disagrees with its thumbnail");
        if (!curriculum.has_topic(p.topic_id)) throw validation_error("prompt " + p.prompt_id + " has unknown topic");
        if (!curriculum.has_course(curriculum.topic(p.topic_id).course_id))
            throw validation_error("topic " + p.topic_id + " has unknown course");
    }
}

} // namespace lcot::socrates
