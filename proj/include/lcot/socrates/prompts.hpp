#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/common/domain.hpp"
#include "lcot/gateway/gateway.hpp"
#include "lcot/socrates/curriculum.hpp"

namespace lcot::socrates {

struct PromptThumbnail {
    std::string thumbnail_id;
    std::string topic_id;
    Category category = Category::reductionist;
    std::string sketch;
    TargetLevel target_level = TargetLevel::undergraduate;
};

struct PromptSpec {
    std::string prompt_id;
    std::string thumbnail_id;
    std::string topic_id;
    std::string text;
    Category category = Category::reductionist;
    AnswerKind answer_type = AnswerKind::numeric;
    TargetLevel target_level = TargetLevel::undergraduate;
    // The generator's own worked solution, when it offered one.
    std::string reference_solution;
    std::string reference_answer;
};

enum class SanitationVerdict { keep, reject };

struct SanitationReport {
    std::string prompt_id;
    SanitationVerdict verdict = SanitationVerdict::keep;
    std::string reason;  // non-empty when rejected
};

struct SkipRecord {
    std::string thumbnail_id;
    std::size_t item_index = 0;
    std::string reason;
    std::string raw;
};

struct GenerationResult {
    std::vector<PromptSpec> prompts;
    std::vector<SkipRecord> skipped;
};

struct SanitizeResult {
    std::vector<PromptSpec> kept;            // input order preserved
    std::vector<SanitationReport> rejected;  // includes recheck items
    std::vector<std::string> recheck;        // prompt ids whose check failed to run
};

struct PlannerOptions {
    double reductionist_fraction = 0.5;
};

void to_json(nlohmann::json& j, const PromptThumbnail& t);
void from_json(const nlohmann::json& j, PromptThumbnail& t);
void to_json(nlohmann::json& j, const PromptSpec& p);
void from_json(const nlohmann::json& j, PromptSpec& p);
void to_json(nlohmann::json& j, const SanitationReport& r);
void from_json(const nlohmann::json& j, SanitationReport& r);
void to_json(nlohmann::json& j, const SkipRecord& s);

std::string build_planner_prompt(const Course& course, const Topic& topic, int n, const PlannerOptions& options);
std::string build_generator_prompt(const Topic& topic, const PromptThumbnail& thumbnail);
std::string build_checker_prompt(const PromptSpec& prompt);

// At most n thumbnails. If the backend proposes both categories and n >= 2,
// both survive truncation. Malformed output fails the whole call.
std::vector<PromptThumbnail> plan_thumbnails(const Curriculum& curriculum, const Topic& topic, int n,
                                             const gateway::Gateway& gw, const std::string& backend_id,
                                             const PlannerOptions& options = {});

// Items without a verifiable answer_type are skipped and reported.
GenerationResult generate_prompts(const Curriculum& curriculum, const PromptThumbnail& thumbnail,
                                  const gateway::Gateway& gw, const std::string& backend_id);

// The checker must be a different backend from the generator. A prompt whose
// check cannot complete is rejected with a "recheck" reason and listed in
// `recheck`, so kept + rejected always partitions the input.
SanitizeResult sanitize_prompts(const std::vector<PromptSpec>& prompts, const gateway::Gateway& gw,
                                const std::string& checker_backend_id, const std::string& generator_backend_id,
                                std::size_t workers = 4);

// Walks prompt -> thumbnail -> topic -> course; throws on the first broken link.
void verify_provenance(const std::vector<PromptSpec>& prompts, const std::vector<PromptThumbnail>& thumbnails,
                       const Curriculum& curriculum);

} // namespace lcot::socrates
