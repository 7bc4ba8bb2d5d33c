#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/sandbox/sandbox.hpp"

namespace lcot::mcp {

inline constexpr double kDefaultScoreTimeout = 30.0;

struct ScoreResult {
    double score = 0.0;  // in [0, 1]
    bool passed = false;
    double execution_time_s = 0.0;
    std::string detail;
};

void to_json(nlohmann::json& j, const ScoreResult& r);
void from_json(const nlohmann::json& j, ScoreResult& r);

// extra_info is null or an object; timeout_s bounds one item.
using Scorer = std::function<ScoreResult(const std::string& solution, const std::string& ground_truth,
                                         const nlohmann::json& extra_info, double timeout_s)>;

// Final-answer comparison through consensus::answers_equivalent. The kind comes
// from extra_info.answer_type when present, else it is inferred from the ground
// truth: a lone option letter, then a number, then an expression. A solution
// carrying a "FINAL_ANSWER:" line is reduced to that answer first.
ScoreResult score_answer(const std::string& solution, const std::string& ground_truth,
                         const nlohmann::json& extra_info);

// The solution is a program and the ground truth a test script appended to it;
// the item passes when the combined program exits 0 in the sandbox.
// extra_info.language selects the interpreter (default "python").
ScoreResult score_code(const sandbox::Sandbox& sandbox, const std::string& solution, const std::string& ground_truth,
                       const nlohmann::json& extra_info, double timeout_s);

class ScorerRegistry {
public:
    void add(const std::string& data_source, Scorer scorer);
    bool has(const std::string& data_source) const { return scorers_.contains(data_source); }
    std::vector<std::string> names() const;

    // Positionally aligned with the inputs. extra_info may be null (all items)
    // or a list of the same length whose entries may be null. An item that
    // throws or overruns its timeout scores 0 with the reason in detail.
    std::vector<ScoreResult> score_parallel(const std::string& data_source, const std::vector<std::string>& solutions,
                                            const std::vector<std::string>& ground_truths,
                                            const nlohmann::json& extra_info,
                                            double timeout_s = kDefaultScoreTimeout, std::size_t workers = 8) const;

    // "default" plus one answer scorer per discipline name and
    // "theoretical_physics"; "code" when a sandbox is given. The sandbox must
    // outlive the registry.
    static ScorerRegistry defaults(const sandbox::Sandbox* sandbox);

private:
    std::map<std::string, Scorer> scorers_;
};

} // namespace lcot::mcp
