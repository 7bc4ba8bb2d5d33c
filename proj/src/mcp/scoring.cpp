#include "lcot/mcp/scoring.hpp"

#include <cctype>
#include <chrono>

#include "lcot/common/error.hpp"
#include "lcot/common/parallel.hpp"
#include "lcot/common/text.hpp"
#include "lcot/consensus/answer.hpp"

namespace lcot::mcp {
namespace {

using Clock = std::chrono::steady_clock;

AnswerKind infer_kind(const std::string& truth) {
    auto t = trim(truth);
    if (t.size() == 1 && std::isalpha(static_cast<unsigned char>(t[0]))) return AnswerKind::multiple_choice;
    try {
        consensus::parse_answer_text(t, AnswerKind::numeric);
        return AnswerKind::numeric;
    } catch (const Error&) {
        return AnswerKind::symbolic;
    }
}

consensus::FinalAnswer read_solution(const std::string& solution, AnswerKind kind) {
    if (solution.find(consensus::kAnswerMarker) != std::string::npos)
        return consensus::extract_answer(solution, kind).answer;
    return consensus::parse_answer_text(trim(solution), kind);
}

std::string extra_string(const nlohmann::json& extra, const char* key) {
    if (!extra.is_object() || !extra.contains(key)) return {};
    const auto& v = extra.at(key);
    return v.is_string() ? v.get<std::string>() : std::string{};
}

} // namespace

void to_json(nlohmann::json& j, const ScoreResult& r) {
    j = {{"score", r.score}, {"passed", r.passed}, {"execution_time_s", r.execution_time_s}, {"detail", r.detail}};
}

void from_json(const nlohmann::json& j, ScoreResult& r) {
    r.score = j.at("score").get<double>();
    r.passed = j.at("passed").get<bool>();
    r.execution_time_s = j.at("execution_time_s").get<double>();
    r.detail = j.value("detail", "");
}

ScoreResult score_answer(const std::string& solution, const std::string& ground_truth,
                         const nlohmann::json& extra_info) {
    AnswerKind kind;
    if (auto declared = extra_string(extra_info, "answer_type"); !declared.empty()) {
        auto k = parse_answer_kind(declared);
        if (!k) throw validation_error("unknown answer_type " + declared);
        kind = *k;
    } else {
        kind = infer_kind(ground_truth);
    }
    if (kind == AnswerKind::code) throw validation_error("code answers need the code scorer");
    ScoreResult r;
    consensus::FinalAnswer truth = consensus::parse_answer_text(trim(ground_truth), kind);
    consensus::FinalAnswer got;
    try {
        got = read_solution(solution, kind);
    } catch (const Error& e) {
        r.detail = std::string("unreadable solution: ") + e.what();
        return r;
    }
    r.passed = consensus::answers_equivalent(got, truth, kind);
    r.score = r.passed ? 1.0 : 0.0;
    r.detail = std::string(to_string(kind)) + ": " + got.text() + (r.passed ? " == " : " != ") + truth.text();
    return r;
}

ScoreResult score_code(const sandbox::Sandbox& sandbox, const std::string& solution, const std::string& ground_truth,
                       const nlohmann::json& extra_info, double timeout_s) {
    auto language = extra_string(extra_info, "language");
    if (language.empty()) language = "python";
    auto program = solution;
    if (!program.empty() && program.back() != '\n') program += '\n';
    program += ground_truth;
    auto run = sandbox.execute(language, program, timeout_s);
    ScoreResult r;
    r.passed = !run.timed_out && run.exit_status == 0;
    r.score = r.passed ? 1.0 : 0.0;
    if (run.timed_out) r.detail = "timed out";
    else if (!r.passed) r.detail = "exit " + std::to_string(run.exit_status) + ": " + run.stderr_text.substr(0, utf8_floor(run.stderr_text, 500));
    else r.detail = "tests passed";
    return r;
}

void ScorerRegistry::add(const std::string& data_source, Scorer scorer) {
    if (data_source.empty() || !scorer) throw validation_error("scorer needs a name and a function");
    scorers_[data_source] = std::move(scorer);
}

std::vector<std::string> ScorerRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : scorers_) out.push_back(name);
    return out;
}

std::vector<ScoreResult> ScorerRegistry::score_parallel(const std::string& data_source,
                                                        const std::vector<std::string>& solutions,
                                                        const std::vector<std::string>& ground_truths,
                                                        const nlohmann::json& extra_info, double timeout_s,
                                                        std::size_t workers) const {
    auto it = scorers_.find(data_source);
    if (it == scorers_.end()) throw Error(ErrorCode::not_found, "no scorer registered for data_source " + data_source);
    if (solutions.size() != ground_truths.size())
        throw validation_error("solution_list and ground_truth_list differ in length",
                               std::to_string(solutions.size()) + " vs " + std::to_string(ground_truths.size()));
    if (!extra_info.is_null() && (!extra_info.is_array() || extra_info.size() != solutions.size()))
        throw validation_error("extra_info_list must be null or match solution_list in length");
    if (!(timeout_s >= 0)) throw validation_error("timeout must be a nonnegative number");
    const auto& scorer = it->second;
    std::vector<ScoreResult> out(solutions.size());
    parallel_for(solutions.size(), workers, [&](std::size_t i) {
        static const nlohmann::json null_extra;
        const auto& extra = extra_info.is_null() ? null_extra : extra_info[i];
        auto t0 = Clock::now();
        ScoreResult r;
        try {
            r = scorer(solutions[i], ground_truths[i], extra, timeout_s);
        } catch (const std::exception& e) {
            r = {};
            r.detail = std::string("error: ") + e.what();
        }
        r.execution_time_s = std::chrono::duration<double>(Clock::now() - t0).count();
        // In-process scorers cannot be interrupted; an overrun still fails the item.
        if (r.execution_time_s > timeout_s && r.passed) {
            r.passed = false;
            r.score = 0.0;
            r.detail = "timed out";
        }
        out[i] = std::move(r);
    });
    return out;
}

ScorerRegistry ScorerRegistry::defaults(const sandbox::Sandbox* sandbox) {
    ScorerRegistry reg;
    Scorer answer = [](const std::string& s, const std::string& t, const nlohmann::json& e, double) {
        return score_answer(s, t, e);
    };
    reg.add("default", answer);
    reg.add("theoretical_physics", answer);
    for (auto d : {Discipline::mathematics, Discipline::physics, Discipline::chemistry, Discipline::biology,
                   Discipline::engineering, Discipline::computation})
        reg.add(std::string(to_string(d)), answer);
    if (sandbox)
        reg.add("code", [sandbox](const std::string& s, const std::string& t, const nlohmann::json& e, double timeout) {
            return score_code(*sandbox, s, t, e, timeout);
        });
    return reg;
}

} // namespace lcot::mcp
