#include "lcot/consensus/consensus.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <random>
#include <set>

#include "lcot/common/error.hpp"
#include "lcot/common/parallel.hpp"

namespace lcot::consensus {
namespace {

constexpr const char* kSolverSystem =
    "You solve science problems from first principles, reasoning step by step before committing to an answer.";

std::string answer_instruction(AnswerKind kind) {
    switch (kind) {
    case AnswerKind::numeric: return "a single number, optionally followed by its unit";
    case AnswerKind::symbolic: return "a single closed-form expression in plain infix notation";
    case AnswerKind::multiple_choice: return "the letter of the correct option";
    case AnswerKind::code: return "a complete program in a fenced code block on the lines after the marker";
    }
    return {};
}

struct Attempt {
    std::optional<LCoTTrace> trace;
    AuditLog failures;
};

Attempt run_backend(const socrates::PromptSpec& prompt, const std::string& backend_id, const gateway::Gateway& gw,
                    const SolveOptions& options) {
    Attempt out;
    auto request = gateway::make_request(kSolverSystem, build_solver_prompt(prompt), gateway::kSolverTemperature);
    int attempts = std::max(1, options.per_backend_attempts);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        request.seed = attempt;
        gateway::ChatResponse response;
        try {
            response = gw.complete(backend_id, request);
        } catch (const gateway::BackendError& e) {
            audit(&out.failures, "solve", prompt.prompt_id, backend_id + ": " + e.what());
            return out;
        }
        try {
            auto extracted = extract_answer(response.text, prompt.answer_type);
            LCoTTrace t;
            t.trace_id = prompt.prompt_id + "#" + backend_id;
            t.prompt_id = prompt.prompt_id;
            t.backend_id = backend_id;
            t.chain_text = response.text;
            t.raw_answer_span = std::move(extracted.raw_span);
            t.answer = std::move(extracted.answer);
            t.created_at = options.clock ? options.clock() : utc_timestamp();
            out.trace = std::move(t);
            return out;
        } catch (const Error& e) {
            audit(&out.failures, "solve", prompt.prompt_id,
                  backend_id + " attempt " + std::to_string(attempt + 1) + ": " + e.what());
        }
    }
    return out;
}

} // namespace

SolveResult solve_single(const socrates::PromptSpec& prompt, const std::string& backend_id,
                         const gateway::Gateway& gw, const SolveOptions& options) {
    auto attempt = run_backend(prompt, backend_id, gw, options);
    SolveResult out;
    if (attempt.trace) out.traces.push_back(std::move(*attempt.trace));
    out.failures = std::move(attempt.failures);
    return out;
}

std::string_view to_string(VerdictStatus s) {
    switch (s) {
    case VerdictStatus::verified: return "verified";
    case VerdictStatus::divergent: return "divergent";
    case VerdictStatus::unverifiable: return "unverifiable";
    }
    return "unverifiable";
}

void to_json(nlohmann::json& j, const LCoTTrace& t) {
    j = {{"trace_id", t.trace_id},   {"prompt_id", t.prompt_id},
         {"backend_id", t.backend_id}, {"chain_text", t.chain_text},
         {"raw_answer_span", t.raw_answer_span}, {"answer", t.answer},
         {"created_at", t.created_at}};
}

void from_json(const nlohmann::json& j, LCoTTrace& t) {
    t.trace_id = j.at("trace_id").get<std::string>();
    t.prompt_id = j.at("prompt_id").get<std::string>();
    t.backend_id = j.at("backend_id").get<std::string>();
    t.chain_text = j.at("chain_text").get<std::string>();
    t.raw_answer_span = j.value("raw_answer_span", "");
    t.answer = j.at("answer").get<FinalAnswer>();
    t.created_at = j.value("created_at", "");
}

void to_json(nlohmann::json& j, const ConsensusVerdict& v) {
    j = {{"prompt_id", v.prompt_id}, {"status", to_string(v.status)}, {"traces", v.traces}};
    j["agreed_answer"] = v.agreed_answer ? nlohmann::json(*v.agreed_answer) : nlohmann::json();
}

void from_json(const nlohmann::json& j, ConsensusVerdict& v) {
    v.prompt_id = j.at("prompt_id").get<std::string>();
    auto status = j.at("status").get<std::string>();
    if (status == "verified") v.status = VerdictStatus::verified;
    else if (status == "divergent") v.status = VerdictStatus::divergent;
    else if (status == "unverifiable") v.status = VerdictStatus::unverifiable;
    else throw validation_error("unknown verdict status", status);
    v.traces = j.at("traces").get<std::vector<std::string>>();
    v.agreed_answer.reset();
    if (j.contains("agreed_answer") && !j.at("agreed_answer").is_null())
        v.agreed_answer = j.at("agreed_answer").get<FinalAnswer>();
    if ((v.status == VerdictStatus::verified) != v.agreed_answer.has_value())
        throw validation_error("agreed_answer must be present exactly when verified", v.prompt_id);
}

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string build_solver_prompt(const socrates::PromptSpec& prompt) {
    std::string out = "Role: solver\n";
    out += "Answer type: " + std::string(to_string(prompt.answer_type)) + "\n";
    out += "Question: " + prompt.text + "\n\n";
    out += "Work through the problem step by step from first principles. ";
    out += "End with a line of the form \"" + std::string(kAnswerMarker) + " <answer>\", where <answer> is " +
           answer_instruction(prompt.answer_type) + ".\n";
    return out;
}

SolveResult solve(const socrates::PromptSpec& prompt, const std::vector<std::string>& backend_ids,
                  const gateway::Gateway& gw, const SolveOptions& options) {
    if (backend_ids.size() < 2)
        throw validation_error("consensus needs at least two solver backends", std::to_string(backend_ids.size()));
    std::set<std::string> providers;
    for (const auto& id : backend_ids) {
        if (!providers.insert(gw.spec(id).provider_name).second)
            throw validation_error("solver backends must come from distinct providers", gw.spec(id).provider_name);
    }

    std::vector<Attempt> attempts(backend_ids.size());
    parallel_for(backend_ids.size(), std::max<std::size_t>(1, options.workers),
                 [&](std::size_t i) { attempts[i] = run_backend(prompt, backend_ids[i], gw, options); });

    SolveResult result;
    std::set<std::string> used_providers;
    for (auto& a : attempts) {
        result.failures.insert(result.failures.end(), a.failures.begin(), a.failures.end());
        if (a.trace) {
            used_providers.insert(gw.spec(a.trace->backend_id).provider_name);
            result.traces.push_back(std::move(*a.trace));
        }
    }

    if (options.retry_with_alternate) {
        for (const auto& alt : options.alternates) {
            if (result.traces.size() >= 2) break;
            if (std::find(backend_ids.begin(), backend_ids.end(), alt) != backend_ids.end()) continue;
            const auto& provider = gw.spec(alt).provider_name;
            if (used_providers.contains(provider)) continue;
            auto a = run_backend(prompt, alt, gw, options);
            result.failures.insert(result.failures.end(), a.failures.begin(), a.failures.end());
            if (a.trace) {
                used_providers.insert(provider);
                result.traces.push_back(std::move(*a.trace));
            }
        }
    }
    return result;
}

ConsensusVerdict judge_consensus(const socrates::PromptSpec& prompt, const std::vector<LCoTTrace>& traces,
                                 const CodeJudge* judge) {
    ConsensusVerdict v;
    v.prompt_id = prompt.prompt_id;
    for (const auto& t : traces) {
        if (t.prompt_id != prompt.prompt_id)
            throw validation_error("trace belongs to a different prompt", t.trace_id);
        if (t.answer.kind() != prompt.answer_type)
            throw validation_error("trace answer kind does not match the prompt", t.trace_id);
        v.traces.push_back(t.trace_id);
    }
    if (traces.size() < 2) {
        v.status = VerdictStatus::unverifiable;
        return v;
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (std::size_t j = i + 1; j < traces.size(); ++j) {
            if (!answers_equivalent(traces[i].answer, traces[j].answer, prompt.answer_type, judge)) {
                v.status = VerdictStatus::divergent;
                return v;
            }
        }
    }
    auto first = std::min_element(traces.begin(), traces.end(),
                                  [](const LCoTTrace& a, const LCoTTrace& b) { return a.backend_id < b.backend_id; });
    v.status = VerdictStatus::verified;
    v.agreed_answer = first->answer;
    return v;
}

double consensus_filter_accuracy(double p, int k) {
    if (k < 2) throw validation_error("answer space needs at least two values");
    double wrong = (1.0 - p) * (1.0 - p) / double(k - 1);
    double right = p * p;
    return right + wrong > 0 ? right / (right + wrong) : 0.0;
}

FilterSimulation simulate_consensus_filter(double p, int k, std::size_t prompts, std::uint64_t seed, int solvers) {
    if (k < 2) throw validation_error("answer space needs at least two values");
    if (solvers < 2) throw validation_error("simulation needs at least two solvers");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution correct(p);
    std::uniform_int_distribution<int> decoy(1, k - 1);

    socrates::PromptSpec prompt;
    prompt.prompt_id = "sim";
    prompt.answer_type = AnswerKind::numeric;

    FilterSimulation out;
    out.prompts = prompts;
    std::vector<LCoTTrace> traces(static_cast<std::size_t>(solvers));
    for (int s = 0; s < solvers; ++s) {
        traces[s].prompt_id = prompt.prompt_id;
        traces[s].backend_id = "solver-" + std::to_string(s);
        traces[s].trace_id = "sim#" + traces[s].backend_id;
    }
    // The true answer is 0; decoys are the integers 1..k-1.
    for (std::size_t n = 0; n < prompts; ++n) {
        for (auto& t : traces) t.answer = FinalAnswer::numeric(correct(rng) ? 0.0 : double(decoy(rng)));
        auto verdict = judge_consensus(prompt, traces);
        if (verdict.status != VerdictStatus::verified) continue;
        ++out.verified;
        if (std::get<NumericAnswer>(verdict.agreed_answer->value).value == 0.0) ++out.verified_correct;
    }
    return out;
}

} // namespace lcot::consensus
