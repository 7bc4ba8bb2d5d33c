#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/common/audit.hpp"
#include "lcot/consensus/answer.hpp"
#include "lcot/gateway/gateway.hpp"
#include "lcot/socrates/prompts.hpp"

namespace lcot::consensus {

struct LCoTTrace {
    std::string trace_id;
    std::string prompt_id;
    std::string backend_id;
    std::string chain_text;
    std::string raw_answer_span;
    FinalAnswer answer;
    std::string created_at;
};

enum class VerdictStatus { verified, divergent, unverifiable };

struct ConsensusVerdict {
    std::string prompt_id;
    VerdictStatus status = VerdictStatus::unverifiable;
    std::vector<std::string> traces;
    std::optional<FinalAnswer> agreed_answer;  // present iff verified
};

std::string_view to_string(VerdictStatus s);

void to_json(nlohmann::json& j, const LCoTTrace& t);
void from_json(const nlohmann::json& j, LCoTTrace& t);
void to_json(nlohmann::json& j, const ConsensusVerdict& v);
void from_json(const nlohmann::json& j, ConsensusVerdict& v);

std::string utc_timestamp();

struct SolveOptions {
    int per_backend_attempts = 1;  // re-asks when a chain has no extractable answer
    bool retry_with_alternate = false;
    std::vector<std::string> alternates;  // tried in order when fewer than 2 traces survive
    std::size_t workers = 4;
    std::function<std::string()> clock = utc_timestamp;
};

struct SolveResult {
    std::vector<LCoTTrace> traces;
    AuditLog failures;
};

std::string build_solver_prompt(const socrates::PromptSpec& prompt);

// Requires >= 2 backends with pairwise distinct provider names. Backends that
// fail or never produce an extractable answer contribute no trace.
SolveResult solve(const socrates::PromptSpec& prompt, const std::vector<std::string>& backend_ids,
                  const gateway::Gateway& gw, const SolveOptions& options = {});

// One backend, no consensus: at most one trace, failures audited.
SolveResult solve_single(const socrates::PromptSpec& prompt, const std::string& backend_id,
                         const gateway::Gateway& gw, const SolveOptions& options = {});

// Unanimity over all traces: verified iff >= 2 traces and every pair agrees;
// divergent iff >= 2 traces and some pair disagrees; otherwise unverifiable.
// The agreed answer is taken from the lexicographically smallest backend_id.
ConsensusVerdict judge_consensus(const socrates::PromptSpec& prompt, const std::vector<LCoTTrace>& traces,
                                 const CodeJudge* judge = nullptr);

// Closed-form accuracy of the unanimity filter for two independent solvers of
// accuracy p over an answer space of size k with uniform wrong answers.
double consensus_filter_accuracy(double p, int k);

struct FilterSimulation {
    std::size_t prompts = 0;
    std::size_t verified = 0;
    std::size_t verified_correct = 0;
    double verified_accuracy() const { return verified ? double(verified_correct) / double(verified) : 0.0; }
};

// Monte Carlo of `solvers` independent solvers, each correct with probability
// p and otherwise uniform over k-1 decoys, pushed through judge_consensus.
FilterSimulation simulate_consensus_filter(double p, int k, std::size_t prompts, std::uint64_t seed, int solvers = 2);

} // namespace lcot::consensus
