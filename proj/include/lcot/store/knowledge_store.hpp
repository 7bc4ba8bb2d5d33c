#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/common/audit.hpp"
#include "lcot/common/domain.hpp"
#include "lcot/consensus/consensus.hpp"
#include "lcot/socrates/curriculum.hpp"
#include "lcot/socrates/prompts.hpp"

namespace lcot::store {

struct VerifiedQA {
    std::string qa_id;
    std::string prompt_id;
    std::string question;
    std::string chain_text;
    consensus::FinalAnswer answer;
    AnswerKind answer_type = AnswerKind::numeric;
    Category category = Category::reductionist;
    Discipline discipline = Discipline::physics;
    std::string course_id;
    std::string topic_id;
    TargetLevel target_level = TargetLevel::undergraduate;
    std::vector<std::string> keywords;
    std::vector<std::string> trace_ids;
};

void to_json(nlohmann::json& j, const VerifiedQA& q);
void from_json(const nlohmann::json& j, VerifiedQA& q);

// First 16 hex digits of sha256(question "\n" answer text).
std::string make_qa_id(const std::string& question, const consensus::FinalAnswer& answer);

// One line of the verdict log; every judged prompt lands here, including the
// ones that never become records, so yield can be audited per level.
struct VerdictRecord {
    consensus::ConsensusVerdict verdict;
    TargetLevel level = TargetLevel::undergraduate;
};

void to_json(nlohmann::json& j, const VerdictRecord& r);
void from_json(const nlohmann::json& j, VerdictRecord& r);

struct YieldStats {
    std::size_t attempted = 0;
    std::size_t verified = 0;
    double ratio() const { return attempted ? double(verified) / double(attempted) : 0.0; }
};

struct CorpusStats {
    std::size_t total = 0;
    std::map<std::string, std::size_t> by_discipline;
    std::map<std::string, std::size_t> by_category;
    std::map<std::string, std::size_t> by_level;
    std::map<std::string, YieldStats> verification_yield;  // keyed by target level
};

void to_json(nlohmann::json& j, const CorpusStats& s);

struct ScanFilter {
    std::optional<Discipline> discipline;
    std::optional<Category> category;
    std::optional<TargetLevel> level;

    bool matches(const VerifiedQA& q) const;
};

struct IngestReport {
    std::size_t ingested = 0;   // new records
    std::size_t duplicates = 0; // already stored, skipped
    std::size_t rejected = 0;   // non-verified or unresolvable verdicts
    AuditLog audit;
};

// Append-only store laid out as
//   manifest.json        segment list with record counts and sha256
//   segments/seg-N.jsonl VerifiedQA records, one per line, sorted by qa_id
//   curriculum.json      snapshot the records resolve against
//   verdicts.jsonl       every judged prompt (VerdictRecord)
//   audit.jsonl          rejected ingest inputs
// One writer at a time (in-process mutex plus an exclusive lock file);
// readers only see segments listed in the manifest they loaded.
class KnowledgeStore {
public:
    // Creates the layout if absent, otherwise opens it. A curriculum given for
    // an existing store must match the stored snapshot.
    static KnowledgeStore create(const std::filesystem::path& dir, const socrates::Curriculum& curriculum);
    // Verifies every segment checksum; a mismatch is an integrity error.
    static KnowledgeStore open(const std::filesystem::path& dir);
    static bool exists(const std::filesystem::path& dir);

    KnowledgeStore(KnowledgeStore&&) noexcept;
    KnowledgeStore& operator=(KnowledgeStore&&) noexcept;
    ~KnowledgeStore();

    IngestReport ingest(const std::vector<consensus::ConsensusVerdict>& verdicts,
                        const std::vector<socrates::PromptSpec>& prompts,
                        const std::vector<consensus::LCoTTrace>& traces);

    const VerifiedQA& get(const std::string& qa_id) const;
    bool contains(const std::string& qa_id) const;
    std::vector<VerifiedQA> scan(const ScanFilter& filter = {}) const;
    void for_each(const ScanFilter& filter, const std::function<void(const VerifiedQA&)>& fn) const;
    std::size_t size() const;
    CorpusStats stats() const;
    std::vector<VerdictRecord> verdict_log() const;

    const socrates::Curriculum& curriculum() const { return curriculum_; }
    const std::filesystem::path& dir() const { return dir_; }
    // Exact stored line for a record, for durability checks.
    std::string stored_line(const std::string& qa_id) const;

private:
    KnowledgeStore() = default;
    void load();

    std::filesystem::path dir_;
    socrates::Curriculum curriculum_;
    std::map<std::string, std::string> lines_;  // qa_id -> stored JSON line
    std::map<std::string, VerifiedQA> records_;
    std::map<std::string, VerdictRecord> verdicts_;  // prompt_id -> first logged verdict
    nlohmann::json manifest_;
    std::unique_ptr<std::shared_mutex> mu_;
};

} // namespace lcot::store
