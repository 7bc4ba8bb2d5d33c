#include "lcot/store/knowledge_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "lcot/common/error.hpp"
#include "lcot/common/hash.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/text.hpp"

namespace fs = std::filesystem;

namespace lcot::store {
namespace {

constexpr const char* kFormat = "lcot-knowledge-store";
constexpr int kVersion = 1;

// Exclusive advisory lock on <dir>/.lock for the lifetime of the object.
class WriterLock {
public:
    explicit WriterLock(const fs::path& dir) {
        fd_ = ::open((dir / ".lock").c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorCode::runtime, "cannot open store lock in " + dir.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error(ErrorCode::runtime, "cannot lock store " + dir.string());
        }
    }
    ~WriterLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    WriterLock(const WriterLock&) = delete;
    WriterLock& operator=(const WriterLock&) = delete;

private:
    int fd_ = -1;
};

void append_lines(const fs::path& path, const std::string& text) {
    if (text.empty()) return;
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::runtime, "cannot append to " + path.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::runtime, "write failed for " + path.string());
}

std::string segment_name(std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "seg-%06zu.jsonl", n);
    return buf;
}

} // namespace

void to_json(nlohmann::json& j, const VerifiedQA& q) {
    j = {{"qa_id", q.qa_id},
         {"prompt_id", q.prompt_id},
         {"question", q.question},
         {"chain_text", q.chain_text},
         {"answer", q.answer},
         {"answer_type", q.answer_type},
         {"category", q.category},
         {"discipline", q.discipline},
         {"course_id", q.course_id},
         {"topic_id", q.topic_id},
         {"target_level", q.target_level},
         {"keywords", q.keywords},
         {"trace_ids", q.trace_ids}};
}

void from_json(const nlohmann::json& j, VerifiedQA& q) {
    q.qa_id = j.at("qa_id").get<std::string>();
    q.prompt_id = j.value("prompt_id", "");
    q.question = j.at("question").get<std::string>();
    q.chain_text = j.at("chain_text").get<std::string>();
    q.answer = j.at("answer").get<consensus::FinalAnswer>();
    q.answer_type = j.at("answer_type").get<AnswerKind>();
    q.category = j.at("category").get<Category>();
    q.discipline = j.at("discipline").get<Discipline>();
    q.course_id = j.at("course_id").get<std::string>();
    q.topic_id = j.at("topic_id").get<std::string>();
    q.target_level = j.at("target_level").get<TargetLevel>();
    q.keywords = j.value("keywords", std::vector<std::string>{});
    q.trace_ids = j.value("trace_ids", std::vector<std::string>{});
}

std::string make_qa_id(const std::string& question, const consensus::FinalAnswer& answer) {
    return sha256_hex(question + "\n" + answer.text()).substr(0, 16);
}

void to_json(nlohmann::json& j, const VerdictRecord& r) {
    j = nlohmann::json(r.verdict);
    j["level"] = r.level;
}

void from_json(const nlohmann::json& j, VerdictRecord& r) {
    r.verdict = j.get<consensus::ConsensusVerdict>();
    r.level = j.at("level").get<TargetLevel>();
}

void to_json(nlohmann::json& j, const CorpusStats& s) {
    j = {{"total", s.total},
         {"by_discipline", s.by_discipline},
         {"by_category", s.by_category},
         {"by_level", s.by_level}};
    nlohmann::json yield = nlohmann::json::object();
    for (const auto& [level, y] : s.verification_yield)
        yield[level] = {{"attempted", y.attempted}, {"verified", y.verified}, {"ratio", y.ratio()}};
    j["verification_yield"] = std::move(yield);
}

bool ScanFilter::matches(const VerifiedQA& q) const {
    return (!discipline || q.discipline == *discipline) && (!category || q.category == *category) &&
           (!level || q.target_level == *level);
}

KnowledgeStore::KnowledgeStore(KnowledgeStore&&) noexcept = default;
KnowledgeStore& KnowledgeStore::operator=(KnowledgeStore&&) noexcept = default;
KnowledgeStore::~KnowledgeStore() = default;

bool KnowledgeStore::exists(const fs::path& dir) { return fs::exists(dir / "manifest.json"); }

KnowledgeStore KnowledgeStore::create(const fs::path& dir, const socrates::Curriculum& curriculum) {
    if (exists(dir)) {
        auto store = open(dir);
        if (store.curriculum_.to_json() != curriculum.to_json())
            throw validation_error("store at " + dir.string() + " was built from a different curriculum");
        return store;
    }
    fs::create_directories(dir / "segments");
    WriterLock lock(dir);
    write_file_atomic(dir / "curriculum.json", curriculum.to_json().dump(2) + "\n");
    nlohmann::json manifest = {{"format", kFormat}, {"version", kVersion}, {"records", 0},
                               {"segments", nlohmann::json::array()}};
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    return open(dir);
}

KnowledgeStore KnowledgeStore::open(const fs::path& dir) {
    if (!exists(dir)) throw Error(ErrorCode::not_found, "no knowledge store at " + dir.string());
    KnowledgeStore store;
    store.dir_ = dir;
    store.mu_ = std::make_unique<std::shared_mutex>();
    store.load();
    return store;
}

void KnowledgeStore::load() {
    manifest_ = read_json_file(dir_ / "manifest.json");
    if (manifest_.value("format", "") != kFormat)
        throw Error(ErrorCode::integrity, "not a knowledge store manifest: " + (dir_ / "manifest.json").string());
    curriculum_ = socrates::Curriculum::from_json(read_json_file(dir_ / "curriculum.json"));

    lines_.clear();
    records_.clear();
    for (const auto& seg : manifest_.at("segments")) {
        auto path = dir_ / seg.at("file").get<std::string>();
        auto content = read_file(path);
        if (sha256_hex(content) != seg.at("sha256").get<std::string>())
            throw Error(ErrorCode::integrity, "checksum mismatch for segment " + path.string());
        std::size_t n = 0;
        for (const auto& line : split_lines(content)) {
            if (line.empty()) continue;
            auto q = parse_json_text(line, path.string()).get<VerifiedQA>();
            if (!curriculum_.has_topic(q.topic_id) || curriculum_.topic(q.topic_id).course_id != q.course_id)
                throw Error(ErrorCode::integrity, "record " + q.qa_id + " does not resolve against the curriculum");
            lines_[q.qa_id] = line;
            records_.emplace(q.qa_id, std::move(q));
            ++n;
        }
        if (n != seg.at("records").get<std::size_t>())
            throw Error(ErrorCode::integrity, "record count mismatch for segment " + path.string());
    }

    verdicts_.clear();
    if (fs::exists(dir_ / "verdicts.jsonl")) {
        for (auto& row : read_jsonl(dir_ / "verdicts.jsonl")) {
            auto r = row.get<VerdictRecord>();
            verdicts_.try_emplace(r.verdict.prompt_id, std::move(r));
        }
    }
}

IngestReport KnowledgeStore::ingest(const std::vector<consensus::ConsensusVerdict>& verdicts,
                                    const std::vector<socrates::PromptSpec>& prompts,
                                    const std::vector<consensus::LCoTTrace>& traces) {
    std::unique_lock guard(*mu_);
    WriterLock lock(dir_);

    std::map<std::string, const socrates::PromptSpec*> prompt_by_id;
    for (const auto& p : prompts) prompt_by_id[p.prompt_id] = &p;
    std::map<std::string, const consensus::LCoTTrace*> trace_by_id;
    for (const auto& t : traces) trace_by_id[t.trace_id] = &t;

    IngestReport report;
    auto reject = [&](const std::string& subject, const std::string& why) {
        ++report.rejected;
        audit(&report.audit, "ingest", subject, why);
    };

    std::string verdict_lines;
    std::map<std::string, VerifiedQA> fresh;
    for (const auto& v : verdicts) {
        auto pit = prompt_by_id.find(v.prompt_id);
        if (pit == prompt_by_id.end()) {
            reject(v.prompt_id, "verdict references an unknown prompt");
            continue;
        }
        const auto& prompt = *pit->second;
        if (!verdicts_.contains(v.prompt_id)) {
            VerdictRecord rec{v, prompt.target_level};
            verdict_lines += nlohmann::json(rec).dump() + "\n";
            verdicts_.emplace(v.prompt_id, std::move(rec));
        }
        if (v.status != consensus::VerdictStatus::verified || !v.agreed_answer) {
            reject(v.prompt_id, "verdict status " + std::string(consensus::to_string(v.status)) + " is not ingestible");
            continue;
        }
        if (!curriculum_.has_topic(prompt.topic_id)) {
            reject(v.prompt_id, "topic " + prompt.topic_id + " is not in the curriculum snapshot");
            continue;
        }
        const consensus::LCoTTrace* chosen = nullptr;
        bool missing = false;
        for (const auto& id : v.traces) {
            auto tit = trace_by_id.find(id);
            if (tit == trace_by_id.end()) {
                missing = true;
                break;
            }
            if (!chosen || tit->second->backend_id < chosen->backend_id) chosen = tit->second;
        }
        if (missing || !chosen) {
            reject(v.prompt_id, "verdict references a missing trace");
            continue;
        }
        if (trim(prompt.text).empty() || trim(chosen->chain_text).empty()) {
            reject(v.prompt_id, "empty question or chain");
            continue;
        }

        const auto& topic = curriculum_.topic(prompt.topic_id);
        const auto& course = curriculum_.course(topic.course_id);
        VerifiedQA q;
        q.qa_id = make_qa_id(prompt.text, *v.agreed_answer);
        q.prompt_id = prompt.prompt_id;
        q.question = prompt.text;
        q.chain_text = chosen->chain_text;
        q.answer = *v.agreed_answer;
        q.answer_type = prompt.answer_type;
        q.category = prompt.category;
        q.discipline = course.discipline;
        q.course_id = course.course_id;
        q.topic_id = topic.topic_id;
        q.target_level = prompt.target_level;
        q.keywords = {normalize_keyword(topic.title)};
        q.trace_ids = v.traces;
        if (records_.contains(q.qa_id) || fresh.contains(q.qa_id)) {
            ++report.duplicates;
            continue;
        }
        fresh.emplace(q.qa_id, std::move(q));
    }

    if (!fresh.empty()) {
        std::string content;
        std::map<std::string, std::string> new_lines;
        for (const auto& [id, q] : fresh) {
            auto line = nlohmann::json(q).dump();
            content += line + "\n";
            new_lines[id] = std::move(line);
        }
        auto& segments = manifest_.at("segments");
        std::string file = "segments/" + segment_name(segments.size() + 1);
        write_file_atomic(dir_ / file, content);
        segments.push_back({{"file", file}, {"records", fresh.size()}, {"sha256", sha256_hex(content)}});
        manifest_["records"] = records_.size() + fresh.size();
        lines_.merge(new_lines);
        report.ingested = fresh.size();
        records_.merge(fresh);
    }
    append_lines(dir_ / "verdicts.jsonl", verdict_lines);
    std::string audit_lines;
    for (const auto& e : report.audit) audit_lines += nlohmann::json(e).dump() + "\n";
    append_lines(dir_ / "audit.jsonl", audit_lines);
    // The manifest goes last: a crash before this point leaves only an
    // unreferenced segment behind.
    if (report.ingested) write_file_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n");
    return report;
}

const VerifiedQA& KnowledgeStore::get(const std::string& qa_id) const {
    std::shared_lock guard(*mu_);
    auto it = records_.find(qa_id);
    if (it == records_.end()) throw Error(ErrorCode::not_found, "no record " + qa_id);
    return it->second;
}

bool KnowledgeStore::contains(const std::string& qa_id) const {
    std::shared_lock guard(*mu_);
    return records_.contains(qa_id);
}

std::string KnowledgeStore::stored_line(const std::string& qa_id) const {
    std::shared_lock guard(*mu_);
    auto it = lines_.find(qa_id);
    if (it == lines_.end()) throw Error(ErrorCode::not_found, "no record " + qa_id);
    return it->second;
}

void KnowledgeStore::for_each(const ScanFilter& filter, const std::function<void(const VerifiedQA&)>& fn) const {
    std::shared_lock guard(*mu_);
    for (const auto& [id, q] : records_)
        if (filter.matches(q)) fn(q);
}

std::vector<VerifiedQA> KnowledgeStore::scan(const ScanFilter& filter) const {
    std::vector<VerifiedQA> out;
    for_each(filter, [&](const VerifiedQA& q) { out.push_back(q); });
    return out;
}

std::size_t KnowledgeStore::size() const {
    std::shared_lock guard(*mu_);
    return records_.size();
}

CorpusStats KnowledgeStore::stats() const {
    std::shared_lock guard(*mu_);
    CorpusStats s;
    s.total = records_.size();
    for (const auto& [id, q] : records_) {
        ++s.by_discipline[std::string(to_string(q.discipline))];
        ++s.by_category[std::string(to_string(q.category))];
        ++s.by_level[std::string(to_string(q.target_level))];
    }
    for (const auto& [pid, r] : verdicts_) {
        auto& y = s.verification_yield[std::string(to_string(r.level))];
        ++y.attempted;
        if (r.verdict.status == consensus::VerdictStatus::verified) ++y.verified;
    }
    return s;
}

std::vector<VerdictRecord> KnowledgeStore::verdict_log() const {
    std::shared_lock guard(*mu_);
    std::vector<VerdictRecord> out;
    for (const auto& [pid, r] : verdicts_) out.push_back(r);
    return out;
}

} // namespace lcot::store
