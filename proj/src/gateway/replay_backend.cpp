#include "lcot/gateway/replay_backend.hpp"

#include "lcot/common/json_io.hpp"

namespace lcot::gateway {

std::vector<TranscriptEntry> load_transcript(const std::filesystem::path& path) {
    std::vector<TranscriptEntry> out;
    for (const auto& row : read_jsonl(path))
        out.push_back({row.value("system", std::string{}), row.at("user").get<std::string>(),
                       row.at("response").get<std::string>()});
    return out;
}

void save_transcript(const std::filesystem::path& path, const std::vector<TranscriptEntry>& entries) {
    std::vector<json> rows;
    for (const auto& e : entries) rows.push_back({{"system", e.system_prompt}, {"user", e.user_prompt}, {"response", e.response}});
    write_file_atomic(path, to_jsonl(rows));
}

ReplayBackend::ReplayBackend(BackendSpec spec, const std::vector<TranscriptEntry>& entries) : spec_(std::move(spec)) {
    for (const auto& e : entries) responses_[{e.system_prompt, e.user_prompt}] = e.response;
}

ChatResponse ReplayBackend::complete(const ChatRequest& request) {
    auto it = responses_.find({request.system_prompt, request.user_prompt});
    if (it == responses_.end())
        throw BackendError(FailureKind::rejected, spec_.backend_id, "request not present in transcript");
    ChatResponse r;
    r.text = it->second;
    r.backend_id = spec_.backend_id;
    return r;
}

ChatResponse RecordingBackend::complete(const ChatRequest& request) {
    auto r = inner_->complete(request);
    std::lock_guard lock(mu_);
    entries_.push_back({request.system_prompt, request.user_prompt, r.text});
    return r;
}

std::vector<TranscriptEntry> RecordingBackend::transcript() const {
    std::lock_guard lock(mu_);
    return entries_;
}

} // namespace lcot::gateway
