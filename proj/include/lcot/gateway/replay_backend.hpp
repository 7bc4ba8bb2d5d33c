#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "lcot/gateway/gateway.hpp"

namespace lcot::gateway {

struct TranscriptEntry {
    std::string system_prompt;
    std::string user_prompt;
    std::string response;
};

std::vector<TranscriptEntry> load_transcript(const std::filesystem::path& path);
void save_transcript(const std::filesystem::path& path, const std::vector<TranscriptEntry>& entries);

// Replays frozen (system, user) -> response pairs. A request that was never
// recorded is a non-retriable failure.
class ReplayBackend : public Backend {
public:
    ReplayBackend(BackendSpec spec, const std::vector<TranscriptEntry>& entries);

    const BackendSpec& spec() const override { return spec_; }
    ChatResponse complete(const ChatRequest& request) override;

private:
    BackendSpec spec_;
    std::map<std::pair<std::string, std::string>, std::string> responses_;
};

// Wraps another backend and records everything it answers.
class RecordingBackend : public Backend {
public:
    explicit RecordingBackend(std::unique_ptr<Backend> inner) : inner_(std::move(inner)) {}

    const BackendSpec& spec() const override { return inner_->spec(); }
    ChatResponse complete(const ChatRequest& request) override;
    std::vector<TranscriptEntry> transcript() const;

private:
    std::unique_ptr<Backend> inner_;
    mutable std::mutex mu_;
    std::vector<TranscriptEntry> entries_;
};

} // namespace lcot::gateway
