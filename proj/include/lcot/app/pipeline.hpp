#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/app/config.hpp"
#include "lcot/gateway/gateway.hpp"

namespace lcot::app {

inline constexpr std::array<std::string_view, 9> kStages = {"prompts",  "sanitize", "solve",    "consensus", "ingest",
                                                            "index",    "articles", "keywords", "cluster"};

struct StageRecord {
    std::string stage;
    std::string status;  // "done"
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> outputs;  // relative to out_dir
    std::string started;
    std::string finished;
};

struct RunManifest {
    std::string run_id;
    std::string config_hash;
    std::vector<StageRecord> stages;  // completed stages in run order

    const StageRecord* find(std::string_view stage) const;
    bool done(std::string_view stage) const { return find(stage) != nullptr; }
};

void to_json(nlohmann::json& j, const StageRecord& s);
void from_json(const nlohmann::json& j, StageRecord& s);
void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

struct PipelineOptions {
    std::string stop_after;  // stage name; empty runs to the end
    bool force = false;      // discard earlier outputs instead of resuming
    std::function<std::string()> clock;  // manifest timestamps; wall clock when empty
};

struct PipelineResult {
    RunManifest manifest;
    std::vector<std::string> ran;
    std::vector<std::string> resumed;  // stages skipped because a checkpoint existed
    bool complete = false;
};

// Output layout under pipeline.out_dir:
//   manifest.json, stages/*.jsonl, kb/, index/, articles/, graph/, tree.json.
// Every finished stage is checkpointed in manifest.json; a rerun continues at
// the first unfinished stage. A manifest from a different config is refused
// unless force is set. One run per out_dir at a time (lock file).
PipelineResult run_pipeline(const AppConfig& config, const gateway::Gateway& gw, const PipelineOptions& options = {});

// Output paths for other commands.
std::filesystem::path kb_dir(const AppConfig& config);
std::filesystem::path index_dir(const AppConfig& config);
std::filesystem::path articles_dir(const AppConfig& config);
std::filesystem::path tree_path(const AppConfig& config);

// File-system friendly name for a keyword: normalized, non-alphanumerics as '-'.
std::string keyword_slug(const std::string& keyword);

} // namespace lcot::app
