#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcot/gateway/gateway.hpp"
#include "lcot/gateway/http_backend.hpp"
#include "lcot/gateway/mock_backend.hpp"
#include "lcot/graph/hierarchy.hpp"
#include "lcot/sandbox/sandbox.hpp"

namespace lcot::app {

// type "mock": script inline; "replay": transcript path; "http": endpoint + wire format.
struct BackendConfig {
    std::string id;
    std::string type = "mock";
    std::string provider;
    std::string endpoint;
    std::string model;
    int max_concurrency = 4;
    double timeout_s = 120.0;
    gateway::MockScript script;
    std::filesystem::path transcript;
    gateway::WireFormat wire;
};

// Backend ids per job. Empty optional roles fall back to deterministic code paths.
struct Roles {
    std::string planner;
    std::string generator;
    std::string checker;
    std::vector<std::string> solvers;
    std::string author;
    std::string expander;           // optional
    std::string categorizer;        // optional
    std::string keyword_extractor;  // optional; tf-idf otherwise
    std::string titler;             // optional; communities stay untitled otherwise
    std::string judge;              // eval only
};

struct PipelineSettings {
    std::filesystem::path curriculum;
    std::filesystem::path out_dir;
    int thumbnails_per_topic = 4;
    double reductionist_fraction = 0.5;
    std::vector<std::string> articles;  // keywords; empty means every topic title
    std::string language = "en";
    std::filesystem::path style_guide;  // empty means the built-in default
    std::size_t keywords_per_article = 10;
    std::size_t workers = 4;
    // Stamped on traces instead of the wall clock when non-empty, so reruns are byte-identical.
    std::string fixed_timestamp;
    graph::HierarchyOptions hierarchy;
};

struct ServerSettings {
    std::string host = "127.0.0.1";
    int port = 8080;
};

struct AppConfig {
    std::filesystem::path source;  // file the config came from
    std::vector<BackendConfig> backends;
    Roles roles;
    PipelineSettings pipeline;
    ServerSettings server;
    sandbox::SandboxConfig sandbox;
    std::uint64_t seed = 1;
    std::string config_hash;  // 16 hex digits of sha256 over the canonical config JSON

    // Paths in the file are relative to the file's directory.
    static AppConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
};

AppConfig load_config(const std::filesystem::path& path);

// Registers every configured backend. Mock backends with no explicit seed use the config seed.
gateway::Gateway build_gateway(const AppConfig& config);

} // namespace lcot::app
