#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lcot/brainstorm/index.hpp"
#include "lcot/gateway/gateway.hpp"
#include "lcot/mcp/scoring.hpp"
#include "lcot/sandbox/sandbox.hpp"
#include "lcot/store/knowledge_store.hpp"

namespace lcot::mcp {

inline constexpr const char* kProtocolVersion = "2024-11-05";
inline constexpr const char* kServerName = "lcot";
inline constexpr const char* kServerVersion = "1.0.0";
inline constexpr const char* kDefaultEducationLevel = "advanced_undergraduate";

// JSON-RPC 2.0 error codes.
inline constexpr int kParseError = -32700;
inline constexpr int kInvalidRequest = -32600;
inline constexpr int kMethodNotFound = -32601;
inline constexpr int kInvalidParams = -32602;

struct McpBackends {
    std::string author;       // generate_article
    std::string expander;     // optional
    std::string categorizer;  // optional
    std::string planner;      // optional; without it generate_problems uses one synthetic sketch
    std::string generator;    // generate_problems
    std::string solver;       // solve_problems
};

// Everything the tools need. Pointers are borrowed; store and index may be
// null, in which case generate_article reports a runtime error.
struct McpContext {
    const gateway::Gateway* gateway = nullptr;
    const store::KnowledgeStore* store = nullptr;
    const brainstorm::Index* index = nullptr;
    const sandbox::Sandbox* sandbox = nullptr;
    const ScorerRegistry* scorers = nullptr;
    McpBackends backends;
    std::size_t workers = 8;
};

// Wire names of answer kinds; numeric travels as "calculation".
std::string answer_type_wire_name(AnswerKind kind);

class McpServer {
public:
    explicit McpServer(McpContext context);

    // Tool manifest as returned by tools/list.
    nlohmann::json tool_manifest() const;

    // Runs one tool. Bad arguments throw InvalidParams; failures while doing
    // the work throw lcot::Error.
    nlohmann::json call_tool(const std::string& name, const nlohmann::json& arguments) const;

    // One JSON-RPC message or batch. Returns nothing for notifications.
    std::optional<nlohmann::json> handle(const nlohmann::json& message) const;
    // Raw text in, raw text out; empty output means nothing to send.
    std::string handle_text(std::string_view body) const;

    // Newline-delimited JSON-RPC until EOF.
    void serve_stdio(std::istream& in, std::ostream& out) const;

    struct InvalidParams : std::runtime_error {
        using std::runtime_error::runtime_error;
    };

private:
    nlohmann::json handle_one(const nlohmann::json& message) const;
    nlohmann::json generate_article(const nlohmann::json& args) const;
    nlohmann::json generate_problems(const nlohmann::json& args) const;
    nlohmann::json solve_problems(const nlohmann::json& args) const;
    nlohmann::json list_supported_languages(const nlohmann::json& args) const;
    nlohmann::json execute_code(const nlohmann::json& args) const;
    nlohmann::json execute_codes_parallel(const nlohmann::json& args) const;
    nlohmann::json compute_score_parallel(const nlohmann::json& args) const;

    McpContext ctx_;
};

} // namespace lcot::mcp
