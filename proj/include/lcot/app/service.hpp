#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "lcot/app/config.hpp"
#include "lcot/brainstorm/index.hpp"
#include "lcot/common/error.hpp"
#include "lcot/graph/hierarchy.hpp"
#include "lcot/mcp/server.hpp"
#include "lcot/plato/article.hpp"
#include "lcot/store/knowledge_store.hpp"

namespace httplib {
class Server;
}

namespace lcot::app {

// {code, message, detail}
nlohmann::json error_envelope(const Error& e);
int http_status(ErrorCode code);

struct HttpReply {
    int status = 200;
    nlohmann::json body;
};

// Read-mostly view over a finished pipeline run plus the MCP tools.
//   GET  /search?q=<keyword>&k=<n>
//   GET  /article/<keyword>        cached article, 404 when none was generated
//   POST /article {keyword, language?}
//   GET  /chain/<qa_id>
//   GET  /hierarchy
//   POST /mcp                      JSON-RPC body, same payloads as stdio
// Any other route answers 404 with the error envelope.
class Service {
public:
    // Opens whatever the run produced; missing pieces make their routes 404.
    explicit Service(const AppConfig& config);
    ~Service();

    HttpReply search(const std::string& query, std::size_t k) const;
    HttpReply article(const std::string& keyword) const;
    HttpReply create_article(const nlohmann::json& request);
    HttpReply chain(const std::string& qa_id) const;
    HttpReply hierarchy() const;
    // Empty string means a notification: reply 202 with no body.
    std::string mcp(const std::string& body) const;

    const mcp::McpServer& mcp_server() const { return *mcp_; }
    const gateway::Gateway& gateway() const { return gw_; }

    // Installs the routes on an httplib server.
    void mount(httplib::Server& server);
    // Blocks until the server stops.
    void listen(const std::string& host, int port);

private:
    AppConfig config_;
    gateway::Gateway gw_;
    std::optional<store::KnowledgeStore> store_;
    std::optional<brainstorm::Index> index_;
    std::optional<graph::CommunityTree> tree_;
    sandbox::Sandbox sandbox_;
    mcp::ScorerRegistry scorers_;
    std::unique_ptr<mcp::McpServer> mcp_;
    plato::StyleGuide style_;
    mutable std::mutex articles_mu_;
    std::map<std::string, plato::Article> articles_;  // normalized keyword -> article
};

} // namespace lcot::app
