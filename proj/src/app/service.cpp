#include "lcot/app/service.hpp"

#include <httplib.h>

#include "lcot/app/pipeline.hpp"
#include "lcot/brainstorm/search.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/common/text.hpp"

namespace lcot::app {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

HttpReply failure(const Error& e) { return {http_status(e.code()), error_envelope(e)}; }

void send(httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
}

} // namespace

json error_envelope(const Error& e) { return {{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}}; }

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::validation: return 400;
    case ErrorCode::not_found:
    case ErrorCode::no_coverage: return 404;
    case ErrorCode::parse:
    case ErrorCode::backend: return 502;
    case ErrorCode::integrity:
    case ErrorCode::runtime: return 500;
    }
    return 500;
}

Service::Service(const AppConfig& config)
    : config_(config), gw_(build_gateway(config)), sandbox_(config.sandbox),
      scorers_(mcp::ScorerRegistry::defaults(&sandbox_)) {
    if (store::KnowledgeStore::exists(kb_dir(config_))) store_.emplace(store::KnowledgeStore::open(kb_dir(config_)));
    if (fs::exists(index_dir(config_) / "index.json")) index_.emplace(brainstorm::load_index(index_dir(config_)));
    if (fs::exists(tree_path(config_))) tree_.emplace(read_json_file(tree_path(config_)).get<graph::CommunityTree>());
    style_ = config_.pipeline.style_guide.empty() ? plato::StyleGuide::pedagogical_default()
                                                  : plato::load_style_guide(config_.pipeline.style_guide);
    if (fs::exists(articles_dir(config_)))
        for (const auto& e : fs::directory_iterator(articles_dir(config_)))
            if (e.path().extension() == ".json") {
                auto a = read_json_file(e.path()).get<plato::Article>();
                articles_[normalize_keyword(a.keyword)] = std::move(a);
            }

    mcp::McpContext ctx;
    ctx.gateway = &gw_;
    ctx.store = store_ ? &*store_ : nullptr;
    ctx.index = index_ ? &*index_ : nullptr;
    ctx.sandbox = &sandbox_;
    ctx.scorers = &scorers_;
    ctx.backends = {config_.roles.author, config_.roles.expander, config_.roles.categorizer, config_.roles.planner,
                    config_.roles.generator, config_.roles.solvers.empty() ? "" : config_.roles.solvers.front()};
    ctx.workers = sandbox_.config().workers;
    mcp_ = std::make_unique<mcp::McpServer>(ctx);
}

Service::~Service() = default;

HttpReply Service::search(const std::string& query, std::size_t k) const {
    if (trim(query).empty()) return failure(validation_error("query parameter q is required"));
    if (!index_ || !store_) return failure(Error(ErrorCode::not_found, "no index has been built"));
    auto expanded = brainstorm::expand_query(query, config_.roles.expander.empty() ? nullptr : &gw_,
                                             config_.roles.expander);
    auto hits = brainstorm::search(*index_, expanded, k);
    json rows = json::array();
    for (const auto& h : hits) {
        json row = h;
        const auto& q = store_->get(h.qa_id);
        row["question"] = q.question;
        row["category"] = q.category;
        row["discipline"] = q.discipline;
        rows.push_back(std::move(row));
    }
    json suggestions = json::array();
    for (const auto& t : expanded.terms)
        if (t.weight < 1.0) suggestions.push_back(t.term);
    return {200, {{"query", query}, {"hits", rows}, {"no_coverage", hits.empty()}, {"expansion", expanded},
                  {"suggestions", suggestions}}};
}

HttpReply Service::article(const std::string& keyword) const {
    std::lock_guard lock(articles_mu_);
    auto it = articles_.find(normalize_keyword(keyword));
    if (it == articles_.end())
        return failure(Error(ErrorCode::not_found, "no article for " + keyword, "POST /article to generate one"));
    return {200, it->second};
}

HttpReply Service::create_article(const json& request) {
    if (!request.is_object() || !request.contains("keyword") || !request["keyword"].is_string() ||
        trim(request["keyword"].get<std::string>()).empty())
        return failure(validation_error("body must be an object with a non-empty keyword"));
    if (!index_ || !store_) return failure(Error(ErrorCode::not_found, "no knowledge base has been built"));
    if (config_.roles.author.empty()) return failure(Error(ErrorCode::runtime, "no author backend configured"));
    auto keyword = request["keyword"].get<std::string>();
    auto language = request.value("language", config_.pipeline.language);
    try {
        auto a = plato::generate_page_workflow(keyword, *index_, *store_, style_, language, gw_,
                                               {config_.roles.author, config_.roles.expander, config_.roles.categorizer});
        std::lock_guard lock(articles_mu_);
        articles_[normalize_keyword(keyword)] = a;
        return {201, a};
    } catch (const Error& e) {
        return failure(e);
    }
}

HttpReply Service::chain(const std::string& qa_id) const {
    if (!store_ || !store_->contains(qa_id)) return failure(Error(ErrorCode::not_found, "no chain with id " + qa_id));
    return {200, store_->get(qa_id)};
}

HttpReply Service::hierarchy() const {
    if (!tree_) return failure(Error(ErrorCode::not_found, "no community tree has been built"));
    return {200, *tree_};
}

std::string Service::mcp(const std::string& body) const { return mcp_->handle_text(body); }

void Service::mount(httplib::Server& server) {
    server.Get("/search", [this](const httplib::Request& req, httplib::Response& res) {
        std::size_t k = 10;
        if (req.has_param("k")) {
            try {
                k = std::stoul(req.get_param_value("k"));
            } catch (const std::exception&) {
                return send(res, failure(validation_error("k must be a positive integer")));
            }
        }
        if (k == 0) return send(res, failure(validation_error("k must be a positive integer")));
        send(res, search(req.get_param_value("q"), k));
    });
    server.Get(R"(/article/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, article(req.matches[1].str()));
    });
    server.Post("/article", [this](const httplib::Request& req, httplib::Response& res) {
        auto body = json::parse(req.body, nullptr, false);
        if (body.is_discarded()) return send(res, failure(validation_error("body is not JSON")));
        send(res, create_article(body));
    });
    server.Get(R"(/chain/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        send(res, chain(req.matches[1].str()));
    });
    server.Get("/hierarchy", [this](const httplib::Request&, httplib::Response& res) { send(res, hierarchy()); });
    server.Post("/mcp", [this](const httplib::Request& req, httplib::Response& res) {
        auto reply = mcp(req.body);
        if (reply.empty()) {
            res.status = 202;
            return;
        }
        res.set_content(reply, "application/json");
    });
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status != 404 || !res.body.empty()) return;
        send(res, failure(Error(ErrorCode::not_found, "no route for " + req.method + " " + req.path)));
    });
}

void Service::listen(const std::string& host, int port) {
    httplib::Server server;
    mount(server);
    if (!server.listen(host, port)) throw Error(ErrorCode::runtime, "cannot listen on " + host + ":" + std::to_string(port));
}

} // namespace lcot::app
