#include "lcot/app/config.hpp"

#include <memory>
#include <set>

#include "lcot/common/error.hpp"
#include "lcot/common/hash.hpp"
#include "lcot/common/json_io.hpp"
#include "lcot/gateway/replay_backend.hpp"

namespace lcot::app {
namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string role(const nlohmann::json& roles, const char* key) { return roles.value(key, std::string{}); }

BackendConfig parse_backend(const nlohmann::json& j, const fs::path& base, std::uint64_t seed) {
    BackendConfig b;
    b.id = j.at("id").get<std::string>();
    b.type = j.value("type", "mock");
    b.provider = j.value("provider", b.type == "mock" ? "mock-" + b.id : std::string{});
    b.endpoint = j.value("endpoint", std::string{});
    b.model = j.value("model", std::string{});
    b.max_concurrency = j.value("max_concurrency", 4);
    b.timeout_s = j.value("timeout_s", 120.0);
    if (b.id.empty()) throw validation_error("backend id must not be empty");
    if (b.type == "mock") {
        auto script = j.value("script", nlohmann::json::object());
        b.script = script.get<gateway::MockScript>();
        if (!script.contains("seed")) b.script.seed = static_cast<std::int64_t>(seed);
    } else if (b.type == "replay") {
        b.transcript = resolve(base, j.at("transcript").get<std::string>());
    } else if (b.type == "http") {
        if (b.endpoint.empty() || b.model.empty()) throw validation_error("http backend " + b.id + " needs endpoint and model");
        if (j.contains("wire")) b.wire = j.at("wire").get<gateway::WireFormat>();
    } else {
        throw validation_error("backend " + b.id + " has unknown type " + b.type);
    }
    return b;
}

} // namespace

AppConfig AppConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw validation_error("config must be a JSON object");
    AppConfig c;
    c.seed = j.value("seed", std::uint64_t{1});
    std::set<std::string> ids;
    for (const auto& b : j.value("backends", nlohmann::json::array())) {
        c.backends.push_back(parse_backend(b, base_dir, c.seed));
        if (!ids.insert(c.backends.back().id).second) throw validation_error("duplicate backend id " + c.backends.back().id);
    }

    const auto roles = j.value("roles", nlohmann::json::object());
    c.roles.planner = role(roles, "planner");
    c.roles.generator = role(roles, "generator");
    c.roles.checker = role(roles, "checker");
    c.roles.solvers = roles.value("solvers", std::vector<std::string>{});
    c.roles.author = role(roles, "author");
    c.roles.expander = role(roles, "expander");
    c.roles.categorizer = role(roles, "categorizer");
    c.roles.keyword_extractor = role(roles, "keyword_extractor");
    c.roles.titler = role(roles, "titler");
    c.roles.judge = role(roles, "judge");
    auto check = [&](const std::string& id, const char* what) {
        if (!id.empty() && !ids.contains(id)) throw validation_error(std::string("role ") + what + " names unknown backend " + id);
    };
    check(c.roles.planner, "planner");
    check(c.roles.generator, "generator");
    check(c.roles.checker, "checker");
    for (const auto& s : c.roles.solvers) check(s, "solvers");
    check(c.roles.author, "author");
    check(c.roles.expander, "expander");
    check(c.roles.categorizer, "categorizer");
    check(c.roles.keyword_extractor, "keyword_extractor");
    check(c.roles.titler, "titler");
    check(c.roles.judge, "judge");

    const auto p = j.value("pipeline", nlohmann::json::object());
    auto& ps = c.pipeline;
    ps.curriculum = resolve(base_dir, p.value("curriculum", std::string{}));
    ps.out_dir = resolve(base_dir, p.value("out_dir", std::string{"out"}));
    ps.thumbnails_per_topic = p.value("thumbnails_per_topic", ps.thumbnails_per_topic);
    ps.reductionist_fraction = p.value("reductionist_fraction", ps.reductionist_fraction);
    ps.articles = p.value("articles", std::vector<std::string>{});
    ps.language = p.value("language", ps.language);
    ps.style_guide = resolve(base_dir, p.value("style_guide", std::string{}));
    ps.keywords_per_article = p.value("keywords_per_article", ps.keywords_per_article);
    ps.workers = p.value("workers", ps.workers);
    ps.fixed_timestamp = p.value("fixed_timestamp", std::string{});
    ps.hierarchy.seed = c.seed;
    if (p.contains("hierarchy")) {
        const auto& h = p["hierarchy"];
        ps.hierarchy.q_max = h.value("q_max", ps.hierarchy.q_max);
        ps.hierarchy.restarts = h.value("restarts", ps.hierarchy.restarts);
        ps.hierarchy.n_null = h.value("n_null", ps.hierarchy.n_null);
        ps.hierarchy.min_size = h.value("min_size", ps.hierarchy.min_size);
        ps.hierarchy.max_depth = h.value("max_depth", ps.hierarchy.max_depth);
    }
    if (ps.thumbnails_per_topic < 1) throw validation_error("thumbnails_per_topic must be >= 1");
    if (ps.workers == 0) throw validation_error("pipeline workers must be >= 1");

    const auto s = j.value("server", nlohmann::json::object());
    c.server.host = s.value("host", c.server.host);
    c.server.port = s.value("port", c.server.port);

    c.sandbox = j.contains("sandbox") ? j.at("sandbox").get<sandbox::SandboxConfig>() : sandbox::SandboxConfig::defaults();
    // Where the outputs go does not change what is computed.
    auto hashed = j;
    if (hashed.contains("pipeline") && hashed["pipeline"].is_object()) hashed["pipeline"].erase("out_dir");
    c.config_hash = sha256_hex(hashed.dump()).substr(0, 16);
    return c;
}

AppConfig load_config(const fs::path& path) {
    auto j = read_json_file(path);
    auto c = AppConfig::from_json(j, fs::absolute(path).parent_path());
    c.source = path;
    return c;
}

gateway::Gateway build_gateway(const AppConfig& config) {
    gateway::Gateway gw;
    for (const auto& b : config.backends) {
        if (b.type == "mock") {
            auto backend = gateway::make_mock(b.id, b.script, b.provider, b.max_concurrency);
            if (!b.model.empty()) {
                auto spec = backend->spec();
                spec.model_name = b.model;
                backend = std::make_unique<gateway::MockBackend>(spec, b.script);
            }
            gw.register_backend(std::move(backend));
            continue;
        }
        gateway::BackendSpec spec{b.id, b.provider.empty() ? b.type + "-" + b.id : b.provider, b.endpoint,
                                  b.model.empty() ? b.id : b.model, b.max_concurrency, b.timeout_s};
        if (b.type == "replay") {
            if (spec.endpoint.empty()) spec.endpoint = "replay://" + b.transcript.string();
            gw.register_backend(std::make_unique<gateway::ReplayBackend>(spec, gateway::load_transcript(b.transcript)));
        } else {
            gw.register_backend(std::make_unique<gateway::HttpBackend>(spec, b.wire));
        }
    }
    return gw;
}

} // namespace lcot::app
