#include "lcot/mcp/server.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "lcot/common/error.hpp"
#include "lcot/common/parallel.hpp"
#include "lcot/common/text.hpp"
#include "lcot/consensus/consensus.hpp"
#include "lcot/plato/article.hpp"
#include "lcot/socrates/prompts.hpp"

namespace lcot::mcp {
namespace {

using json = nlohmann::json;
using InvalidParams = McpServer::InvalidParams;

constexpr double kExecTimeout = sandbox::kDefaultExecTimeout;

json schema_string(const char* description) { return {{"type", "string"}, {"description", description}}; }

json tool(const char* name, const char* description, json properties, std::vector<std::string> required) {
    json schema = {{"type", "object"}, {"properties", std::move(properties)}};
    if (!required.empty()) schema["required"] = std::move(required);
    return {{"name", name}, {"description", description}, {"inputSchema", std::move(schema)}};
}

json build_manifest() {
    json tools = json::array();
    tools.push_back(tool(
        "generate_article",
        "Write an encyclopedia entry on a topic, grounded in verified derivations retrieved from the knowledge base. "
        "Returns the body together with the topic, language, style and model actually used.",
        {{"topic", schema_string("Subject of the entry, for example \"Quantum Tunneling\".")},
         {"language", schema_string("Language tag for the body text, for example \"en-US\" or \"zh-CN\".")},
         {"style_guide", schema_string("Free-text writing instructions. The built-in teaching style is used when absent.")},
         {"model_name", schema_string("Backend id or model name to write with. Defaults to the configured author.")}},
        {"topic", "language"}));
    tools.push_back(tool(
        "generate_problems",
        "Draft problems in a field, each with the drafting model's own worked solution and final answer. "
        "Fewer than count problems may come back.",
        {{"subject", schema_string("Broad discipline, for example \"computational physics\".")},
         {"field", schema_string("Narrow area inside the subject, for example \"quantum tunneling\".")},
         {"count", {{"type", "integer"}, {"minimum", 1}, {"description", "Upper bound on the number of problems."}}},
         {"education_level",
          {{"type", "string"}, {"default", kDefaultEducationLevel}, {"description", "Intended audience level."}}}},
        {"subject", "field", "count"}));
    json problem_schema = {{"type", "object"},
                           {"properties",
                            {{"task_id", {{"type", "integer"}}},
                             {"problem", {{"type", "string"}}},
                             {"answer_type", {{"type", "string"}}},
                             {"solution", {{"type", "string"}}},
                             {"answer", {{"type", "string"}}}}},
                           {"required", {"task_id", "problem", "answer_type"}}};
    tools.push_back(tool(
        "solve_problems",
        "Solve each problem independently with the solver model and fill in solution and answer. Other fields are "
        "returned unchanged; an item that cannot be handled carries an error field instead.",
        {{"subject", schema_string("Broad discipline of the problems.")},
         {"field", schema_string("Narrow area of the problems.")},
         {"problems", {{"type", "array"}, {"items", problem_schema}, {"description", "Problems to solve, such as the output of generate_problems."}}}},
        {"subject", "field", "problems"}));
    tools.push_back(tool("list_supported_languages", "Names of the languages the code runner can execute.",
                         json::object(), {}));
    json timeout10 = {{"type", "number"}, {"minimum", 0}, {"default", kExecTimeout},
                      {"description", "Wall-clock limit in seconds."}};
    tools.push_back(tool(
        "execute_code",
        "Run one snippet in an isolated process without network access and report exit status, output and timing.",
        {{"language", schema_string("Language name as listed by list_supported_languages.")},
         {"code", schema_string("Program source.")},
         {"timeout", timeout10}},
        {"language", "code"}));
    tools.push_back(tool(
        "execute_codes_parallel",
        "Run several snippets concurrently. Result i belongs to snippet i; a failing snippet does not stop the rest.",
        {{"language", schema_string("Language name as listed by list_supported_languages.")},
         {"code_list", {{"type", "array"}, {"items", {{"type", "string"}}}, {"description", "Program sources."}}},
         {"timeout", timeout10}},
        {"language", "code_list"}));
    tools.push_back(tool(
        "compute_score_parallel",
        "Score candidate solutions against reference answers with the scorer registered for data_source, "
        "reporting a score and the time taken for each item.",
        {{"data_source", schema_string("Scorer name, for example \"theoretical_physics\" or \"code\".")},
         {"solution_list", {{"type", "array"}, {"items", {{"type", "string"}}}, {"description", "Candidate solutions."}}},
         {"ground_truth_list", {{"type", "array"}, {"items", {{"type", "string"}}}, {"description", "Reference answers, aligned with solution_list."}}},
         {"extra_info_list",
          {{"type", {"array", "null"}},
           {"items", {{"type", {"object", "string", "null"}}}},
           {"description", "Per-item hints such as answer_type or language; null entries and a null list are allowed."}}},
         {"timeout", {{"type", "number"}, {"minimum", 0}, {"default", kDefaultScoreTimeout},
                      {"description", "Per-item limit in seconds."}}}},
        {"data_source", "solution_list", "ground_truth_list"}));
    return tools;
}

const json& arg(const json& args, const char* key) {
    static const json null_value;
    auto it = args.find(key);
    return it == args.end() ? null_value : *it;
}

std::string need_string(const json& args, const char* key) {
    const auto& v = arg(args, key);
    if (!v.is_string()) throw InvalidParams(std::string("'") + key + "' must be a string");
    auto s = v.get<std::string>();
    if (trim(s).empty()) throw InvalidParams(std::string("'") + key + "' must not be empty");
    return s;
}

std::optional<std::string> opt_string(const json& args, const char* key) {
    const auto& v = arg(args, key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string()) throw InvalidParams(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

double timeout_arg(const json& args, double fallback) {
    const auto& v = arg(args, "timeout");
    if (v.is_null()) return fallback;
    if (!v.is_number()) throw InvalidParams("'timeout' must be a number");
    double t = v.get<double>();
    if (!(t >= 0) || !std::isfinite(t)) throw InvalidParams("'timeout' must be a nonnegative number");
    return t;
}

std::vector<std::string> string_list(const json& args, const char* key) {
    const auto& v = arg(args, key);
    if (!v.is_array()) throw InvalidParams(std::string("'") + key + "' must be a list of strings");
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string()) throw InvalidParams(std::string("'") + key + "' must be a list of strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

Discipline guess_discipline(const std::string& subject) {
    auto s = case_fold(subject);
    if (s.find("comput") != std::string::npos) return Discipline::computation;
    if (s.find("phys") != std::string::npos) return Discipline::physics;
    if (s.find("chem") != std::string::npos) return Discipline::chemistry;
    if (s.find("bio") != std::string::npos) return Discipline::biology;
    if (s.find("engineer") != std::string::npos) return Discipline::engineering;
    if (s.find("math") != std::string::npos) return Discipline::mathematics;
    return Discipline::physics;
}

TargetLevel level_of(const std::string& education_level) {
    auto s = case_fold(education_level);
    if (s.find("high") != std::string::npos || s.find("secondary") != std::string::npos) return TargetLevel::high_school;
    if (s.find("undergrad") != std::string::npos) return TargetLevel::undergraduate;
    if (s.find("grad") != std::string::npos || s.find("phd") != std::string::npos ||
        s.find("doctor") != std::string::npos || s.find("master") != std::string::npos)
        return TargetLevel::graduate;
    return TargetLevel::undergraduate;
}

json error_envelope(ErrorCode code, const std::string& message, const std::string& detail) {
    return {{"code", to_string(code)}, {"message", message}, {"detail", detail}};
}

json rpc_error(const json& id, int code, const std::string& message, const json& data = nullptr) {
    json err = {{"code", code}, {"message", message}};
    if (!data.is_null()) err["data"] = data;
    return {{"jsonrpc", "2.0"}, {"id", id}, {"error", std::move(err)}};
}

json rpc_result(const json& id, json result) { return {{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}}; }

json text_content(const std::string& text, bool is_error) {
    return {{"content", json::array({{{"type", "text"}, {"text", text}}})}, {"isError", is_error}};
}

} // namespace

std::string answer_type_wire_name(AnswerKind kind) {
    return kind == AnswerKind::numeric ? "calculation" : std::string(to_string(kind));
}

McpServer::McpServer(McpContext context) : ctx_(std::move(context)) {
    if (!ctx_.gateway) throw validation_error("MCP server needs a gateway");
    if (ctx_.workers == 0) ctx_.workers = 1;
}

json McpServer::tool_manifest() const {
    static const json manifest = build_manifest();
    return manifest;
}

json McpServer::call_tool(const std::string& name, const json& arguments) const {
    if (!arguments.is_object()) throw InvalidParams("arguments must be an object");
    if (name == "generate_article") return generate_article(arguments);
    if (name == "generate_problems") return generate_problems(arguments);
    if (name == "solve_problems") return solve_problems(arguments);
    if (name == "list_supported_languages") return list_supported_languages(arguments);
    if (name == "execute_code") return execute_code(arguments);
    if (name == "execute_codes_parallel") return execute_codes_parallel(arguments);
    if (name == "compute_score_parallel") return compute_score_parallel(arguments);
    throw InvalidParams("unknown tool: " + name);
}

json McpServer::generate_article(const json& args) const {
    auto topic = need_string(args, "topic");
    auto language = need_string(args, "language");
    auto style_text = opt_string(args, "style_guide");
    auto model_name = opt_string(args, "model_name");
    const auto& gw = *ctx_.gateway;

    std::string backend = ctx_.backends.author;
    if (model_name && !model_name->empty()) {
        backend.clear();
        for (const auto& spec : gw.list())
            if (spec.backend_id == *model_name || spec.model_name == *model_name) {
                backend = spec.backend_id;
                break;
            }
        if (backend.empty()) throw validation_error("unknown model_name: " + *model_name);
    }
    if (backend.empty()) throw Error(ErrorCode::runtime, "no author backend configured");
    if (!ctx_.store || !ctx_.index) throw Error(ErrorCode::runtime, "no knowledge base loaded");

    plato::StyleGuide style = plato::StyleGuide::pedagogical_default();
    if (style_text && !trim(*style_text).empty()) style = {"user-supplied", {*style_text}};
    auto article = plato::generate_page_workflow(topic, *ctx_.index, *ctx_.store, style, language, gw,
                                                 {backend, ctx_.backends.expander, ctx_.backends.categorizer});
    return {{"topic", topic},
            {"style_guide", style_text && !trim(*style_text).empty() ? *style_text : style.name},
            {"language", language},
            {"model_name", article.model_name},
            {"main_content", article.render()}};
}

json McpServer::generate_problems(const json& args) const {
    auto subject = need_string(args, "subject");
    auto field = need_string(args, "field");
    const auto& count_v = arg(args, "count");
    if (!count_v.is_number_integer()) throw InvalidParams("'count' must be an integer");
    auto count = count_v.get<std::int64_t>();
    if (count < 1) throw InvalidParams("'count' must be at least 1");
    auto education_level = opt_string(args, "education_level").value_or(kDefaultEducationLevel);
    if (trim(education_level).empty()) education_level = kDefaultEducationLevel;
    if (ctx_.backends.generator.empty()) throw Error(ErrorCode::runtime, "no generator backend configured");
    const auto& gw = *ctx_.gateway;

    const auto level = level_of(education_level);
    socrates::Course course{"mcp", subject, guess_discipline(subject),
                            level == TargetLevel::graduate ? CourseLevel::graduate : CourseLevel::undergraduate};
    socrates::Topic topic{"mcp.t1", "mcp", field};
    socrates::Curriculum curriculum({course}, {topic});

    std::vector<socrates::PromptThumbnail> thumbnails;
    if (!ctx_.backends.planner.empty()) {
        thumbnails = socrates::plan_thumbnails(curriculum, topic, int(std::min<std::int64_t>(count, 4)), gw,
                                               ctx_.backends.planner);
        for (auto& t : thumbnails) t.target_level = level;
    } else {
        socrates::PromptThumbnail t;
        t.thumbnail_id = "mcp.t1/th00";
        t.topic_id = topic.topic_id;
        t.target_level = level;
        t.sketch = "Write up to " + std::to_string(count) + " distinct problems on " + field + " within " + subject +
                   " for " + education_level + " students.";
        thumbnails.push_back(std::move(t));
    }

    json out = json::array();
    for (const auto& thumb : thumbnails) {
        if (std::int64_t(out.size()) >= count) break;
        auto generated = socrates::generate_prompts(curriculum, thumb, gw, ctx_.backends.generator);
        for (const auto& p : generated.prompts) {
            if (std::int64_t(out.size()) >= count) break;
            std::string answer = p.reference_answer;
            if (answer.empty() && !p.reference_solution.empty()) {
                try {
                    answer = trim(consensus::extract_answer(p.reference_solution, p.answer_type).raw_span);
                } catch (const Error&) {
                }
            }
            out.push_back({{"task_id", std::int64_t(out.size()) + 1},
                           {"problem", p.text},
                           {"answer_type", answer_type_wire_name(p.answer_type)},
                           {"solution", p.reference_solution},
                           {"answer", answer}});
        }
    }
    return out;
}

json McpServer::solve_problems(const json& args) const {
    need_string(args, "subject");
    need_string(args, "field");
    const auto& problems = arg(args, "problems");
    if (!problems.is_array()) throw InvalidParams("'problems' must be a list");
    if (ctx_.backends.solver.empty()) throw Error(ErrorCode::runtime, "no solver backend configured");

    json out = json::array();
    for (std::size_t i = 0; i < problems.size(); ++i) out.push_back(problems[i]);
    parallel_for(problems.size(), ctx_.workers, [&](std::size_t i) {
        const auto& item = problems[i];
        json& result = out[i];
        auto fail = [&](const std::string& why) {
            if (!result.is_object()) result = json{{"item", item}};
            result["error"] = why;
        };
        if (!item.is_object()) return fail("problem must be an object");
        for (const char* key : {"task_id", "problem", "answer_type"})
            if (!item.contains(key)) return fail(std::string("missing required field '") + key + "'");
        if (!item["task_id"].is_number_integer()) return fail("'task_id' must be an integer");
        if (!item["problem"].is_string()) return fail("'problem' must be a string");
        if (!item["answer_type"].is_string()) return fail("'answer_type' must be a string");
        auto kind = parse_answer_kind(item["answer_type"].get<std::string>());
        if (!kind) return fail("unsupported answer_type '" + item["answer_type"].get<std::string>() + "'");

        socrates::PromptSpec p;
        p.prompt_id = "task-" + item["task_id"].dump();
        p.text = item["problem"].get<std::string>();
        p.answer_type = *kind;
        try {
            auto solved = consensus::solve_single(p, ctx_.backends.solver, *ctx_.gateway);
            if (solved.traces.empty())
                return fail(solved.failures.empty() ? "solver produced no answer" : solved.failures.back().message);
            result["solution"] = solved.traces.front().chain_text;
            result["answer"] = trim(solved.traces.front().raw_answer_span);
        } catch (const std::exception& e) {
            fail(e.what());
        }
    });
    return out;
}

json McpServer::list_supported_languages(const json&) const {
    return ctx_.sandbox ? json(ctx_.sandbox->languages()) : json::array();
}

json McpServer::execute_code(const json& args) const {
    auto language = need_string(args, "language");
    const auto& code = arg(args, "code");
    if (!code.is_string()) throw InvalidParams("'code' must be a string");
    double timeout = timeout_arg(args, kExecTimeout);
    if (!ctx_.sandbox) throw Error(ErrorCode::runtime, "no code runner configured");
    return ctx_.sandbox->execute(language, code.get<std::string>(), timeout);
}

json McpServer::execute_codes_parallel(const json& args) const {
    auto language = need_string(args, "language");
    auto codes = string_list(args, "code_list");
    if (codes.empty()) throw InvalidParams("'code_list' must not be empty");
    double timeout = timeout_arg(args, kExecTimeout);
    if (!ctx_.sandbox) throw Error(ErrorCode::runtime, "no code runner configured");
    return ctx_.sandbox->execute_parallel(language, codes, timeout);
}

json McpServer::compute_score_parallel(const json& args) const {
    auto data_source = need_string(args, "data_source");
    auto solutions = string_list(args, "solution_list");
    auto truths = string_list(args, "ground_truth_list");
    double timeout = timeout_arg(args, kDefaultScoreTimeout);
    json extras = nullptr;
    if (const auto& e = arg(args, "extra_info_list"); !e.is_null()) {
        if (!e.is_array()) throw InvalidParams("'extra_info_list' must be a list or null");
        extras = json::array();
        for (const auto& item : e) {
            if (item.is_null() || item.is_object()) {
                extras.push_back(item);
            } else if (item.is_string()) {
                // Hints may arrive as JSON-encoded strings.
                auto text = trim(item.get<std::string>());
                if (text.empty()) {
                    extras.push_back(nullptr);
                    continue;
                }
                auto parsed = json::parse(text, nullptr, false);
                if (parsed.is_discarded() || !(parsed.is_object() || parsed.is_null()))
                    throw InvalidParams("extra_info_list entries must be objects, JSON object strings or null");
                extras.push_back(std::move(parsed));
            } else {
                throw InvalidParams("extra_info_list entries must be objects, JSON object strings or null");
            }
        }
    }
    if (!ctx_.scorers) throw Error(ErrorCode::runtime, "no scorers configured");
    return ctx_.scorers->score_parallel(data_source, solutions, truths, extras, timeout, ctx_.workers);
}

json McpServer::handle_one(const json& message) const {
    if (!message.is_object()) return rpc_error(nullptr, kInvalidRequest, "Invalid Request");
    const bool notification = !message.contains("id");
    json id = notification ? json(nullptr) : message["id"];
    if (!(id.is_null() || id.is_string() || id.is_number_integer()))
        return rpc_error(nullptr, kInvalidRequest, "Invalid Request", "id must be a string or an integer");
    if (message.value("jsonrpc", "") != "2.0") return rpc_error(id, kInvalidRequest, "Invalid Request", "jsonrpc must be \"2.0\"");
    if (!message.contains("method") || !message["method"].is_string())
        return rpc_error(id, kInvalidRequest, "Invalid Request", "method must be a string");
    const auto method = message["method"].get<std::string>();
    const json params = message.contains("params") ? message["params"] : json::object();

    json response;
    if (method == "initialize") {
        response = rpc_result(id, {{"protocolVersion", kProtocolVersion},
                                   {"capabilities", {{"tools", {{"listChanged", false}}}}},
                                   {"serverInfo", {{"name", kServerName}, {"version", kServerVersion}}}});
    } else if (method == "notifications/initialized" || method == "notifications/cancelled") {
        response = nullptr;
    } else if (method == "ping") {
        response = rpc_result(id, json::object());
    } else if (method == "tools/list") {
        response = rpc_result(id, {{"tools", tool_manifest()}});
    } else if (method == "tools/call") {
        if (!params.is_object() || !params.contains("name") || !params["name"].is_string())
            return rpc_error(id, kInvalidParams, "Invalid params", "params.name must be a string");
        const auto name = params["name"].get<std::string>();
        const json arguments = params.contains("arguments") && !params["arguments"].is_null() ? params["arguments"]
                                                                                            : json::object();
        try {
            response = rpc_result(id, text_content(call_tool(name, arguments).dump(), false));
        } catch (const InvalidParams& e) {
            response = rpc_error(id, kInvalidParams, "Invalid params", e.what());
        } catch (const Error& e) {
            response = rpc_result(id, text_content(error_envelope(e.code(), e.what(), e.detail()).dump(), true));
        } catch (const std::exception& e) {
            response = rpc_result(id, text_content(error_envelope(ErrorCode::runtime, e.what(), "").dump(), true));
        }
    } else {
        response = rpc_error(id, kMethodNotFound, "Method not found", method);
    }
    return notification ? json(nullptr) : response;
}

std::optional<json> McpServer::handle(const json& message) const {
    if (message.is_array()) {
        if (message.empty()) return rpc_error(nullptr, kInvalidRequest, "Invalid Request", "empty batch");
        json out = json::array();
        for (const auto& m : message)
            if (auto r = handle_one(m); !r.is_null()) out.push_back(std::move(r));
        if (out.empty()) return std::nullopt;
        return out;
    }
    auto r = handle_one(message);
    if (r.is_null()) return std::nullopt;
    return r;
}

std::string McpServer::handle_text(std::string_view body) const {
    auto message = json::parse(body, nullptr, false);
    if (message.is_discarded()) return rpc_error(nullptr, kParseError, "Parse error").dump();
    auto r = handle(message);
    return r ? r->dump() : std::string{};
}

void McpServer::serve_stdio(std::istream& in, std::ostream& out) const {
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto reply = handle_text(line);
        if (!reply.empty()) out << reply << '\n' << std::flush;
    }
}

} // namespace lcot::mcp
