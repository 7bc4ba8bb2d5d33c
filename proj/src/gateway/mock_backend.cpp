#include "lcot/gateway/mock_backend.hpp"

#include <chrono>

#include "lcot/common/hash.hpp"
#include "lcot/common/text.hpp"

namespace lcot::gateway {
namespace {

MockFailure parse_failure(const std::string& s) {
    if (s.empty() || s == "none") return MockFailure::none;
    if (s == "timeout") return MockFailure::timeout;
    if (s == "transport") return MockFailure::transport;
    if (s == "rejected") return MockFailure::rejected;
    throw validation_error("unknown mock failure kind: " + s);
}

const char* failure_name(MockFailure f) {
    switch (f) {
    case MockFailure::none: return "none";
    case MockFailure::timeout: return "timeout";
    case MockFailure::transport: return "transport";
    case MockFailure::rejected: return "rejected";
    }
    return "none";
}

std::string field_value(const std::string& prompt, const std::string& name) {
    const std::string key = name + ":";
    for (const auto& line : split_lines(prompt))
        if (line.rfind(key, 0) == 0) return trim(std::string_view(line).substr(key.size()));
    return {};
}

std::string lines_with_prefix(const std::string& prompt, const std::string& prefix) {
    std::string out;
    for (const auto& line : split_lines(prompt)) {
        if (line.rfind(prefix, 0) != 0) continue;
        if (!out.empty()) out += '\n';
        out += line;
    }
    return out;
}

std::string json_escape(const std::string& s) {
    auto quoted = nlohmann::json(s).dump();
    return quoted.substr(1, quoted.size() - 2);
}

std::uint64_t modulus(const std::string& arg) {
    try {
        auto n = std::stoull(arg);
        return n == 0 ? 1 : n;
    } catch (...) {
        return 1;
    }
}

} // namespace

void from_json(const nlohmann::json& j, MockRule& r) {
    r.pattern = j.value("pattern", std::string{});
    r.response = j.value("response", std::string{});
    r.fail = parse_failure(j.value("fail", std::string{}));
}

void to_json(nlohmann::json& j, const MockRule& r) {
    j = {{"pattern", r.pattern}, {"response", r.response}};
    if (r.fail != MockFailure::none) j["fail"] = failure_name(r.fail);
}

void from_json(const nlohmann::json& j, MockScript& s) {
    s.seed = j.value("seed", std::int64_t{0});
    s.rules = j.value("rules", std::vector<MockRule>{});
    s.default_response = j.value("default_response", std::string{});
}

void to_json(nlohmann::json& j, const MockScript& s) {
    j = {{"seed", s.seed}, {"rules", s.rules}, {"default_response", s.default_response}};
}

std::string render_mock_template(const std::string& tmpl, const ChatRequest& request, std::int64_t seed) {
    std::string out;
    out.reserve(tmpl.size());
    std::uint64_t ordinal = 0;
    for (std::size_t i = 0; i < tmpl.size();) {
        if (tmpl.compare(i, 2, "{{") == 0) { out += '{'; i += 2; continue; }
        if (tmpl.compare(i, 2, "}}") == 0) { out += '}'; i += 2; continue; }
        if (tmpl[i] != '{') { out += tmpl[i++]; continue; }
        auto close = tmpl.find('}', i);
        if (close == std::string::npos) { out += tmpl.substr(i); break; }
        const std::string slot = tmpl.substr(i + 1, close - i - 1);
        const auto colon = slot.find(':');
        const std::string name = slot.substr(0, colon);
        const std::string arg = colon == std::string::npos ? std::string{} : slot.substr(colon + 1);
        if (slot == "prompt") out += request.user_prompt;
        else if (slot == "system") out += request.system_prompt;
        else if (slot == "seed") out += std::to_string(seed);
        else if (name == "field") out += field_value(request.user_prompt, arg);
        else if (name == "json") out += json_escape(field_value(request.user_prompt, arg));
        else if (name == "lines") out += lines_with_prefix(request.user_prompt, arg);
        else if (name == "hash") out += std::to_string(fnv1a64(request.user_prompt) % modulus(arg));
        else if (name == "rand") {
            auto h = fnv1a64(request.user_prompt, fnv1a64(request.system_prompt, mix64(static_cast<std::uint64_t>(seed))));
            out += std::to_string(mix64(h + ordinal++) % modulus(arg));
        } else {
            // Not a slot (e.g. a JSON object brace): emit it and rescan the rest.
            out += tmpl[i++];
            continue;
        }
        i = close + 1;
    }
    return out;
}

MockBackend::MockBackend(BackendSpec spec, MockScript script) : spec_(std::move(spec)), script_(std::move(script)) {}

ChatResponse MockBackend::complete(const ChatRequest& request) {
    auto start = std::chrono::steady_clock::now();
    const std::int64_t seed = request.seed ? static_cast<std::int64_t>(mix64(static_cast<std::uint64_t>(script_.seed) ^
                                                                             static_cast<std::uint64_t>(*request.seed)) >> 1)
                                           : script_.seed;
    const MockRule* hit = nullptr;
    for (const auto& rule : script_.rules)
        if (request.user_prompt.find(rule.pattern) != std::string::npos) { hit = &rule; break; }

    if (hit) {
        switch (hit->fail) {
        case MockFailure::timeout: throw BackendError(FailureKind::timeout, spec_.backend_id, "mock timeout");
        case MockFailure::transport: throw BackendError(FailureKind::transport, spec_.backend_id, "mock transport failure");
        case MockFailure::rejected: throw BackendError(FailureKind::rejected, spec_.backend_id, "mock rejected request");
        case MockFailure::none: break;
        }
    }
    ChatResponse r;
    r.text = render_mock_template(hit ? hit->response : script_.default_response, request, seed);
    r.backend_id = spec_.backend_id;
    r.token_count = static_cast<std::int64_t>(tokenize(r.text).size());
    r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return r;
}

BackendSpec mock_backend(const MockScript&, std::string backend_id, std::string provider_name) {
    BackendSpec spec;
    spec.endpoint = "mock://" + backend_id;
    spec.model_name = "mock-" + backend_id;
    spec.backend_id = std::move(backend_id);
    spec.provider_name = std::move(provider_name);
    spec.max_concurrency = 4;
    spec.timeout_s = 30.0;
    return spec;
}

std::unique_ptr<Backend> make_mock(std::string backend_id, MockScript script, std::string provider_name,
                                   int max_concurrency) {
    auto spec = mock_backend(script, std::move(backend_id), std::move(provider_name));
    spec.max_concurrency = max_concurrency;
    return std::make_unique<MockBackend>(std::move(spec), std::move(script));
}

} // namespace lcot::gateway
