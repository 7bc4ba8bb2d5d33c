#include "lcot/gateway/gateway.hpp"

#include <thread>

namespace lcot::gateway {

void BackendSpec::validate() const {
    if (backend_id.empty()) throw validation_error("backend_id must not be empty");
    if (max_concurrency < 1) throw validation_error("max_concurrency must be >= 1 for " + backend_id);
    if (!(timeout_s > 0)) throw validation_error("timeout_s must be > 0 for " + backend_id);
}

ChatResponse CallbackBackend::complete(const ChatRequest& request) {
    auto start = std::chrono::steady_clock::now();
    ChatResponse r;
    r.text = fn_(request);
    r.backend_id = spec_.backend_id;
    r.token_count = static_cast<std::int64_t>(r.text.size() / 4);
    r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return r;
}

Gateway::Gateway()
    : sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}
Gateway::Gateway(Gateway&&) noexcept = default;
Gateway& Gateway::operator=(Gateway&&) noexcept = default;
Gateway::~Gateway() = default;

std::string Gateway::register_backend(std::unique_ptr<Backend> backend) {
    if (!backend) throw validation_error("null backend");
    const auto& spec = backend->spec();
    spec.validate();
    if (backends_.contains(spec.backend_id))
        throw validation_error("backend already registered: " + spec.backend_id);
    std::string id = spec.backend_id;
    auto slots = std::make_unique<std::counting_semaphore<>>(spec.max_concurrency);
    backends_.emplace(id, Entry{std::move(backend), std::move(slots)});
    return id;
}

const Gateway::Entry& Gateway::entry(std::string_view backend_id) const {
    auto it = backends_.find(backend_id);
    if (it == backends_.end())
        throw BackendError(FailureKind::unknown_backend, std::string(backend_id),
                           "unknown backend: " + std::string(backend_id));
    return it->second;
}

bool Gateway::contains(std::string_view backend_id) const { return backends_.find(backend_id) != backends_.end(); }

const BackendSpec& Gateway::spec(std::string_view backend_id) const { return entry(backend_id).backend->spec(); }

std::vector<BackendSpec> Gateway::list() const {
    std::vector<BackendSpec> out;
    for (const auto& [id, e] : backends_) out.push_back(e.backend->spec());
    return out;
}

ChatResponse Gateway::complete(std::string_view backend_id, const ChatRequest& request) const {
    if (request.user_prompt.empty()) throw validation_error("user_prompt must not be empty");
    if (request.temperature < 0.0 || request.temperature > 2.0) throw validation_error("temperature out of [0,2]");
    if (request.max_tokens < 1) throw validation_error("max_tokens must be positive");
    const Entry& e = entry(backend_id);
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            e.slots->acquire();
            struct Release {
                std::counting_semaphore<>* s;
                ~Release() { s->release(); }
            } release{e.slots.get()};
            return e.backend->complete(request);
        } catch (const BackendError& err) {
            if (!err.retriable() || attempt >= retry_.max_attempts) throw;
        }
        sleeper_(backoff);
        backoff = std::chrono::milliseconds(static_cast<long long>(backoff.count() * retry_.multiplier));
    }
}

} // namespace lcot::gateway
