#include "chunkrag/http.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "chunkrag/errors.hpp"

namespace chunkrag::http {

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
    const double raw = static_cast<double>(policy.initial_backoff.count()) * std::pow(policy.backoff_factor, attempt);
    const double capped = std::min(raw, static_cast<double>(policy.max_backoff.count()));
    return std::chrono::milliseconds(static_cast<long long>(capped));
}

Url parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint URL '" + url + "' has no scheme");
    }
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw ConfigError("endpoint URL '" + url + "' must use http or https");
    }
    const auto host_begin = scheme_end + 3;
    const auto path_begin = url.find('/', host_begin);
    Url out;
    if (path_begin == std::string::npos) {
        out.scheme_host_port = url;
        out.path = "/";
    } else {
        out.scheme_host_port = url.substr(0, path_begin);
        out.path = url.substr(path_begin);
    }
    if (out.scheme_host_port.size() == host_begin) {
        throw ConfigError("endpoint URL '" + url + "' has no host");
    }
    return out;
}

std::string api_key_from_env(const std::string& env_var) {
    if (env_var.empty()) {
        return {};
    }
    const char* value = std::getenv(env_var.c_str());
    return value == nullptr ? std::string{} : std::string{value};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const std::string& bearer_token,
                         const RetryPolicy& policy) {
    const auto target = parse_url(url);
    httplib::Client client(target.scheme_host_port);
    const auto secs = static_cast<time_t>(policy.timeout_seconds);
    const auto usecs = static_cast<time_t>((policy.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + bearer_token);
    }
    const auto payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff_delay(policy, attempt - 1));
        }
        auto res = client.Post(target.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        const int status = res->status;
        if (status == 401 || status == 403) {
            throw AuthError(url + ": authentication failed (HTTP " + std::to_string(status) + ")");
        }
        if (status == 429 || status >= 500) {
            last_error = "HTTP " + std::to_string(status);
            continue;
        }
        if (status < 200 || status >= 300) {
            throw BackendError(url + ": HTTP " + std::to_string(status) + ": " + res->body);
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw BackendError(url + ": response is not valid JSON: " + e.what());
        }
    }
    throw BackendError(url + ": giving up after " + std::to_string(policy.max_retries + 1) +
                       " attempts (" + last_error + ")");
}

RequestGate::RequestGate(std::size_t max_in_flight, std::size_t per_minute)
    : max_in_flight_(std::max<std::size_t>(max_in_flight, 1)), per_minute_(per_minute) {}

RequestGate::Permit RequestGate::acquire() {
    using clock = std::chrono::steady_clock;
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = clock::now();
        while (!recent_.empty() && now - recent_.front() >= std::chrono::minutes(1)) {
            recent_.pop_front();
        }
        const bool slot_free = in_flight_ < max_in_flight_;
        const bool budget_free = per_minute_ == 0 || recent_.size() < per_minute_;
        if (slot_free && budget_free) {
            break;
        }
        if (!budget_free) {
            cv_.wait_until(lock, recent_.front() + std::chrono::minutes(1));
        } else {
            cv_.wait(lock);
        }
    }
    ++in_flight_;
    if (per_minute_ != 0) {
        recent_.push_back(clock::now());
    }
    return Permit(this);
}

void RequestGate::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

}  // namespace chunkrag::http
