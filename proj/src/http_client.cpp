#include "http_client.hpp"

#include <cstdlib>
#include <httplib.h>
#include <thread>

#include "toolret/util.hpp"

namespace toolret::detail {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ProviderError("endpoint URL lacks a scheme: " + url);
    if (url.compare(0, scheme_end, "http") != 0)
        throw ProviderError("only plain http endpoints are supported: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers, const HttpOptions& opts) {
    const auto target = split_url(url);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    const std::string payload = body.dump();

    std::string last_error;
    auto backoff = opts.backoff;
    for (int attempt = 1; attempt <= std::max(1, opts.attempts); ++attempt) {
        httplib::Client client(target.origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        auto res = client.Post(target.path, hdrs, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw ProviderError(std::string("endpoint returned malformed JSON: ") + e.what());
            }
        } else if (!retryable(res->status)) {
            throw ProviderError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
        } else {
            last_error = "HTTP " + std::to_string(res->status);
        }
        if (attempt < opts.attempts) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
    throw ProviderError("request to " + url + " failed after " + std::to_string(opts.attempts) +
                        " attempts: " + last_error);
}

std::string token_from_env(const std::string& variable) {
    if (variable.empty()) return {};
    const char* value = std::getenv(variable.c_str());
    return value ? std::string(value) : std::string();
}

}  // namespace toolret::detail
