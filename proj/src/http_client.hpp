#pragma once

#include <chrono>
#include <map>
#include <json.hpp>
#include <string>

namespace toolret::detail {

struct HttpOptions {
    std::chrono::milliseconds timeout{30000};
    int attempts = 3;
    std::chrono::milliseconds backoff{250};  // doubled after each failed attempt
};

// POSTs a JSON body and parses a JSON reply. Retries transport errors and 5xx/429
// responses; other statuses fail immediately. Throws ProviderError.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers, const HttpOptions& opts);

// Reads a bearer token from the named environment variable; empty if unset.
std::string token_from_env(const std::string& variable);

}  // namespace toolret::detail
