#pragma once

// Thin wrapper over cpp-httplib for the JSON POST calls made by the HTTP
// providers.

#include <string>

#include <json.hpp>

namespace ghar::detail {

struct Url {
  std::string scheme_host_port;  // "http://host:port"
  std::string path;              // "/v1/..."
};

Url split_url(const std::string& url);

// Throws Error(kProvider, retryable=true) on transport failure or 5xx,
// Error(kProvider) on other non-2xx replies or invalid JSON.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::string& api_key, int timeout_seconds);

}  // namespace ghar::detail
