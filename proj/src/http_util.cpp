#include "http_util.hpp"

#include <httplib.h>

#include "ghar/error.hpp"

namespace ghar::detail {

Url split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfig, "endpoint URL '" + url + "' lacks a scheme");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::string& api_key, int timeout_seconds) {
  auto [base, path] = split_url(url);
  httplib::Client client(base);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  client.set_write_timeout(timeout_seconds, 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kProvider,
                "POST " + url + " failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status >= 500) {
    throw Error(ErrorCode::kProvider,
                "POST " + url + " returned HTTP " + std::to_string(res->status), true);
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::kProvider,
                "POST " + url + " returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProvider, "POST " + url + " returned invalid JSON: " + e.what());
  }
}

}  // namespace ghar::detail
