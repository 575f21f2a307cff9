#include <httplib.h>

#include <cstdlib>

#include <fmt/format.h>

#include "binsum/common/text.hpp"
#include "binsum/llm/gateway.hpp"

namespace binsum::llm {

EndpointConfig EndpointConfig::from_env() {
    EndpointConfig c;
    const char* base = std::getenv("BINSUM_API_BASE");
    if (!base || !*base) throw ConfigError("BINSUM_API_BASE is not set");
    c.base_url = base;
    if (const char* key = std::getenv("BINSUM_API_KEY")) c.api_key = key;
    return c;
}

HttpTransport::HttpTransport(EndpointConfig config) : config_(std::move(config)) {
    auto url = config_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError(fmt::format("endpoint '{}' lacks a scheme (http:// or https://)", url));
    auto scheme = to_lower(url.substr(0, scheme_end));
    if (scheme != "http" && scheme != "https") throw ConfigError(fmt::format("unsupported scheme '{}'", scheme));
    auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

HttpResponse HttpTransport::post_json(const std::string& path, const std::string& body,
                                      const std::map<std::string, std::string>& headers) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path_prefix_ + path, h, body, "application/json");
    if (!res) throw TransportError(fmt::format("POST {}{}: {}", config_.base_url, path, httplib::to_string(res.error())));
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers[to_lower(k)] = v;
    return out;
}

}  // namespace binsum::llm
