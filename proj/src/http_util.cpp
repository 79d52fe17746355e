#include "mmagent/http_util.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include "mmagent/errors.hpp"

namespace mmagent {

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(Errc::invalid_argument, "not an absolute URL: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string http_status_phrase(int status) {
    switch (status) {
        case 200: return "200 OK";
        case 301: return "301 Moved Permanently";
        case 302: return "302 Found";
        case 400: return "400 Bad Request";
        case 401: return "401 Unauthorized";
        case 403: return "403 Forbidden";
        case 404: return "404 Not Found";
        case 429: return "429 Too Many Requests";
        case 500: return "500 Internal Server Error";
        case 502: return "502 Bad Gateway";
        case 503: return "503 Service Unavailable";
        default: return std::to_string(status);
    }
}

static std::string status_error_message(int status, const std::string& url) {
    const char* kind = status >= 500 ? "Server error" : "Client error";
    return fmt::format("{} '{}' for url '{}'", kind, http_status_phrase(status), url);
}

std::string http_post_json(const std::string& url, const std::string& body,
                           const std::map<std::string, std::string>& headers) {
    auto parts = split_url(url);
    httplib::Client cli(parts.origin);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(120);
    cli.enable_server_certificate_verification(false);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = cli.Post(parts.path, h, body, "application/json");
    if (!res)
        throw Error(Errc::fetch_failed,
                    fmt::format("request to '{}' failed: {}", url, httplib::to_string(res.error())));
    if (res->status < 200 || res->status >= 300)
        throw Error(Errc::fetch_failed, status_error_message(res->status, url));
    return res->body;
}

std::vector<uint8_t> http_get_bytes(const std::string& url,
                                    const std::map<std::string, std::string>& headers) {
    auto parts = split_url(url);
    httplib::Client cli(parts.origin);
    cli.set_connection_timeout(10);
    cli.set_read_timeout(60);
    cli.set_follow_location(true);
    cli.enable_server_certificate_verification(false);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = cli.Get(parts.path, h);
    if (!res)
        throw Error(Errc::fetch_failed,
                    fmt::format("request to '{}' failed: {}", url, httplib::to_string(res.error())));
    if (res->status < 200 || res->status >= 300)
        throw Error(Errc::fetch_failed, status_error_message(res->status, url));
    return std::vector<uint8_t>(res->body.begin(), res->body.end());
}

} // namespace mmagent
