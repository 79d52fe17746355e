#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mmagent {

// "https://host:port/a/b?q=1" -> {"https://host:port", "/a/b?q=1"}
struct SplitUrl {
    std::string origin;
    std::string path; // always begins with '/'
};

SplitUrl split_url(const std::string& url);

// POST a JSON body, expect a JSON response. Throws Error(Errc::fetch_failed)
// on transport failure or non-2xx status.
std::string http_post_json(const std::string& url, const std::string& body,
                           const std::map<std::string, std::string>& headers);

// GET raw bytes. Non-2xx statuses throw Error(Errc::fetch_failed) with a
// message embedding the status line, e.g. "Client error '403 Forbidden'".
std::vector<uint8_t> http_get_bytes(const std::string& url,
                                    const std::map<std::string, std::string>& headers = {});

// "403" -> "403 Forbidden" etc.; unknown codes render as the bare number.
std::string http_status_phrase(int status);

} // namespace mmagent
