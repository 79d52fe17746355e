#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mmagent {

// Which retrieval endpoint a query targets.
enum class SearchKind { text, image, visual };

const char* search_kind_name(SearchKind k);

struct SearchHit {
    std::string title;
    std::string link;                      // hosting page / result link
    std::optional<std::string> snippet;
    std::optional<std::string> image_url;  // image and visual search
    std::optional<std::string> source_url; // page hosting the image
};

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    // For SearchKind::visual the "query" is the image UID or URL.
    virtual std::vector<SearchHit> search(SearchKind kind, const std::string& query) = 0;
};

// Serper-style HTTP client: POST {base}/search, {base}/images, {base}/lens
// with an X-API-KEY header. Base URL from SEARCH_API_URL, key from
// SEARCH_API_KEY.
class HttpSearchBackend : public SearchBackend {
public:
    HttpSearchBackend(std::string base_url, std::string api_key)
        : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}
    std::vector<SearchHit> search(SearchKind kind, const std::string& query) override;

private:
    std::string base_url_;
    std::string api_key_;
};

// Deterministic replay backend reading
// <dir>/<tool>/<query_hash>.json — tool ∈ {google_search, image_search,
// visual_search}, query_hash = 16-hex prefix hash of the whitespace-collapsed
// query. A missing fixture is an empty result set, not an error.
class FixtureSearchBackend : public SearchBackend {
public:
    explicit FixtureSearchBackend(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::vector<SearchHit> search(SearchKind kind, const std::string& query) override;

private:
    std::filesystem::path dir_;
};

} // namespace mmagent
