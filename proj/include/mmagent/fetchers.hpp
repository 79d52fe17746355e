#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmagent/document.hpp"

namespace mmagent {

// Retrieves a page as interleaved text/image segments. Throws
// Error(Errc::fetch_failed) with a message embedding the HTTP status phrase
// ("Client error '403 Forbidden' for url '...'") on failure.
class PageFetcher {
public:
    virtual ~PageFetcher() = default;
    virtual InterleavedDocument fetch(const std::string& url) = 0;
};

// Retrieves raw image bytes. Same failure contract as PageFetcher.
class ImageFetcher {
public:
    virtual ~ImageFetcher() = default;
    virtual std::vector<uint8_t> fetch(const std::string& url) = 0;
};

// Live page fetcher: plain GET plus a small tag scanner that extracts body
// text and <img> elements (alt text / <figcaption> as captions). Not a
// browser; scripts and styling are ignored.
class LivePageFetcher : public PageFetcher {
public:
    InterleavedDocument fetch(const std::string& url) override;
};

class LiveImageFetcher : public ImageFetcher {
public:
    std::vector<uint8_t> fetch(const std::string& url) override;
};

// Replay page fetcher: reads <dir>/<url_hash>.json where url_hash is the
// 16-hex prefix hash of the URL. Records are either
//   {"source_url": ..., "segments": [{"kind":"text","text":...} |
//    {"kind":"image","image_url":..., "caption":...}]}
// or {"status": 403} to script a transport failure.
class FixturePageFetcher : public PageFetcher {
public:
    explicit FixturePageFetcher(std::filesystem::path dir) : dir_(std::move(dir)) {}
    InterleavedDocument fetch(const std::string& url) override;

private:
    std::filesystem::path dir_;
};

// Replay image fetcher: <dir>/<url_hash>.bin holds raw bytes; a
// <url_hash>.json {"status": N} scripts a failure; anything else is a 404.
class FixtureImageFetcher : public ImageFetcher {
public:
    explicit FixtureImageFetcher(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::vector<uint8_t> fetch(const std::string& url) override;

private:
    std::filesystem::path dir_;
};

// Parses fixture segment JSON (shared with tests and fixture authoring).
InterleavedDocument parse_page_record(const std::string& json_text);

// Minimal HTML → interleaved extraction used by the live fetcher; exposed for
// direct testing.
InterleavedDocument extract_page(const std::string& url, const std::string& html);

} // namespace mmagent
