#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmagent/asset_store.hpp"

namespace mmagent {

class ImageFetcher;

// One slice of a fetched page: either prose or an image reference. Exactly
// the fields for its kind are populated.
struct Segment {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    std::string text;                     // kind == text
    std::string image_url;                // kind == image
    std::vector<uint8_t> image_bytes;     // optional pre-downloaded payload
    std::optional<std::string> caption;   // text adjacent to the image

    static Segment make_text(std::string t);
    static Segment make_image(std::string url, std::optional<std::string> caption = std::nullopt,
                              std::vector<uint8_t> bytes = {});
};

// Raw interleaved page content, segment order as it appeared in the source.
struct InterleavedDocument {
    std::string source_url;
    std::vector<Segment> segments;
};

struct SerializedImageEntry {
    std::string uid;
    std::optional<std::string> caption;
};

struct FailedImageEntry {
    std::string url;
    std::string reason;
};

// The lightweight page representation handed to the agent: prose summary plus
// image references by UID, never pixel data.
struct SerializedDocument {
    std::string source_url;
    std::string summary_text;
    std::vector<SerializedImageEntry> images;  // source order
    std::vector<FailedImageEntry> failed_images;
};

// Produces the textual summary for a serialized page. Pluggable so tests and
// replay runs stay offline.
class SummarizerClient {
public:
    virtual ~SummarizerClient() = default;
    virtual std::string summarize(const std::string& page_text,
                                  const std::optional<std::string>& focus_query) = 0;
};

// Deterministic offline summarizer: first `max_sentences` sentences of the
// page, one bullet each.
class FallbackSummarizer : public SummarizerClient {
public:
    explicit FallbackSummarizer(size_t max_sentences = 10) : max_sentences_(max_sentences) {}
    std::string summarize(const std::string& page_text,
                          const std::optional<std::string>& focus_query) override;

private:
    size_t max_sentences_;
};

// Chat-completion-backed summarizer (endpoint from SUMMARIZER_API_URL).
class HttpSummarizer : public SummarizerClient {
public:
    HttpSummarizer(std::string endpoint, std::string api_key, std::string model = "");
    std::string summarize(const std::string& page_text,
                          const std::optional<std::string>& focus_query) override;

private:
    std::string endpoint_;
    std::string api_key_;
    std::string model_;
};

// The intercepting step: registers every page image into the store, replaces
// each with its UID, and summarizes the prose. Per-image download failures
// never abort — the image is listed by URL with a fetch-failed annotation.
// Throws Error(Errc::summarizer_unavailable) if the summarizer call fails.
SerializedDocument intercept(const InterleavedDocument& doc, AssetStore& store,
                             ImageFetcher& image_fetcher, SummarizerClient& summarizer,
                             const std::optional<std::string>& focus_query = std::nullopt);

// Deterministic rendering: summary first, then an "### Images:" block with
// one "- **Image URL**:" / "  - **Caption**:" pair per image. Pages without
// any image segment render as the bare summary.
std::string render(const SerializedDocument& doc);

} // namespace mmagent
