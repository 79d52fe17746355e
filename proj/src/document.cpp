#include "mmagent/document.hpp"

#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mmagent/errors.hpp"
#include "mmagent/fetchers.hpp"
#include "mmagent/http_util.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

Segment Segment::make_text(std::string t) {
    Segment s;
    s.kind = Kind::text;
    s.text = std::move(t);
    return s;
}

Segment Segment::make_image(std::string url, std::optional<std::string> caption,
                            std::vector<uint8_t> bytes) {
    Segment s;
    s.kind = Kind::image;
    s.image_url = std::move(url);
    s.caption = std::move(caption);
    s.image_bytes = std::move(bytes);
    return s;
}

std::string FallbackSummarizer::summarize(const std::string& page_text,
                                          const std::optional<std::string>& focus_query) {
    (void)focus_query; // the offline summarizer cannot condition on it
    std::string flat = collapse_ws(page_text);
    std::vector<std::string> sentences;
    std::string cur;
    for (size_t i = 0; i < flat.size(); ++i) {
        cur += flat[i];
        char c = flat[i];
        bool boundary = (c == '.' || c == '!' || c == '?') &&
                        (i + 1 == flat.size() || flat[i + 1] == ' ');
        if (boundary) {
            std::string t = trim(cur);
            if (!t.empty()) sentences.push_back(t);
            cur.clear();
            if (sentences.size() == max_sentences_) break;
        }
    }
    if (sentences.size() < max_sentences_) {
        std::string t = trim(cur);
        if (!t.empty()) sentences.push_back(t);
    }
    std::string out;
    for (const auto& s : sentences) {
        if (!out.empty()) out += "\n";
        out += "- " + s;
    }
    return out;
}

HttpSummarizer::HttpSummarizer(std::string endpoint, std::string api_key, std::string model)
    : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), model_(std::move(model)) {}

std::string HttpSummarizer::summarize(const std::string& page_text,
                                      const std::optional<std::string>& focus_query) {
    std::string instruction =
        "Summarize the following webpage text as concise bullet points (one per line, "
        "each starting with '- ').";
    if (focus_query)
        instruction += " Pay particular attention to information relevant to: " + *focus_query;
    json body{{"messages",
               json::array({json{{"role", "system"}, {"content", instruction}},
                            json{{"role", "user"}, {"content", page_text}}})}};
    if (!model_.empty()) body["model"] = model_;
    std::map<std::string, std::string> headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
    std::string resp = http_post_json(endpoint_, body.dump(), headers);
    json j = json::parse(resp);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

SerializedDocument intercept(const InterleavedDocument& doc, AssetStore& store,
                             ImageFetcher& image_fetcher, SummarizerClient& summarizer,
                             const std::optional<std::string>& focus_query) {
    SerializedDocument out;
    out.source_url = doc.source_url;

    std::string prose;
    for (const auto& seg : doc.segments) {
        if (seg.kind == Segment::Kind::text) {
            if (!prose.empty()) prose += "\n";
            prose += seg.text;
            continue;
        }
        try {
            std::vector<uint8_t> bytes =
                seg.image_bytes.empty() ? image_fetcher.fetch(seg.image_url) : seg.image_bytes;
            std::string uid = store.register_asset(bytes, seg.image_url, seg.caption);
            out.images.push_back({uid, seg.caption});
        } catch (const std::exception& e) {
            // A dead image link must not sink the page; keep the URL visible.
            out.failed_images.push_back({seg.image_url, e.what()});
        }
    }

    try {
        out.summary_text = summarizer.summarize(prose, focus_query);
    } catch (const std::exception& e) {
        throw Error(Errc::summarizer_unavailable,
                    fmt::format("summarizer failed for '{}': {}", doc.source_url, e.what()));
    }
    return out;
}

std::string render(const SerializedDocument& doc) {
    std::string out = doc.summary_text;
    if (doc.images.empty() && doc.failed_images.empty()) return out;
    out += "\n\n### Images:\n";
    // Successful registrations first, in source order, then failures — every
    // input image accounted for exactly once.
    for (const auto& img : doc.images) {
        out += fmt::format("- **Image URL**: {}\n", img.uid);
        out += fmt::format("  - **Caption**: {}\n", img.caption ? *img.caption : "(none)");
    }
    for (const auto& fi : doc.failed_images) {
        out += fmt::format("- **Image URL**: {}\n", fi.url);
        out += fmt::format("  - **Caption**: (fetch failed: {})\n", fi.reason);
    }
    return out;
}

} // namespace mmagent
