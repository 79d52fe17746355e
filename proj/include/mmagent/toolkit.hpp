#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmagent/asset_store.hpp"
#include "mmagent/document.hpp"
#include "mmagent/fetchers.hpp"
#include "mmagent/search.hpp"

namespace mmagent {

struct ToolCall {
    std::string name;
    nlohmann::json arguments; // object; may arrive double-encoded as a string
};

// What a tool hands back to the loop. Failures are data (is_error=true), so
// the loop always continues; materialized_images lists assets whose pixels
// must enter the model context alongside this text.
struct ToolResult {
    std::string text;
    std::vector<std::string> materialized_images;
    bool is_error = false;
    std::string tool_name;
    int turn_index = 0;
};

// Maximum number of assets any single built-in tool materializes. Relevant to
// eviction accounting: post-eviction image count ≤ keep_recent_k × this.
inline constexpr int kMaxImagesPerResult = 1;

// The agent's tool surface. Search and scrape results are text-only; pixels
// enter context exclusively through fetch_image and zoom_in (on-demand
// loading). All failures come back as is_error results.
class Toolkit {
public:
    Toolkit(AssetStore& store, SearchBackend& search, PageFetcher& pages,
            ImageFetcher& images, SummarizerClient& summarizer, int top_k = 10)
        : store_(store), search_(search), pages_(pages), images_(images),
          summarizer_(summarizer), top_k_(top_k) {}

    ToolResult google_search(const std::string& q);
    ToolResult image_search(const std::string& q);
    ToolResult visual_search(const std::string& image);
    ToolResult scrape_website(const std::string& url, const std::string& info_to_extract);
    ToolResult fetch_image(const std::string& uid_or_url);
    ToolResult zoom_in(const std::string& uid, int x, int y, int w, int h);

    // Routes a wire-format call to the tool it names. Unknown names, missing
    // arguments, and type mismatches become is_error results.
    ToolResult dispatch(const ToolCall& call, int turn_index);

    // Function definitions (chat-completions "tools" array) for the six
    // tools, under their wire names.
    static nlohmann::json tool_schemas();

    AssetStore& store() { return store_; }

private:
    AssetStore& store_;
    SearchBackend& search_;
    PageFetcher& pages_;
    ImageFetcher& images_;
    SummarizerClient& summarizer_;
    int top_k_;
};

// Maps wire or canonical tool names ("tool-google-search-google_search",
// "google_search", ...) onto the canonical identifier; empty if unknown.
std::string canonical_tool_name(const std::string& wire_name);

} // namespace mmagent
