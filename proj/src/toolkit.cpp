#include "mmagent/toolkit.hpp"

#include <fmt/format.h>

#include "mmagent/errors.hpp"
#include "mmagent/image.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

namespace {

ToolResult ok(std::string text, std::vector<std::string> images = {}) {
    ToolResult r;
    r.text = std::move(text);
    r.materialized_images = std::move(images);
    return r;
}

ToolResult err(std::string text) {
    ToolResult r;
    r.text = std::move(text);
    r.is_error = true;
    return r;
}

std::string hit_source(const SearchHit& h) {
    if (h.source_url) return *h.source_url;
    if (!h.link.empty()) return h.link;
    return "(unknown)";
}

} // namespace

std::string canonical_tool_name(const std::string& wire_name) {
    static const std::pair<const char*, const char*> table[] = {
        {"tool-google-search-google_search", "google_search"},
        {"google_search", "google_search"},
        {"tool-google-search-image_search", "image_search"},
        {"image_search", "image_search"},
        {"tool-google-search-visual_search", "visual_search"},
        {"visual_search", "visual_search"},
        {"jina_scrape_llm_summary-scrape_and_extract_info", "scrape_website"},
        {"scrape_and_extract_info", "scrape_website"},
        {"scrape_website", "scrape_website"},
        {"tool-fetch-image-fetch_image", "fetch_image"},
        {"fetch_image", "fetch_image"},
        {"tool-image-processing-zoom_in", "zoom_in"},
        {"zoom_in", "zoom_in"},
    };
    for (auto& [wire, canon] : table)
        if (wire_name == wire) return canon;
    return "";
}

ToolResult Toolkit::google_search(const std::string& q) {
    if (trim(q).empty()) return err("empty query");
    std::vector<SearchHit> hits;
    try {
        hits = search_.search(SearchKind::text, q);
    } catch (const std::exception& e) {
        return err(e.what());
    }
    if (hits.empty()) return ok("0 results");
    std::string out;
    int n = 0;
    for (const auto& h : hits) {
        if (n == top_k_) break;
        if (!out.empty()) out += "\n";
        out += fmt::format("{}. \"title\": \"{}\", \"link\": \"{}\"", ++n, h.title, h.link);
        if (h.snippet) out += fmt::format(", \"snippet\": \"{}\"", *h.snippet);
    }
    return ok(out);
}

static ToolResult render_image_hits(const std::vector<SearchHit>& hits, AssetStore& store,
                                    int top_k) {
    if (hits.empty()) return ok("0 results");
    std::string out;
    int n = 0;
    for (const auto& h : hits) {
        if (n == top_k) break;
        if (!h.image_url) continue;
        // URL-only registration: the image becomes addressable now, its
        // bytes are pulled only if the agent later fetches it.
        store.note_remote(*h.image_url, h.title);
        if (!out.empty()) out += "\n";
        out += fmt::format("{}. | Title: {} | Image URL: {} | Source: {}", ++n, h.title,
                           *h.image_url, hit_source(h));
    }
    if (out.empty()) return ok("0 results");
    return ok(out);
}

ToolResult Toolkit::image_search(const std::string& q) {
    if (trim(q).empty()) return err("empty query");
    try {
        return render_image_hits(search_.search(SearchKind::image, q), store_, top_k_);
    } catch (const std::exception& e) {
        return err(e.what());
    }
}

ToolResult Toolkit::visual_search(const std::string& image) {
    if (trim(image).empty()) return err("empty query");
    if (!store_.contains(image) && !looks_like_url(image))
        return err("unknown image reference: " + image);
    try {
        return render_image_hits(search_.search(SearchKind::visual, image), store_, top_k_);
    } catch (const std::exception& e) {
        return err(e.what());
    }
}

ToolResult Toolkit::scrape_website(const std::string& url, const std::string& info_to_extract) {
    try {
        InterleavedDocument doc = pages_.fetch(url);
        SerializedDocument ser =
            intercept(doc, store_, images_, summarizer_,
                      info_to_extract.empty() ? std::nullopt
                                              : std::optional<std::string>(info_to_extract));
        return ok(render(ser));
    } catch (const std::exception& e) {
        json wrapper{{"success", false},
                     {"url", url},
                     {"extracted_info", ""},
                     {"error", std::string("Scraping failed: Unexpected error occurred: ") +
                                   e.what()}};
        return err(wrapper.dump());
    }
}

ToolResult Toolkit::fetch_image(const std::string& uid_or_url) {
    try {
        if (store_.contains(uid_or_url)) {
            std::string uid = store_.resolve(uid_or_url).uid;
            return ok("Image downloaded from: " + uid, {uid});
        }
        if (!looks_like_url(uid_or_url))
            return err("unknown image reference: " + uid_or_url);
        std::vector<uint8_t> bytes = images_.fetch(uid_or_url);
        std::string uid =
            store_.register_asset(bytes, uid_or_url, store_.remote_caption(uid_or_url));
        return ok("Image downloaded from: " + uid, {uid});
    } catch (const Error& e) {
        if (e.code() == Errc::undecodable_image)
            return err(std::string("undecodable image: ") + e.what());
        return err(e.what());
    } catch (const std::exception& e) {
        return err(e.what());
    }
}

ToolResult Toolkit::zoom_in(const std::string& uid, int x, int y, int w, int h) {
    VisualAsset src;
    try {
        src = store_.resolve(uid);
    } catch (const std::exception& e) {
        return err(e.what());
    }
    if (x < 0 || y < 0 || w <= 0 || h <= 0)
        return err(fmt::format(
            "Invalid crop region ({}, {}, {}, {}): coordinates must be non-negative and the "
            "size positive",
            x, y, w, h));
    if (x + w > src.width || y + h > src.height)
        return err(fmt::format("Your cropped region extends beyond image bounds (image size: "
                               "{}x{}, your cropped region: ({}+{})x({}+{}))",
                               src.width, src.height, x, w, y, h));
    try {
        Image img = decode_image(src.bytes);
        Image cropped = crop(img, x, y, w, h);
        std::vector<uint8_t> png = encode_png(cropped);
        std::string caption =
            fmt::format("Zoomed region: ({}, {}, {}, {}) from {}", x, y, w, h, src.uid);
        std::string u_new = store_.register_asset(png, std::nullopt, caption,
                                                  Provenance::generated);
        return ok(fmt::format("Zoomed in on region ({}, {}, {}, {}). Image dimensions: {}x{}. "
                              "Image URL: {}",
                              x, y, w, h, w, h, u_new),
                  {u_new});
    } catch (const std::exception& e) {
        return err(e.what());
    }
}

namespace {

struct ArgError {
    std::string message;
};

// Arguments may arrive double-encoded ({"arguments": "{\"q\": ...}"}); peel
// one layer of string encoding before use.
json normalize_arguments(const json& raw) {
    if (raw.is_string()) {
        try {
            json inner = json::parse(raw.get<std::string>());
            if (inner.is_object()) return inner;
        } catch (const json::exception&) {
            throw ArgError{"malformed arguments: not a JSON object"};
        }
        throw ArgError{"malformed arguments: not a JSON object"};
    }
    if (raw.is_null()) return json::object();
    if (!raw.is_object()) throw ArgError{"malformed arguments: not a JSON object"};
    return raw;
}

std::optional<std::string> arg_string(const json& args, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (!args.contains(k)) continue;
        const json& v = args.at(k);
        if (v.is_string()) return v.get<std::string>();
        throw ArgError{fmt::format("argument type mismatch: '{}' must be a string", k)};
    }
    return std::nullopt;
}

std::optional<int> arg_int(const json& args, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        if (!args.contains(k)) continue;
        const json& v = args.at(k);
        if (v.is_number_integer()) return v.get<int>();
        if (v.is_number_float()) {
            double d = v.get<double>();
            if (d == static_cast<int>(d)) return static_cast<int>(d);
        }
        if (v.is_string()) {
            try {
                size_t pos = 0;
                int n = std::stoi(v.get<std::string>(), &pos);
                if (pos == v.get<std::string>().size()) return n;
            } catch (const std::exception&) {
            }
        }
        throw ArgError{fmt::format("argument type mismatch: '{}' must be an integer", k)};
    }
    return std::nullopt;
}

std::string require(const std::optional<std::string>& v, const char* name) {
    if (!v) throw ArgError{fmt::format("missing required argument: {}", name)};
    return *v;
}

int require(const std::optional<int>& v, const char* name) {
    if (!v) throw ArgError{fmt::format("missing required argument: {}", name)};
    return *v;
}

} // namespace

ToolResult Toolkit::dispatch(const ToolCall& call, int turn_index) {
    std::string canon = canonical_tool_name(call.name);
    ToolResult r;
    if (canon.empty()) {
        r = err("unknown tool: " + call.name);
        r.tool_name = call.name;
    } else {
        try {
            json args = normalize_arguments(call.arguments);
            if (canon == "google_search") {
                r = google_search(require(arg_string(args, {"q", "query"}), "q"));
            } else if (canon == "image_search") {
                r = image_search(require(arg_string(args, {"q", "query"}), "q"));
            } else if (canon == "visual_search") {
                r = visual_search(
                    require(arg_string(args, {"image_url", "uid", "image", "url"}), "image_url"));
            } else if (canon == "scrape_website") {
                r = scrape_website(
                    require(arg_string(args, {"url"}), "url"),
                    arg_string(args, {"info_to_extract", "extract", "goal"}).value_or(""));
            } else if (canon == "fetch_image") {
                r = fetch_image(
                    require(arg_string(args, {"url", "uid", "image_url"}), "url"));
            } else if (canon == "zoom_in") {
                r = zoom_in(require(arg_string(args, {"image_url", "uid", "image", "url"}),
                                    "image_url"),
                            require(arg_int(args, {"x", "left"}), "x"),
                            require(arg_int(args, {"y", "top"}), "y"),
                            require(arg_int(args, {"w", "width"}), "w"),
                            require(arg_int(args, {"h", "height"}), "h"));
            }
        } catch (const ArgError& e) {
            r = err(e.message);
        }
        r.tool_name = canon;
    }
    r.turn_index = turn_index;
    // is_error results never smuggle pixels into context.
    if (r.is_error) r.materialized_images.clear();
    return r;
}

json Toolkit::tool_schemas() {
    auto fn = [](const char* name, const char* desc, json params) {
        return json{{"type", "function"},
                    {"function",
                     {{"name", name}, {"description", desc}, {"parameters", std::move(params)}}}};
    };
    json string_prop{{"type", "string"}};
    json int_prop{{"type", "integer"}};
    return json::array({
        fn("tool-google-search-google_search",
           "Web text search. Returns titles, links and snippets for a query.",
           {{"type", "object"},
            {"properties", {{"q", string_prop}}},
            {"required", json::array({"q"})}}),
        fn("tool-google-search-image_search",
           "Image search. Returns image URLs with titles and hosting pages; images are "
           "referenced by URL and not loaded until fetched.",
           {{"type", "object"},
            {"properties", {{"q", string_prop}}},
            {"required", json::array({"q"})}}),
        fn("tool-google-search-visual_search",
           "Reverse image search over an image UID or URL; returns visually similar results.",
           {{"type", "object"},
            {"properties", {{"image_url", string_prop}}},
            {"required", json::array({"image_url"})}}),
        fn("jina_scrape_llm_summary-scrape_and_extract_info",
           "Fetches a webpage, summarizes its text and lists its images by UID.",
           {{"type", "object"},
            {"properties", {{"url", string_prop}, {"info_to_extract", string_prop}}},
            {"required", json::array({"url"})}}),
        fn("tool-fetch-image-fetch_image",
           "Loads the pixels of an image (by UID or URL) into the conversation.",
           {{"type", "object"},
            {"properties", {{"url", string_prop}}},
            {"required", json::array({"url"})}}),
        fn("tool-image-processing-zoom_in",
           "Crops the region (x, y, w, h) out of an image and loads the crop into the "
           "conversation as a new asset.",
           {{"type", "object"},
            {"properties",
             {{"image_url", string_prop},
              {"x", int_prop},
              {"y", int_prop},
              {"w", int_prop},
              {"h", int_prop}}},
            {"required", json::array({"image_url", "x", "y", "w", "h"})}}),
    });
}

} // namespace mmagent
