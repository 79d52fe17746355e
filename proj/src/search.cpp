#include "mmagent/search.hpp"

#include <nlohmann/json.hpp>

#include "mmagent/errors.hpp"
#include "mmagent/http_util.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

const char* search_kind_name(SearchKind k) {
    switch (k) {
        case SearchKind::text: return "google_search";
        case SearchKind::image: return "image_search";
        case SearchKind::visual: return "visual_search";
    }
    return "google_search";
}

static std::optional<std::string> opt_field(const json& j, const char* key) {
    if (j.contains(key) && j.at(key).is_string()) {
        auto v = j.at(key).get<std::string>();
        if (!v.empty()) return v;
    }
    return std::nullopt;
}

std::vector<SearchHit> HttpSearchBackend::search(SearchKind kind, const std::string& query) {
    std::string path;
    json body;
    switch (kind) {
        case SearchKind::text:
            path = "/search";
            body["q"] = query;
            break;
        case SearchKind::image:
            path = "/images";
            body["q"] = query;
            break;
        case SearchKind::visual:
            path = "/lens";
            body["url"] = query;
            break;
    }
    std::string resp = http_post_json(base_url_ + path, body.dump(),
                                      {{"X-API-KEY", api_key_}});
    json j = json::parse(resp);

    std::vector<SearchHit> hits;
    const char* list_key = kind == SearchKind::image ? "images" : "organic";
    if (!j.contains(list_key)) return hits;
    for (const auto& r : j.at(list_key)) {
        SearchHit h;
        h.title = r.value("title", "");
        h.link = r.value("link", "");
        h.snippet = opt_field(r, "snippet");
        h.image_url = opt_field(r, "imageUrl");
        if (!h.image_url) h.image_url = opt_field(r, "image_url");
        h.source_url = opt_field(r, "source");
        if (!h.source_url && !h.link.empty()) h.source_url = h.link;
        hits.push_back(std::move(h));
    }
    return hits;
}

std::vector<SearchHit> FixtureSearchBackend::search(SearchKind kind, const std::string& query) {
    auto path = dir_ / search_kind_name(kind) / (short_hash(collapse_ws(trim(query))) + ".json");
    std::vector<SearchHit> hits;
    if (!std::filesystem::exists(path)) return hits;
    json arr = json::parse(read_text_file(path.string()));
    for (const auto& r : arr) {
        SearchHit h;
        h.title = r.value("title", "");
        h.link = r.value("link", "");
        h.snippet = opt_field(r, "snippet");
        h.image_url = opt_field(r, "image_url");
        h.source_url = opt_field(r, "source_url");
        hits.push_back(std::move(h));
    }
    return hits;
}

} // namespace mmagent
