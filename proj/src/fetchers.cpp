#include "mmagent/fetchers.hpp"

#include <cctype>
#include <cstring>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mmagent/errors.hpp"
#include "mmagent/http_util.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

static Error status_error(int status, const std::string& url) {
    const char* kind = status >= 500 ? "Server error" : "Client error";
    return Error(Errc::fetch_failed,
                 fmt::format("{} '{}' for url '{}'", kind, http_status_phrase(status), url));
}

// ---------------------------------------------------------------- live HTML

namespace {

std::string decode_entities(const std::string& s) {
    std::string out;
    for (size_t i = 0; i < s.size();) {
        if (s[i] == '&') {
            static const std::pair<const char*, char> table[] = {
                {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&#39;", '\''}};
            bool hit = false;
            for (auto& [ent, ch] : table) {
                size_t n = std::strlen(ent);
                if (s.compare(i, n, ent) == 0) {
                    out += ch;
                    i += n;
                    hit = true;
                    break;
                }
            }
            if (hit) continue;
        }
        out += s[i++];
    }
    return out;
}

// Value of attribute `name` inside a raw tag body, or empty.
std::string tag_attr(const std::string& tag, const std::string& name) {
    std::string lower = to_lower(tag);
    size_t pos = 0;
    while ((pos = lower.find(name, pos)) != std::string::npos) {
        size_t eq = pos + name.size();
        while (eq < tag.size() && std::isspace((unsigned char)tag[eq])) ++eq;
        if (eq >= tag.size() || tag[eq] != '=') {
            pos += name.size();
            continue;
        }
        ++eq;
        while (eq < tag.size() && std::isspace((unsigned char)tag[eq])) ++eq;
        if (eq >= tag.size()) return "";
        char quote = tag[eq];
        if (quote == '"' || quote == '\'') {
            size_t end = tag.find(quote, eq + 1);
            if (end == std::string::npos) return "";
            return decode_entities(tag.substr(eq + 1, end - eq - 1));
        }
        size_t end = eq;
        while (end < tag.size() && !std::isspace((unsigned char)tag[end])) ++end;
        return decode_entities(tag.substr(eq, end - eq));
    }
    return "";
}

std::string strip_tags(const std::string& s) {
    std::string out;
    bool in_tag = false;
    for (char c : s) {
        if (c == '<') in_tag = true;
        else if (c == '>') in_tag = false;
        else if (!in_tag) out += c;
    }
    return out;
}

std::string absolutize(const std::string& base_url, const std::string& href) {
    if (href.rfind("http://", 0) == 0 || href.rfind("https://", 0) == 0) return href;
    if (href.rfind("//", 0) == 0) {
        auto scheme_end = base_url.find("://");
        return base_url.substr(0, scheme_end + 1) + href;
    }
    auto parts = split_url(base_url);
    if (!href.empty() && href[0] == '/') return parts.origin + href;
    auto slash = parts.path.rfind('/');
    return parts.origin + parts.path.substr(0, slash + 1) + href;
}

} // namespace

InterleavedDocument extract_page(const std::string& url, const std::string& html) {
    InterleavedDocument doc;
    doc.source_url = url;
    std::string text_acc;
    auto flush_text = [&] {
        std::string t = collapse_ws(decode_entities(text_acc));
        if (!t.empty()) doc.segments.push_back(Segment::make_text(t));
        text_acc.clear();
    };

    size_t i = 0;
    while (i < html.size()) {
        if (html[i] != '<') {
            text_acc += html[i++];
            continue;
        }
        size_t end = html.find('>', i);
        if (end == std::string::npos) break;
        std::string tag = html.substr(i + 1, end - i - 1);
        std::string lower = to_lower(tag);
        if (lower.rfind("script", 0) == 0 || lower.rfind("style", 0) == 0 ||
            lower.rfind("title", 0) == 0) {
            std::string close = lower.rfind("script", 0) == 0  ? "</script"
                                : lower.rfind("style", 0) == 0 ? "</style"
                                                               : "</title";
            size_t stop = to_lower(html).find(close, end);
            i = stop == std::string::npos ? html.size() : html.find('>', stop) + 1;
            continue;
        }
        if (lower.rfind("img", 0) == 0) {
            std::string src = tag_attr(tag, "src");
            if (!src.empty()) {
                flush_text();
                std::string alt = tag_attr(tag, "alt");
                doc.segments.push_back(Segment::make_image(
                    absolutize(url, src),
                    alt.empty() ? std::nullopt : std::optional<std::string>(alt)));
            }
        } else if (lower.rfind("figcaption", 0) == 0) {
            // Attach the caption text to the image that precedes it.
            size_t close = to_lower(html).find("</figcaption", end);
            if (close != std::string::npos) {
                std::string cap = collapse_ws(
                    decode_entities(strip_tags(html.substr(end + 1, close - end - 1))));
                if (!cap.empty() && !doc.segments.empty() &&
                    doc.segments.back().kind == Segment::Kind::image &&
                    !doc.segments.back().caption)
                    doc.segments.back().caption = cap;
                i = html.find('>', close) + 1;
                continue;
            }
        } else if (lower.rfind("p", 0) == 0 || lower.rfind("/p", 0) == 0 ||
                   lower.rfind("br", 0) == 0 || lower.rfind("div", 0) == 0 ||
                   lower.rfind("/div", 0) == 0) {
            text_acc += ' ';
        }
        i = end + 1;
    }
    flush_text();
    if (doc.segments.empty()) doc.segments.push_back(Segment::make_text(""));
    return doc;
}

InterleavedDocument LivePageFetcher::fetch(const std::string& url) {
    auto bytes = http_get_bytes(url, {{"User-Agent", "mmagent/1.0"}});
    return extract_page(url, std::string(bytes.begin(), bytes.end()));
}

std::vector<uint8_t> LiveImageFetcher::fetch(const std::string& url) {
    return http_get_bytes(url, {{"User-Agent", "mmagent/1.0"}});
}

// ----------------------------------------------------------------- fixtures

InterleavedDocument parse_page_record(const std::string& json_text) {
    json rec = json::parse(json_text);
    InterleavedDocument doc;
    doc.source_url = rec.at("source_url").get<std::string>();
    for (const auto& s : rec.at("segments")) {
        std::string kind = s.at("kind").get<std::string>();
        if (kind == "text") {
            doc.segments.push_back(Segment::make_text(s.at("text").get<std::string>()));
        } else if (kind == "image") {
            std::optional<std::string> cap;
            if (s.contains("caption")) cap = s.at("caption").get<std::string>();
            doc.segments.push_back(
                Segment::make_image(s.at("image_url").get<std::string>(), cap));
        } else {
            throw Error(Errc::io_error, "bad segment kind in page fixture: " + kind);
        }
    }
    return doc;
}

InterleavedDocument FixturePageFetcher::fetch(const std::string& url) {
    auto path = dir_ / (short_hash(url) + ".json");
    if (!std::filesystem::exists(path)) throw status_error(404, url);
    json rec = json::parse(read_text_file(path.string()));
    if (rec.contains("status")) throw status_error(rec.at("status").get<int>(), url);
    return parse_page_record(rec.dump());
}

std::vector<uint8_t> FixtureImageFetcher::fetch(const std::string& url) {
    auto bin = dir_ / (short_hash(url) + ".bin");
    if (std::filesystem::exists(bin)) return read_binary_file(bin.string());
    auto meta = dir_ / (short_hash(url) + ".json");
    if (std::filesystem::exists(meta)) {
        json rec = json::parse(read_text_file(meta.string()));
        throw status_error(rec.value("status", 404), url);
    }
    throw status_error(404, url);
}

} // namespace mmagent
