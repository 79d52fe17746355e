#include "mmagent/asset_store.hpp"

#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "mmagent/errors.hpp"
#include "mmagent/image.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

const char* provenance_name(Provenance p) {
    return p == Provenance::generated ? "generated" : "retrieved";
}

static Provenance provenance_from_name(const std::string& s) {
    if (s == "generated") return Provenance::generated;
    if (s == "retrieved") return Provenance::retrieved;
    throw Error(Errc::io_error, "bad provenance in store index: " + s);
}

AssetStore::AssetStore(std::filesystem::path root, size_t max_asset_bytes)
    : root_(std::move(root)), max_asset_bytes_(max_asset_bytes) {
    std::filesystem::create_directories(root_ / "blobs");
    auto meta_path = root_ / "store.json";
    if (std::filesystem::exists(meta_path)) {
        json meta = json::parse(read_text_file(meta_path.string()));
        std::string digest = meta.value("digest", "");
        if (digest != "sha256")
            throw Error(Errc::io_error,
                        "store at " + root_.string() + " uses unsupported digest '" + digest + "'");
    } else {
        write_text_file(meta_path.string(), json{{"digest", "sha256"}}.dump() + "\n");
    }
    load_index();
}

std::filesystem::path AssetStore::blob_path(const std::string& content_hash) const {
    return root_ / "blobs" / content_hash;
}

void AssetStore::append_record(const std::string& json_line) {
    append_line((root_ / "index.jsonl").string(), json_line);
}

void AssetStore::load_index() {
    auto idx = root_ / "index.jsonl";
    if (!std::filesystem::exists(idx)) return;
    std::ifstream in(idx);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json rec = json::parse(line);
        if (rec.contains("alias")) {
            aliases_[rec.at("alias").get<std::string>()] =
                rec.at("alias_of").get<std::string>();
            continue;
        }
        Entry e;
        e.uid = rec.at("uid").get<std::string>();
        e.content_hash = rec.at("content_hash").get<std::string>();
        e.media_type = rec.at("media_type").get<std::string>();
        e.width = rec.at("width").get<int>();
        e.height = rec.at("height").get<int>();
        if (rec.contains("source_url")) e.source_url = rec.at("source_url").get<std::string>();
        if (rec.contains("caption")) e.caption = rec.at("caption").get<std::string>();
        e.provenance = provenance_from_name(rec.at("provenance").get<std::string>());
        hash_index_.emplace(e.content_hash, e.uid);
        entries_[e.uid] = std::move(e);
    }
}

std::string AssetStore::register_asset(const std::vector<uint8_t>& bytes,
                                       std::optional<std::string> source_url,
                                       std::optional<std::string> caption,
                                       Provenance provenance) {
    if (provenance == Provenance::generated && source_url)
        throw Error(Errc::invalid_argument,
                    "derived assets are store-addressed and cannot carry a source URL");
    if (bytes.size() > max_asset_bytes_)
        throw Error(Errc::undecodable_image,
                    fmt::format("asset of {} bytes exceeds the {} byte store limit",
                                bytes.size(), max_asset_bytes_));

    // Decoding up front both validates the payload and captures dimensions.
    Image img = decode_image(bytes);
    std::string media = sniff_media_type(bytes);
    std::string hash = sha256_hex(bytes);

    std::lock_guard<std::mutex> lk(mu_);

    if (auto it = hash_index_.find(hash); it != hash_index_.end()) {
        const std::string& canonical = it->second;
        // Same content surfacing under a new URL: remember the spelling but
        // keep the single canonical UID.
        if (source_url && *source_url != canonical && !entries_.count(*source_url) &&
            !aliases_.count(*source_url)) {
            aliases_[*source_url] = canonical;
            append_record(json{{"alias", *source_url}, {"alias_of", canonical}}.dump());
        }
        return canonical;
    }

    std::string uid;
    if (source_url && looks_like_url(*source_url) && !entries_.count(*source_url) &&
        !aliases_.count(*source_url)) {
        uid = *source_url;
    } else {
        // Derived content, non-URL origin, or a URL whose earlier bytes
        // already own that name: fall back to a content-addressed locator.
        uid = "asset://sha256/" + hash;
        source_url = std::nullopt;
    }

    auto bp = blob_path(hash);
    if (!std::filesystem::exists(bp)) write_binary_file(bp.string(), bytes);

    Entry e;
    e.uid = uid;
    e.content_hash = hash;
    e.media_type = media;
    e.width = img.width;
    e.height = img.height;
    e.source_url = source_url;
    if (caption)
        e.caption = caption;
    else if (source_url) {
        if (auto it = remote_notes_.find(*source_url); it != remote_notes_.end())
            e.caption = it->second;
    }
    e.provenance = provenance;

    json rec{{"uid", e.uid},
             {"content_hash", e.content_hash},
             {"media_type", e.media_type},
             {"width", e.width},
             {"height", e.height},
             {"provenance", provenance_name(e.provenance)}};
    if (e.source_url) rec["source_url"] = *e.source_url;
    if (e.caption) rec["caption"] = *e.caption;
    append_record(rec.dump());

    hash_index_.emplace(hash, uid);
    entries_[uid] = std::move(e);
    return uid;
}

VisualAsset AssetStore::resolve(const std::string& uid) const {
    std::lock_guard<std::mutex> lk(mu_);
    std::string key = uid;
    if (auto a = aliases_.find(key); a != aliases_.end()) key = a->second;
    auto it = entries_.find(key);
    if (it == entries_.end())
        throw Error(Errc::unknown_uid, "unknown image reference: " + uid);
    const Entry& e = it->second;
    VisualAsset v;
    v.uid = e.uid;
    v.bytes = read_binary_file(blob_path(e.content_hash).string());
    v.content_hash = e.content_hash;
    v.media_type = e.media_type;
    v.width = e.width;
    v.height = e.height;
    v.source_url = e.source_url;
    v.caption = e.caption;
    v.provenance = e.provenance;
    return v;
}

bool AssetStore::contains(const std::string& uid) const {
    std::lock_guard<std::mutex> lk(mu_);
    return entries_.count(uid) > 0 || aliases_.count(uid) > 0;
}

void AssetStore::note_remote(const std::string& url, const std::string& caption) {
    std::lock_guard<std::mutex> lk(mu_);
    remote_notes_.emplace(url, caption); // first caption wins
}

std::optional<std::string> AssetStore::remote_caption(const std::string& url) const {
    std::lock_guard<std::mutex> lk(mu_);
    if (auto it = remote_notes_.find(url); it != remote_notes_.end()) return it->second;
    return std::nullopt;
}

size_t AssetStore::size() const {
    std::lock_guard<std::mutex> lk(mu_);
    return entries_.size();
}

} // namespace mmagent
