#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mmagent {

enum class Provenance { retrieved, generated };

const char* provenance_name(Provenance p);

// An image payload plus the metadata the store keeps for it. Returned by
// value from the store: an immutable snapshot.
struct VisualAsset {
    std::string uid;
    std::vector<uint8_t> bytes;
    std::string content_hash;
    std::string media_type;
    int width = 0;
    int height = 0;
    std::optional<std::string> source_url;
    std::optional<std::string> caption;
    Provenance provenance = Provenance::retrieved;
};

// Persistent content-addressed image store with a strict one-to-one mapping
// between stored content and textual UIDs. Web-originated assets reuse their
// URL as the UID; derived assets get a hash-addressed locator so the UID
// grammar stays URL-shaped either way.
//
// On disk: <root>/blobs/<content_hash> holds raw bytes, <root>/index.jsonl
// is an append-only record log whose replay reconstructs the store, and
// <root>/store.json pins the digest algorithm.
class AssetStore {
public:
    static constexpr size_t kDefaultMaxAssetBytes = 32ull * 1024 * 1024;

    explicit AssetStore(std::filesystem::path root,
                        size_t max_asset_bytes = kDefaultMaxAssetBytes);

    AssetStore(const AssetStore&) = delete;
    AssetStore& operator=(const AssetStore&) = delete;

    // Registers an image payload and returns its UID. Identical bytes always
    // come back with the UID issued first (idempotent); a second source_url
    // for known content is recorded as an alias, never as a second UID.
    // Throws Error(Errc::undecodable_image) for non-image or oversized
    // payloads.
    std::string register_asset(const std::vector<uint8_t>& bytes,
                               std::optional<std::string> source_url = std::nullopt,
                               std::optional<std::string> caption = std::nullopt,
                               Provenance provenance = Provenance::retrieved);

    // Exact asset registered under uid (aliases resolve to their canonical
    // asset). Throws Error(Errc::unknown_uid) for anything never registered.
    VisualAsset resolve(const std::string& uid) const;

    bool contains(const std::string& uid) const;

    // Remembers a URL seen in search results before its bytes were ever
    // downloaded. Pure metadata: the URL only becomes a resolvable UID once
    // fetch_image registers its bytes.
    void note_remote(const std::string& url, const std::string& caption);
    std::optional<std::string> remote_caption(const std::string& url) const;

    size_t size() const;
    const std::filesystem::path& root() const { return root_; }

private:
    struct Entry {
        std::string uid;
        std::string content_hash;
        std::string media_type;
        int width = 0;
        int height = 0;
        std::optional<std::string> source_url;
        std::optional<std::string> caption;
        Provenance provenance = Provenance::retrieved;
    };

    std::filesystem::path blob_path(const std::string& content_hash) const;
    void append_record(const std::string& json_line);
    void load_index();

    std::filesystem::path root_;
    size_t max_asset_bytes_;

    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;        // uid -> entry
    std::map<std::string, std::string> hash_index_; // content_hash -> uid
    std::map<std::string, std::string> aliases_;  // alias uid -> canonical uid
    std::map<std::string, std::string> remote_notes_;
};

} // namespace mmagent
