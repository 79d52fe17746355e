#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mmagent/errors.hpp"
#include "mmagent/search.hpp"
#include "mmagent/util.hpp"

using namespace mmagent;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct LocalSearchApi {
    httplib::Server server;
    std::thread thread;
    std::string base;
    std::string last_path;
    std::string last_key;
    json last_body;

    explicit LocalSearchApi(int fail_status = 0) {
        auto handler = [this, fail_status](const httplib::Request& req,
                                           httplib::Response& res) {
            last_path = req.path;
            last_key = req.get_header_value("X-API-KEY");
            last_body = json::parse(req.body);
            if (fail_status != 0) {
                res.status = fail_status;
                return;
            }
            if (req.path == "/images") {
                res.set_content(json{{"images",
                                      json::array({{{"title", "Pic"},
                                                    {"imageUrl", "https://i.test/p.png"},
                                                    {"link", "https://host.test/page"}}})}}
                                    .dump(),
                                "application/json");
            } else {
                res.set_content(
                    json{{"organic", json::array({{{"title", "Hit one"},
                                                   {"link", "https://one.test/"},
                                                   {"snippet", "first snippet"}},
                                                  {{"title", "Hit two"},
                                                   {"link", "https://two.test/"}}})}}
                        .dump(),
                    "application/json");
            }
        };
        server.Post("/search", handler);
        server.Post("/images", handler);
        server.Post("/lens", handler);
        int port = server.bind_to_any_port("127.0.0.1");
        base = "http://127.0.0.1:" + std::to_string(port);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalSearchApi() {
        server.stop();
        thread.join();
    }
};

} // namespace

TEST_CASE("text search posts the query and parses organic hits") {
    LocalSearchApi api;
    HttpSearchBackend backend(api.base, "secret-key");
    auto hits = backend.search(SearchKind::text, "who founded acme");
    CHECK(api.last_path == "/search");
    CHECK(api.last_key == "secret-key");
    CHECK(api.last_body.at("q") == "who founded acme");
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].title == "Hit one");
    CHECK(hits[0].link == "https://one.test/");
    CHECK(hits[0].snippet == "first snippet");
    CHECK_FALSE(hits[1].snippet.has_value());
    // Source falls back to the result link when the API omits it.
    CHECK(hits[0].source_url == "https://one.test/");
}

TEST_CASE("image search uses the images endpoint and imageUrl field") {
    LocalSearchApi api;
    HttpSearchBackend backend(api.base, "k");
    auto hits = backend.search(SearchKind::image, "acme logo");
    CHECK(api.last_path == "/images");
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].image_url == "https://i.test/p.png");
    CHECK(hits[0].source_url == "https://host.test/page");
}

TEST_CASE("visual search sends the image reference to the lens endpoint") {
    LocalSearchApi api;
    HttpSearchBackend backend(api.base, "k");
    backend.search(SearchKind::visual, "http://rand-oss/2F9bXW.jpg");
    CHECK(api.last_path == "/lens");
    CHECK(api.last_body.at("url") == "http://rand-oss/2F9bXW.jpg");
    CHECK_FALSE(api.last_body.contains("q"));
}

TEST_CASE("search api failures raise fetch_failed with the status phrase") {
    LocalSearchApi api(429);
    HttpSearchBackend backend(api.base, "k");
    try {
        backend.search(SearchKind::text, "q");
        FAIL("429 did not throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::fetch_failed);
        CHECK(std::string(e.what()).find("429 Too Many Requests") != std::string::npos);
    }
}

TEST_CASE("fixture backend replays recorded hits keyed by normalized query") {
    fs::path dir = fs::temp_directory_path() / "mmagent_search_test";
    fs::remove_all(dir);
    fs::create_directories(dir / "google_search");
    fs::create_directories(dir / "image_search");

    json hits = json::array({{{"title", "旺旺中时媒体集团 - 维基百科"},
                              {"link", "https://zh.wikipedia.org/zh-tw/xyz"},
                              {"snippet", "media group"}}});
    write_text_file(dir / "google_search" / (short_hash("旺旺中时媒体集团 维基百科") + ".json"),
                    hits.dump());
    json img_hits = json::array({{{"title", "logo"},
                                  {"image_url", "https://upload.wikimedia.org/a.png"},
                                  {"source_url", "https://zh.wikipedia.org/page"}}});
    write_text_file(dir / "image_search" / (short_hash("want want logo") + ".json"),
                    img_hits.dump());

    FixtureSearchBackend backend(dir);
    auto got = backend.search(SearchKind::text, "旺旺中时媒体集团 维基百科");
    REQUIRE(got.size() == 1);
    CHECK(got[0].title == "旺旺中时媒体集团 - 维基百科");

    // Whitespace-normalized queries key the same fixture file.
    CHECK(backend.search(SearchKind::text, "  旺旺中时媒体集团   维基百科 ").size() == 1);

    auto img = backend.search(SearchKind::image, "want want logo");
    REQUIRE(img.size() == 1);
    CHECK(img[0].image_url == "https://upload.wikimedia.org/a.png");
    CHECK(img[0].source_url == "https://zh.wikipedia.org/page");

    // Unrecorded queries mean zero results, not a failure.
    CHECK(backend.search(SearchKind::text, "never recorded").empty());
    CHECK(backend.search(SearchKind::visual, "no lens fixture").empty());
    fs::remove_all(dir);
}

TEST_CASE("search kind names match the tool surface") {
    CHECK(std::string(search_kind_name(SearchKind::text)) == "google_search");
    CHECK(std::string(search_kind_name(SearchKind::image)) == "image_search");
    CHECK(std::string(search_kind_name(SearchKind::visual)) == "visual_search");
}
