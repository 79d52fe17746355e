#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmagent/dataset.hpp"
#include "mmagent/errors.hpp"
#include "mmagent/eval.hpp"
#include "mmagent/fetchers.hpp"
#include "mmagent/image.hpp"
#include "mmagent/search.hpp"
#include "mmagent/toolkit.hpp"
#include "mmagent/util.hpp"

using namespace mmagent;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Rig {
    fs::path root;
    AssetStore store;
    FixtureSearchBackend search;
    FixturePageFetcher pages;
    FixtureImageFetcher images;
    FallbackSummarizer summarizer;
    Toolkit toolkit;

    explicit Rig(const std::string& name)
        : root(make_root(name)), store(root / "store"), search(root / "search"),
          pages(root / "pages"), images(root / "images"), summarizer(),
          toolkit(store, search, pages, images, summarizer, 10) {}

    static fs::path make_root(const std::string& name) {
        fs::path dir = fs::temp_directory_path() / ("mmagent_eval_" + name);
        fs::remove_all(dir);
        for (const char* sub :
             {"store", "search/google_search", "search/image_search", "search/visual_search",
              "pages", "images"})
            fs::create_directories(dir / sub);
        return dir;
    }

    void add_image_bytes(const std::string& url, const std::vector<uint8_t>& bytes) {
        write_binary_file(root / "images" / (short_hash(url) + ".bin"), bytes);
    }
};

BenchItem item(const std::string& id, const std::string& gold,
               std::vector<std::string> urls = {}) {
    BenchItem it;
    it.item_id = id;
    it.question = "question for " + id;
    it.input_image_urls = std::move(urls);
    it.gold_answer = gold;
    it.benchmark_label = "unit";
    return it;
}

ModelFactory scripted_factory(std::map<std::string, std::vector<std::string>> scripts) {
    return [scripts = std::move(scripts)](const BenchItem& it) -> std::unique_ptr<ModelClient> {
        return std::make_unique<ScriptedModelClient>(scripts.at(it.item_id));
    };
}

EvalRecord rec(const std::string& id, bool correct, int turns, TerminatedBy mode) {
    EvalRecord r;
    r.item_id = id;
    r.correct = correct;
    r.turns_used = turns;
    r.terminated_by = mode;
    if (correct) r.final_answer = "x";
    return r;
}

} // namespace

TEST_CASE("benchmark items load from JSONL with optional fields defaulted") {
    fs::path dir = fs::temp_directory_path() / "mmagent_eval_items";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto path = (dir / "bench.jsonl").string();
    json full{{"item_id", "b1"},
              {"question", "what color?"},
              {"input_image_urls", json::array({"https://img.test/a.png"})},
              {"gold_answer", "red"},
              {"benchmark_label", "mmsearch"}};
    json minimal{{"item_id", "b2"}, {"question", "how many?"}, {"gold_answer", "5"}};
    write_text_file(path, full.dump() + "\n\n" + minimal.dump() + "\n");

    auto items = load_bench_items(path);
    REQUIRE(items.size() == 2);
    CHECK(items[0].item_id == "b1");
    CHECK(items[0].input_image_urls.size() == 1);
    CHECK(items[0].benchmark_label == "mmsearch");
    CHECK(items[1].input_image_urls.empty());
    CHECK(items[1].benchmark_label.empty());
    CHECK_THROWS_AS(load_bench_items((dir / "missing.jsonl").string()), Error);
    fs::remove_all(dir);
}

TEST_CASE("evaluation records round-trip through JSON and JSONL") {
    EvalRecord r;
    r.item_id = "b1";
    r.final_answer = "red";
    r.correct = true;
    r.turns_used = 7;
    r.terminated_by = TerminatedBy::self;

    json j = eval_record_to_json(r);
    EvalRecord back = eval_record_from_json(j);
    CHECK(back.item_id == "b1");
    CHECK(back.final_answer == "red");
    CHECK(back.correct);
    CHECK(back.turns_used == 7);
    CHECK(back.terminated_by == TerminatedBy::self);

    EvalRecord unanswered;
    unanswered.item_id = "b2";
    unanswered.terminated_by = TerminatedBy::error;
    json j2 = eval_record_to_json(unanswered);
    CHECK_FALSE(j2.contains("final_answer"));
    CHECK_FALSE(eval_record_from_json(j2).final_answer.has_value());

    fs::path dir = fs::temp_directory_path() / "mmagent_eval_records";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto path = (dir / "records.jsonl").string();
    write_text_file(path, j.dump() + "\n" + j2.dump() + "\n");
    auto loaded = load_eval_records(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].item_id == "b1");
    CHECK(loaded[1].terminated_by == TerminatedBy::error);
    fs::remove_all(dir);
}

TEST_CASE("a two-item benchmark with one hit scores fifty percent") {
    Rig rig("half");
    std::vector<BenchItem> items{item("i1", "red"), item("i2", "blue")};
    auto factory = scripted_factory({{"i1", {"\\boxed{red}"}},
                                     {"i2", {"\\boxed{green}"}}});
    ExactGrader grader;
    ContextPolicy policy;
    auto records = run_benchmark(items, factory, rig.toolkit, rig.store, rig.images,
                                 policy, grader, 1);
    REQUIRE(records.size() == 2);
    CHECK(records[0].item_id == "i1");
    CHECK(records[0].correct);
    CHECK(records[0].final_answer == "red");
    CHECK(records[0].terminated_by == TerminatedBy::self);
    CHECK(records[0].turns_used == 1);
    CHECK(records[1].item_id == "i2");
    CHECK_FALSE(records[1].correct);
    CHECK(success_rate(records) == 50.0);
    fs::remove_all(rig.root);
}

TEST_CASE("input images are fetched and registered before the run") {
    Rig rig("inputs");
    const std::string url = "https://bench.test/input.png";
    rig.add_image_bytes(url, encode_png(make_test_image(9, 9, 4)));
    std::vector<BenchItem> items{item("i1", "ok", {url})};
    auto factory = scripted_factory({{"i1", {"\\boxed{ok}"}}});
    ExactGrader grader;
    ContextPolicy policy;
    auto records = run_benchmark(items, factory, rig.toolkit, rig.store, rig.images,
                                 policy, grader, 1);
    CHECK(records[0].correct);
    REQUIRE(rig.store.contains(url));
    CHECK(rig.store.resolve(url).caption == "Original input image");
    fs::remove_all(rig.root);
}

TEST_CASE("per-item failures never abort the sweep") {
    Rig rig("faults");
    std::vector<BenchItem> items{
        item("ok", "yes"),
        item("missing-image", "yes", {"https://bench.test/nowhere.png"}),
        item("no-script", "yes")};
    // "no-script" has no entry: the factory itself throws for that item.
    auto factory = scripted_factory({{"ok", {"\\boxed{yes}"}},
                                     {"missing-image", {"\\boxed{yes}"}}});
    ExactGrader grader;
    ContextPolicy policy;
    auto records = run_benchmark(items, factory, rig.toolkit, rig.store, rig.images,
                                 policy, grader, 1);
    REQUIRE(records.size() == 3);
    CHECK(records[0].correct);
    CHECK_FALSE(records[1].correct); // input fetch failed
    CHECK(records[1].terminated_by == TerminatedBy::error);
    CHECK_FALSE(records[2].correct); // model factory failed
    CHECK(records[2].terminated_by == TerminatedBy::error);
    CHECK(success_rate(records) == doctest::Approx(100.0 / 3.0));
    fs::remove_all(rig.root);
}

TEST_CASE("parallel execution preserves item order") {
    Rig rig("parallel");
    std::vector<BenchItem> items;
    std::map<std::string, std::vector<std::string>> scripts;
    for (int i = 0; i < 12; ++i) {
        std::string id = "item-" + std::to_string(i);
        std::string answer = "ans-" + std::to_string(i);
        items.push_back(item(id, answer));
        scripts[id] = {"\\boxed{" + answer + "}"};
    }
    ExactGrader grader;
    ContextPolicy policy;
    auto records = run_benchmark(items, scripted_factory(scripts), rig.toolkit, rig.store,
                                 rig.images, policy, grader, 4);
    REQUIRE(records.size() == 12);
    for (int i = 0; i < 12; ++i) {
        CHECK(records[i].item_id == "item-" + std::to_string(i));
        CHECK(records[i].final_answer == "ans-" + std::to_string(i));
        CHECK(records[i].correct);
    }
    CHECK(success_rate(records) == 100.0);

    // parallel <= 0 clamps to a single worker instead of hanging.
    auto sequential = run_benchmark(items, scripted_factory(scripts), rig.toolkit, rig.store,
                                    rig.images, policy, grader, 0);
    CHECK(sequential.size() == 12);
    CHECK(success_rate(sequential) == 100.0);
    fs::remove_all(rig.root);
}

TEST_CASE("an empty benchmark is refused") {
    Rig rig("empty");
    ExactGrader grader;
    ContextPolicy policy;
    auto factory = scripted_factory({});
    try {
        run_benchmark({}, factory, rig.toolkit, rig.store, rig.images, policy, grader, 1);
        FAIL("expected empty_benchmark");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::empty_benchmark);
    }
    CHECK_THROWS_AS(success_rate({}), Error);
    fs::remove_all(rig.root);
}

TEST_CASE("the scaling curve counts self-terminated hits within each budget") {
    std::vector<EvalRecord> records{
        rec("a", true, 10, TerminatedBy::self),
        rec("b", true, 20, TerminatedBy::self),
        rec("c", true, 5, TerminatedBy::turn_budget), // not self -> never counted
        rec("d", false, 5, TerminatedBy::self)};      // wrong -> never counted

    auto curve = scaling_curve(records, {10, 20, 30});
    REQUIRE(curve.size() == 3);
    CHECK(curve.at(10) == 25.0);
    CHECK(curve.at(20) == 50.0);
    CHECK(curve.at(30) == 50.0);

    // A single 15-turn success is invisible at 10 turns, total at 20.
    std::vector<EvalRecord> single{rec("x", true, 15, TerminatedBy::self)};
    auto c2 = scaling_curve(single, {10, 20});
    CHECK(c2.at(10) == 0.0);
    CHECK(c2.at(20) == 100.0);

    // Budgets at exactly the turn count inclusive.
    CHECK(scaling_curve(single, {15}).at(15) == 100.0);
    CHECK(scaling_curve(single, {14}).at(14) == 0.0);

    // The curve never decreases as the budget grows.
    double prev = -1.0;
    for (const auto& [n, v] : curve) {
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("scaling thresholds must be positive and ascending") {
    std::vector<EvalRecord> records{rec("a", true, 1, TerminatedBy::self)};
    CHECK_THROWS_AS(scaling_curve(records, {0, 10}), Error);
    CHECK_THROWS_AS(scaling_curve(records, {-5}), Error);
    CHECK_THROWS_AS(scaling_curve(records, {20, 10}), Error);
    CHECK_NOTHROW(scaling_curve(records, {10, 10})); // equal neighbours allowed

    // Empty record sets yield all-zero rows rather than dividing by zero.
    auto curve = scaling_curve({}, {10, 20});
    CHECK(curve.at(10) == 0.0);
    CHECK(curve.at(20) == 0.0);
}
