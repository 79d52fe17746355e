#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmagent/agent.hpp"
#include "mmagent/fetchers.hpp"
#include "mmagent/image.hpp"
#include "mmagent/model_client.hpp"
#include "mmagent/search.hpp"
#include "mmagent/toolkit.hpp"
#include "mmagent/util.hpp"

using namespace mmagent;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Fixture-backed toolkit in a scratch directory, mirroring the CLI's replay
// wiring but private to each test case.
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
        fs::path dir = fs::temp_directory_path() / ("mmagent_agent_test_" + name);
        fs::remove_all(dir);
        for (const char* sub :
             {"store", "search/google_search", "search/image_search", "search/visual_search",
              "pages", "images"})
            fs::create_directories(dir / sub);
        return dir;
    }

    void add_text_hits(const std::string& query, const json& hits) {
        write_text_file(root / "search" / "google_search" /
                            (short_hash(collapse_ws(trim(query))) + ".json"),
                        hits.dump());
    }
};

std::string search_turn(const std::string& query) {
    json call{{"name", "google_search"}, {"arguments", json{{"query", query}}}};
    return "<think>look it up</think>\n<tool_call>" + call.dump() + "</tool_call>";
}

json one_hit() {
    return json::array({{{"title", "A sufficiently long headline about the subject of the "
                                   "question so the raw result outweighs any placeholder"},
                         {"link", "https://news.test/article"},
                         {"snippet", "Details that the model will want to read."}}});
}

Message msg(Role role, std::string text, std::vector<std::string> images = {},
            std::string tool_name = "", int turn = 0) {
    Message m;
    m.role = role;
    m.text = std::move(text);
    m.images = std::move(images);
    m.tool_name = std::move(tool_name);
    m.turn_index = turn;
    return m;
}

} // namespace

TEST_CASE("count_context charges ceil(bytes/4) plus a flat rate per image") {
    ContextPolicy policy;
    std::vector<Message> ms{msg(Role::user, "abcd"), msg(Role::user, "abcde"),
                            msg(Role::tool, "", {"u1", "u2"})};
    // 4 bytes -> 1 token, 5 bytes -> 2 tokens, two images -> 2048.
    CHECK(count_context(ms, policy) == 1 + 2 + 2048);

    policy.image_token_cost = 10;
    CHECK(count_context(ms, policy) == 1 + 2 + 20);

    policy.token_counter = [](const std::string&) { return 7LL; };
    CHECK(count_context(ms, policy) == 21 + 20);
}

TEST_CASE("eviction keeps the newest K tool results at full fidelity") {
    ContextPolicy policy;
    policy.keep_recent_k = 2;
    std::vector<Message> ms{msg(Role::system, "sys"), msg(Role::user, "question")};
    for (int i = 1; i <= 5; ++i)
        ms.push_back(msg(Role::tool, "long tool result body number " + std::to_string(i) +
                                         " with plenty of text to replace",
                         {}, "google_search", i));

    auto after = apply_eviction(ms, policy);
    REQUIRE(after.size() == ms.size());
    CHECK(after[0].text == "sys");
    CHECK(after[1].text == "question");
    for (int i = 0; i < 3; ++i) {
        const Message& m = after[2 + i];
        CHECK(m.evicted);
        CHECK(m.text == "[evicted tool result (turn " + std::to_string(i + 1) +
                            ", google_search)]");
    }
    CHECK_FALSE(after[5].evicted);
    CHECK(after[5].text == ms[5].text);
    CHECK_FALSE(after[6].evicted);
}

TEST_CASE("eviction placeholders preserve every asset UID") {
    ContextPolicy policy;
    policy.keep_recent_k = 0;
    std::vector<Message> ms{
        msg(Role::tool,
            "Image downloaded plus a long trailing explanation that outweighs the placeholder",
            {"https://img.test/a.png", "asset://sha256/deadbeef"}, "fetch_image", 3)};
    auto after = apply_eviction(ms, policy);
    REQUIRE(after.size() == 1);
    CHECK(after[0].evicted);
    CHECK(after[0].images.empty()); // pixels always dropped
    CHECK(after[0].text.find("https://img.test/a.png") != std::string::npos);
    CHECK(after[0].text.find("asset://sha256/deadbeef") != std::string::npos);
    CHECK(after[0].text.find("turn 3") != std::string::npos);
    CHECK(after[0].text.find("fetch_image") != std::string::npos);
}

TEST_CASE("eviction keeps a short body that already names its assets") {
    ContextPolicy policy;
    policy.keep_recent_k = 0;
    std::vector<Message> ms{msg(Role::tool, "u1", {"u1"}, "zoom_in", 2)};
    auto after = apply_eviction(ms, policy);
    CHECK(after[0].evicted);
    CHECK(after[0].text == "u1"); // shorter than any placeholder, names the UID
    CHECK(after[0].images.empty());

    // A short body that does NOT name the UID must still be replaced.
    std::vector<Message> ms2{msg(Role::tool, "ok", {"u1"}, "zoom_in", 2)};
    auto after2 = apply_eviction(ms2, policy);
    CHECK(after2[0].text.find("u1") != std::string::npos);
}

TEST_CASE("eviction invariants hold over randomized histories") {
    std::mt19937 rng(20260815);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<Message> ms;
        int n = 1 + int(rng() % 18);
        int tool_count = 0;
        for (int i = 0; i < n; ++i) {
            int kind = int(rng() % 4);
            if (kind == 0) {
                ms.push_back(msg(Role::assistant, std::string(rng() % 120, 'a')));
            } else if (kind == 1) {
                ms.push_back(msg(Role::user, std::string(rng() % 60, 'q')));
            } else {
                ++tool_count;
                std::vector<std::string> uids;
                int k = int(rng() % 3);
                for (int u = 0; u < k; ++u)
                    uids.push_back("asset://sha256/u" + std::to_string(rng() % 1000));
                ms.push_back(msg(Role::tool, std::string(rng() % 300, 'r'), uids,
                                 "google_search", tool_count));
            }
        }
        ContextPolicy policy;
        policy.keep_recent_k = int(rng() % 7);
        long long before = count_context(ms, policy);
        auto after = apply_eviction(ms, policy);

        REQUIRE(after.size() == ms.size());
        CHECK(count_context(after, policy) <= before); // never grows
        int intact = 0;
        for (size_t i = 0; i < ms.size(); ++i) {
            if (ms[i].role != Role::tool) {
                CHECK(after[i].text == ms[i].text); // non-tool untouched
                CHECK(after[i].images == ms[i].images);
                continue;
            }
            if (!after[i].evicted) {
                ++intact;
                CHECK(after[i].text == ms[i].text);
            } else {
                for (const auto& uid : ms[i].images)
                    CHECK(after[i].text.find(uid) != std::string::npos);
                CHECK(after[i].images.empty());
            }
        }
        CHECK(intact == std::min<int>(policy.keep_recent_k, tool_count));

        // Idempotence: a second pass changes nothing.
        auto again = apply_eviction(after, policy);
        for (size_t i = 0; i < after.size(); ++i) {
            CHECK(again[i].text == after[i].text);
            CHECK(again[i].evicted == after[i].evicted);
        }
    }
}

TEST_CASE("final answers come from boxed markers or bare text") {
    CHECK(extract_final_answer("the result is \\boxed{12 apples}") == "12 apples");
    CHECK(extract_final_answer("I believe it is Paris.") == "I believe it is Paris.");
    CHECK_FALSE(extract_final_answer(search_turn("q")).has_value());
    // boxed wins even when a tool call is present in the same turn
    CHECK(extract_final_answer(search_turn("q") + " \\boxed{early}") == "early");
}

TEST_CASE("agent run terminates on a boxed answer") {
    Rig rig("self_term");
    rig.add_text_hits("q1", one_hit());
    ScriptedModelClient model({search_turn("q1"), "<think>done</think>\n\\boxed{42}"});
    ContextPolicy policy;

    Trajectory t = run_task("t-self", "what is the answer?", {}, model, rig.toolkit,
                            rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::self);
    CHECK(t.turns_used == 2);
    CHECK(t.final_answer == "42");
    REQUIRE(t.messages.size() == 5); // system, user, assistant, tool, assistant
    CHECK(t.messages[0].role == Role::system);
    CHECK(t.messages[0].text == default_system_prompt());
    CHECK(t.messages[2].role == Role::assistant);
    CHECK(t.messages[3].role == Role::tool);
    CHECK(t.messages[3].tool_name == "google_search");
    CHECK(t.messages[3].turn_index == 1);
    CHECK(t.messages[3].text.find("sufficiently long headline") != std::string::npos);
    REQUIRE(t.tool_calls.size() == 1);
    CHECK(t.tool_calls[0].turn == 1);
    CHECK(t.tool_calls[0].call.name == "google_search");
    CHECK_FALSE(t.tool_calls[0].is_error);
    CHECK_FALSE(t.tool_calls[0].result_summary.empty());
    CHECK(t.tool_calls[0].result_summary.find('\n') == std::string::npos);
    CHECK(t.peak_context_tokens > 0);
    fs::remove_all(rig.root);
}

TEST_CASE("opening message lists input images with bracketed captions") {
    Rig rig("opening");
    auto bytes = encode_png(make_test_image(6, 6, 7));
    std::string uid = rig.store.register_asset(bytes, std::string("https://img.test/in.png"),
                                               std::string("Original input image"));
    ScriptedModelClient model({"\\boxed{seen}"});
    ContextPolicy policy;
    Trajectory t = run_task("t-open", "describe", {uid}, model, rig.toolkit, rig.store, policy);

    REQUIRE(t.messages.size() >= 2);
    const Message& user = t.messages[1];
    CHECK(user.role == Role::user);
    CHECK(user.text.find("describe\nImage URL: [" + uid + "]") != std::string::npos);
    CHECK(user.text.find("  Description: [Original input image]") != std::string::npos);
    CHECK(user.images == std::vector<std::string>{uid});
    CHECK(t.input_images == std::vector<std::string>{uid});

    // An unregistered UID still gets its line, just without a description.
    ScriptedModelClient model2({"\\boxed{x}"});
    Trajectory t2 = run_task("t-open2", "q", {"https://img.test/ghost.png"}, model2,
                             rig.toolkit, rig.store, policy);
    CHECK(t2.messages[1].text.find("Image URL: [https://img.test/ghost.png]") !=
          std::string::npos);
    CHECK(t2.messages[1].text.find("Description:") == std::string::npos);
    fs::remove_all(rig.root);
}

TEST_CASE("a turn with neither tool call nor answer triggers one wrap-up nudge") {
    Rig rig("nudge");
    ScriptedModelClient model({"Let me reflect on what I know so far.",
                               "Final summary: the capital is Paris."});
    ContextPolicy policy;
    Trajectory t = run_task("t-nudge", "capital of France?", {}, model, rig.toolkit,
                            rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::self);
    CHECK(t.turns_used == 2);
    CHECK(t.final_answer == "Final summary: the capital is Paris.");
    // system, user, assistant, nudge, assistant
    REQUIRE(t.messages.size() == 5);
    CHECK(t.messages[3].role == Role::user);
    CHECK(t.messages[3].text == default_summarization_prompt());
    fs::remove_all(rig.root);
}

TEST_CASE("multiple tool calls in one turn come back as an error result") {
    Rig rig("multi");
    rig.add_text_hits("q1", one_hit());
    ScriptedModelClient model({search_turn("q1") + search_turn("q2"), "\\boxed{ok}"});
    ContextPolicy policy;
    Trajectory t = run_task("t-multi", "q", {}, model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::self);
    REQUIRE(t.tool_calls.size() == 1);
    CHECK(t.tool_calls[0].is_error);
    CHECK(t.tool_calls[0].result_summary.find(
              "received 2 tool calls in one turn") != std::string::npos);
    const Message& toolmsg = t.messages[3];
    CHECK(toolmsg.role == Role::tool);
    CHECK(toolmsg.text ==
          "received 2 tool calls in one turn; issue exactly one tool call per turn and retry");
    fs::remove_all(rig.root);
}

TEST_CASE("a tool call that is not valid JSON is fed back as an error") {
    Rig rig("malformed");
    ScriptedModelClient model({"<tool_call>{broken</tool_call>", "\\boxed{ok}"});
    ContextPolicy policy;
    Trajectory t = run_task("t-mal", "q", {}, model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::self);
    REQUIRE(t.tool_calls.size() == 1);
    CHECK(t.tool_calls[0].is_error);
    CHECK(t.messages[3].text == "malformed tool call: arguments are not valid JSON");
    CHECK(t.messages[3].tool_name == "malformed");
    fs::remove_all(rig.root);
}

TEST_CASE("turn budget grants one uncounted wrap-up call") {
    Rig rig("budget");
    rig.add_text_hits("q1", one_hit());
    ScriptedModelClient model({search_turn("q1"), "\\boxed{from grace}"});
    ContextPolicy policy;
    policy.max_turns = 1;
    Trajectory t = run_task("t-grace", "q", {}, model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::turn_budget);
    CHECK(t.turns_used == 1); // the grace exchange is not a counted turn
    CHECK(t.final_answer == "from grace");
    CHECK(model.remaining() == 0);
    // The second-to-last message is the injected wrap-up prompt.
    REQUIRE(t.messages.size() >= 2);
    CHECK(t.messages[t.messages.size() - 2].role == Role::user);
    CHECK(t.messages[t.messages.size() - 2].text == default_summarization_prompt());
    fs::remove_all(rig.root);
}

TEST_CASE("a failing grace call downgrades to error termination") {
    Rig rig("budget_err");
    ScriptedModelClient model({}); // dies on the very first (grace) call
    ContextPolicy policy;
    policy.max_turns = 0;
    Trajectory t = run_task("t-grace-err", "q", {}, model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::error);
    CHECK(t.turns_used == 0);
    CHECK_FALSE(t.final_answer.has_value());
    fs::remove_all(rig.root);
}

TEST_CASE("context budget stops the run before the model is called") {
    Rig rig("ctx");
    ScriptedModelClient model({}); // would throw if ever consulted
    ContextPolicy policy;
    policy.max_context_tokens = 5; // opening message alone exceeds this
    Trajectory t = run_task("t-ctx", "a question that costs more than five tokens", {},
                            model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::context_budget);
    CHECK(t.turns_used == 0);
    CHECK(t.messages.size() == 2); // nothing was added past system + user
    CHECK(t.peak_context_tokens > 5);
    fs::remove_all(rig.root);
}

TEST_CASE("context budget can trip mid-run after results accumulate") {
    Rig rig("ctx_mid");
    rig.add_text_hits("q1", one_hit());
    ScriptedModelClient model({search_turn("q1"), "\\boxed{never reached}"});
    ContextPolicy policy;
    policy.token_counter = [](const std::string&) { return 100LL; };
    policy.max_context_tokens = 350; // 2 messages fit, 4 do not
    Trajectory t = run_task("t-ctx-mid", "q", {}, model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::context_budget);
    CHECK(t.turns_used == 1);
    CHECK(model.remaining() == 1);
    CHECK(t.peak_context_tokens == 400);
    fs::remove_all(rig.root);
}

TEST_CASE("a dead model endpoint terminates the run as an error") {
    Rig rig("dead");
    rig.add_text_hits("q1", one_hit());
    ScriptedModelClient model({search_turn("q1")});
    ContextPolicy policy;
    Trajectory t = run_task("t-dead", "q", {}, model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::error);
    CHECK(t.turns_used == 1);
    CHECK(t.tool_calls.size() == 1);
    fs::remove_all(rig.root);
}

TEST_CASE("old tool results are evicted while the run is still going") {
    Rig rig("evict_run");
    rig.add_text_hits("q1", one_hit());
    ScriptedModelClient model(
        {search_turn("q1"), search_turn("q1"), search_turn("q1"), "\\boxed{done}"});
    ContextPolicy policy;
    policy.keep_recent_k = 1;
    Trajectory t = run_task("t-evict", "q", {}, model, rig.toolkit, rig.store, policy);
    CHECK(t.terminated_by == TerminatedBy::self);
    CHECK(t.turns_used == 4);

    std::vector<const Message*> tool_msgs;
    for (const auto& m : t.messages)
        if (m.role == Role::tool) tool_msgs.push_back(&m);
    REQUIRE(tool_msgs.size() == 3);
    CHECK(tool_msgs[0]->evicted);
    CHECK(tool_msgs[0]->text == "[evicted tool result (turn 1, google_search)]");
    CHECK(tool_msgs[1]->evicted);
    CHECK_FALSE(tool_msgs[2]->evicted);
    CHECK(tool_msgs[2]->text.find("sufficiently long headline") != std::string::npos);
    fs::remove_all(rig.root);
}

TEST_CASE("trajectories round-trip through JSON and JSONL files") {
    Rig rig("roundtrip");
    rig.add_text_hits("q1", one_hit());
    ScriptedModelClient model({search_turn("q1"), "\\boxed{42}"});
    ContextPolicy policy;
    Trajectory t = run_task("t-rt", "question?", {}, model, rig.toolkit, rig.store, policy);
    t.success = true;

    Trajectory u = trajectory_from_json(trajectory_to_json(t));
    CHECK(u.task_id == t.task_id);
    CHECK(u.question == t.question);
    CHECK(u.input_images == t.input_images);
    CHECK(u.final_answer == t.final_answer);
    CHECK(u.terminated_by == t.terminated_by);
    CHECK(u.turns_used == t.turns_used);
    CHECK(u.peak_context_tokens == t.peak_context_tokens);
    CHECK(u.success == t.success);
    REQUIRE(u.messages.size() == t.messages.size());
    for (size_t i = 0; i < t.messages.size(); ++i) {
        CHECK(u.messages[i].role == t.messages[i].role);
        CHECK(u.messages[i].text == t.messages[i].text);
        CHECK(u.messages[i].images == t.messages[i].images);
        CHECK(u.messages[i].evicted == t.messages[i].evicted);
        CHECK(u.messages[i].tool_name == t.messages[i].tool_name);
        CHECK(u.messages[i].turn_index == t.messages[i].turn_index);
    }
    REQUIRE(u.tool_calls.size() == t.tool_calls.size());
    for (size_t i = 0; i < t.tool_calls.size(); ++i) {
        CHECK(u.tool_calls[i].turn == t.tool_calls[i].turn);
        CHECK(u.tool_calls[i].call.name == t.tool_calls[i].call.name);
        CHECK(u.tool_calls[i].call.arguments == t.tool_calls[i].call.arguments);
        CHECK(u.tool_calls[i].result_summary == t.tool_calls[i].result_summary);
        CHECK(u.tool_calls[i].is_error == t.tool_calls[i].is_error);
    }

    auto path = (rig.root / "runs.jsonl").string();
    append_trajectory(t, path);
    Trajectory second = t;
    second.task_id = "t-rt-2";
    second.success = std::nullopt;
    append_trajectory(second, path);
    auto loaded = load_trajectories(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].task_id == "t-rt");
    CHECK(loaded[0].success == true);
    CHECK(loaded[1].task_id == "t-rt-2");
    CHECK_FALSE(loaded[1].success.has_value());
    fs::remove_all(rig.root);
}

TEST_CASE("termination mode names round-trip") {
    for (TerminatedBy m : {TerminatedBy::self, TerminatedBy::turn_budget,
                           TerminatedBy::context_budget, TerminatedBy::error})
        CHECK(terminated_by_from_name(terminated_by_name(m)) == m);
    CHECK_THROWS(terminated_by_from_name("gave_up"));
}
