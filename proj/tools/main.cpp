// mmagent — multimodal deep-search agent runtime CLI.
//
// One binary, subcommands for every stage of the pipeline: running the agent
// loop, invoking the scraping middleware, synthesizing training questions,
// filtering/exporting trajectories, merging checkpoints, and benchmarking.
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "mmagent/agent.hpp"
#include "mmagent/asset_store.hpp"
#include "mmagent/dataset.hpp"
#include "mmagent/errors.hpp"
#include "mmagent/eval.hpp"
#include "mmagent/fetchers.hpp"
#include "mmagent/merge.hpp"
#include "mmagent/model_client.hpp"
#include "mmagent/search.hpp"
#include "mmagent/synthesis.hpp"
#include "mmagent/toolkit.hpp"
#include "mmagent/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmagent;

namespace {

// Raised for bad invocations discovered after flag parsing (missing env
// vars, inconsistent flag combinations). Maps to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string require_env(const char* name) {
    if (auto v = env_var(name); v && !v->empty()) return *v;
    throw UsageError(fmt::format("environment variable {} is required in live mode "
                                 "(pass --replay DIR to run offline)",
                                 name));
}

// Everything a command needs to touch the outside world, live or replayed.
// --replay DIR swaps every network-facing backend for its fixture twin
// reading DIR/pages, DIR/images, DIR/search, DIR/model.
struct Backends {
    std::unique_ptr<AssetStore> store;
    std::unique_ptr<PageFetcher> pages;
    std::unique_ptr<ImageFetcher> images;
    std::unique_ptr<SearchBackend> search;
    std::unique_ptr<SummarizerClient> summarizer;
    std::unique_ptr<Toolkit> toolkit;
};

Backends make_backends(const std::string& store_dir, const std::string& replay_dir) {
    Backends b;
    b.store = std::make_unique<AssetStore>(store_dir);
    if (!replay_dir.empty()) {
        fs::path replay(replay_dir);
        b.pages = std::make_unique<FixturePageFetcher>(replay / "pages");
        b.images = std::make_unique<FixtureImageFetcher>(replay / "images");
        b.search = std::make_unique<FixtureSearchBackend>(replay / "search");
        b.summarizer = std::make_unique<FallbackSummarizer>();
    } else {
        b.pages = std::make_unique<LivePageFetcher>();
        b.images = std::make_unique<LiveImageFetcher>();
        b.search = std::make_unique<HttpSearchBackend>(require_env("SEARCH_API_URL"),
                                                       require_env("SEARCH_API_KEY"));
        if (auto url = env_var("SUMMARIZER_API_URL"); url && !url->empty())
            b.summarizer = std::make_unique<HttpSummarizer>(
                *url, env_var("MODEL_API_KEY").value_or(""));
        else
            b.summarizer = std::make_unique<FallbackSummarizer>();
    }
    b.toolkit = std::make_unique<Toolkit>(*b.store, *b.search, *b.pages, *b.images,
                                          *b.summarizer);
    return b;
}

// Scripted turns under DIR/model/<task_id>.json in replay mode, the
// chat-completions endpoint otherwise.
std::unique_ptr<ModelClient> make_model(const std::string& replay_dir,
                                        const std::string& task_id,
                                        const std::string& model_name) {
    if (!replay_dir.empty()) {
        fs::path path = fs::path(replay_dir) / "model" / (task_id + ".json");
        if (!fs::exists(path))
            throw UsageError(fmt::format("no scripted model turns at {}", path.string()));
        return std::make_unique<ScriptedModelClient>(
            ScriptedModelClient::from_file(path.string()));
    }
    return std::make_unique<HttpModelClient>(require_env("MODEL_API_URL"),
                                             require_env("MODEL_API_KEY"), model_name);
}

// Single-shot chat client for extractor/composer/judge roles: a response
// script when --script is given, the live endpoint otherwise.
std::unique_ptr<ChatClient> make_chat(const std::string& script_file,
                                      const std::string& model_name) {
    if (!script_file.empty())
        return std::make_unique<ScriptedChatClient>(
            ScriptedChatClient::from_file(script_file));
    return std::make_unique<HttpChatClient>(require_env("MODEL_API_URL"),
                                            require_env("MODEL_API_KEY"), model_name);
}

std::vector<std::string> register_inputs(const std::vector<std::string>& urls,
                                         ImageFetcher& fetcher, AssetStore& store) {
    std::vector<std::string> uids;
    for (const auto& url : urls)
        uids.push_back(store.register_asset(fetcher.fetch(url), url, "Original input image"));
    return uids;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path);
    out << text;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open " + path);
    return json::parse(in);
}

// ---------------------------------------------------------------- agent run

struct AgentRunArgs {
    std::string question;
    std::vector<std::string> image_urls;
    std::string task_id = "task";
    int max_turns = 30;
    int keep_recent = 5;
    long long max_tokens = 128000;
    std::string replay;
    std::string store_dir = "mmagent_store";
    std::string out;
    std::string model_name = "default";
};

int cmd_agent_run(const AgentRunArgs& a) {
    Backends b = make_backends(a.store_dir, a.replay);
    auto model = make_model(a.replay, a.task_id, a.model_name);
    std::vector<std::string> uids = register_inputs(a.image_urls, *b.images, *b.store);

    ContextPolicy policy;
    policy.max_turns = a.max_turns;
    policy.keep_recent_k = a.keep_recent;
    policy.max_context_tokens = a.max_tokens;

    Trajectory traj =
        run_task(a.task_id, a.question, uids, *model, *b.toolkit, *b.store, policy);
    if (!a.out.empty()) append_trajectory(traj, a.out);
    fmt::print("{}\n", trajectory_to_json(traj).dump());
    return 0;
}

// ------------------------------------------------------------------- scrape

struct ScrapeArgs {
    std::string url;
    std::string extract;
    std::string replay;
    std::string store_dir = "mmagent_store";
};

int cmd_scrape(const ScrapeArgs& a) {
    Backends b = make_backends(a.store_dir, a.replay);
    InterleavedDocument doc = b.pages->fetch(a.url);
    std::optional<std::string> focus;
    if (!a.extract.empty()) focus = a.extract;
    SerializedDocument serialized =
        intercept(doc, *b.store, *b.images, *b.summarizer, focus);
    fmt::print("{}\n", render(serialized));
    return 0;
}

// -------------------------------------------------------------------- synth

struct SynthSeedArgs {
    std::string page_url;
    std::string replay;
    std::string script;
    std::string store_dir = "mmagent_store";
    std::string out;
    std::string model_name = "default";
};

int cmd_synth_seed(const SynthSeedArgs& a) {
    Backends b = make_backends(a.store_dir, a.replay);
    auto extractor = make_chat(a.script, a.model_name);
    QuerySeed seed =
        extract_seed(a.page_url, *b.pages, *b.images, *b.summarizer, *extractor, *b.store);
    std::string line = seed_to_json(seed).dump();
    if (!a.out.empty()) write_text(a.out, line + "\n");
    fmt::print("{}\n", line);
    return 0;
}

struct SynthGraphArgs {
    std::string seed_file;
    int steps = 8;
    uint64_t rng_seed = 0;
    std::string knowledge_dir;
    std::string counts_file;
    int max_branch = 3;
    int max_depth = 3;
    int fuzz_threshold = -1; // <0 disables fuzzification
    std::string script;      // scripted judge (yes/no answers)
    std::string out;
    std::string model_name = "default";
};

int cmd_synth_graph(const SynthGraphArgs& a) {
    QuerySeed seed = seed_from_json(load_json_file(a.seed_file));
    if (a.knowledge_dir.empty())
        throw UsageError("--knowledge DIR (attribute fixture directory) is required");
    FixtureKnowledgeSource source{fs::path(a.knowledge_dir)};

    std::unique_ptr<IrreversibilityJudge> judge;
    std::unique_ptr<ChatClient> judge_chat;
    if (!a.counts_file.empty()) {
        judge = std::make_unique<CountOracle>(a.counts_file);
    } else {
        judge_chat = make_chat(a.script, a.model_name);
        judge = std::make_unique<ChatJudge>(*judge_chat);
    }

    KnowledgeGraph graph = make_graph(seed.core_entity, a.rng_seed);
    FilterPolicy policy{a.max_branch, a.max_depth};
    build_graph(graph, source, policy, *judge, a.steps);
    if (a.fuzz_threshold >= 0) {
        std::mt19937_64 rng(a.rng_seed);
        fuzzify(graph, source, a.fuzz_threshold, rng);
    }
    std::string line = graph_to_json(graph).dump();
    if (!a.out.empty()) write_text(a.out, line + "\n");
    fmt::print("{}\n", line);
    return 0;
}

struct SynthQuestionArgs {
    std::string graph_file;
    std::string seed_file;
    int max_hops = 3;
    uint64_t rng_seed = 0;
    std::string leaf_image;
    std::string script;
    std::string out;
    std::string model_name = "default";
};

int cmd_synth_question(const SynthQuestionArgs& a) {
    QuerySeed seed = seed_from_json(load_json_file(a.seed_file));
    auto composer = make_chat(a.script, a.model_name);

    SynthesizedQuestion q;
    if (a.max_hops <= 0) {
        q = synthesize_single_hop(seed, *composer);
    } else {
        KnowledgeGraph graph = graph_from_json(load_json_file(a.graph_file));
        std::mt19937_64 rng(a.rng_seed);
        KnowledgeGraph sub = sample_subgraph(graph, rng, a.max_hops);
        if (sub.marked_leaf_id == sub.root_id) {
            // Degenerate walk (no outgoing edges): the seed question stands.
            q = synthesize_single_hop(seed, *composer);
        } else {
            std::string leaf = a.leaf_image.empty() ? seed.anchor_image : a.leaf_image;
            q = compose_multihop(seed, sub, leaf, *composer);
        }
    }
    std::string line = question_to_json(q).dump();
    if (!a.out.empty()) write_text(a.out, line + "\n");
    fmt::print("{}\n", line);
    return 0;
}

// --------------------------------------------------------------------- data

struct DataArgs {
    std::string in;
    std::string out;
    std::string manifest;
    std::string store_dir = "mmagent_store";
    std::string replay;
    std::string script;
    std::string assets_manifest;
    int max_turns = 40;
    long long max_context = 64000;
    bool keep_incorrect = false;
    std::string model_name = "default";
};

int cmd_data_prefilter(const DataArgs& a) {
    std::ifstream in(a.in);
    if (!in) throw Error(Errc::io_error, "cannot open " + a.in);
    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + a.out);

    AssetStore store(a.store_dir);
    std::unique_ptr<ModelClient> judge;
    if (!a.script.empty())
        judge = std::make_unique<ScriptedModelClient>(
            ScriptedModelClient::from_file(a.script));
    else
        judge = make_model("", "", a.model_name);
    ExactGrader grader;

    long long kept = 0, total = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++total;
        json j = json::parse(line);
        std::vector<std::string> images;
        if (j.contains("images")) images = j.at("images").get<std::vector<std::string>>();
        if (prefilter_query(j.at("question").get<std::string>(), images, *judge, store,
                            j.at("gold_answer").get<std::string>(), grader)) {
            out << line << "\n";
            ++kept;
        }
    }
    fmt::print("kept {} of {} questions\n", kept, total);
    return 0;
}

int cmd_data_filter(const DataArgs& a) {
    if (a.manifest.empty()) throw UsageError("--manifest is required for data filter");
    auto manifest = load_manifest(a.manifest);
    std::vector<Trajectory> trajectories = load_trajectories(a.in);

    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + a.out);

    ExactGrader grader;
    FilterCriteria criteria;
    criteria.max_turns = a.max_turns;
    criteria.max_context_tokens = a.max_context;
    criteria.require_success = !a.keep_incorrect;

    long long kept = 0;
    for (const auto& traj : trajectories) {
        auto it = manifest.find(traj.task_id);
        if (it == manifest.end()) {
            fmt::print(stderr, "warning: {} missing from manifest, dropped\n", traj.task_id);
            continue;
        }
        if (rejection_filter(traj, it->second.gold_answer, grader, criteria)) {
            out << trajectory_to_json(traj).dump() << "\n";
            ++kept;
        }
    }
    fmt::print("kept {} of {} trajectories\n", kept, trajectories.size());
    return 0;
}

int cmd_data_export(const DataArgs& a) {
    if (a.manifest.empty()) throw UsageError("--manifest is required for data export");
    auto manifest = load_manifest(a.manifest);
    std::vector<Trajectory> trajectories = load_trajectories(a.in);

    std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + a.out);

    AssetStore store(a.store_dir);
    std::set<std::string> uids;
    long long exported = 0;
    for (const auto& traj : trajectories) {
        auto it = manifest.find(traj.task_id);
        std::string source = it == manifest.end() ? "unknown" : it->second.source;
        SftRecord rec = export_sft(traj, store, source);
        for (const auto& m : rec.messages)
            for (const auto& uid : m.images) uids.insert(uid);
        out << sft_to_json(rec).dump() << "\n";
        ++exported;
    }

    json assets = json::array();
    for (const auto& uid : uids) {
        VisualAsset asset = store.resolve(uid);
        assets.push_back({{"uid", uid},
                          {"content_hash", asset.content_hash},
                          {"media_type", asset.media_type},
                          {"width", asset.width},
                          {"height", asset.height}});
    }
    std::string assets_path = a.assets_manifest.empty()
                                  ? (fs::path(a.out).parent_path() / "assets_manifest.json")
                                        .string()
                                  : a.assets_manifest;
    write_text(assets_path, json{{"assets", assets}}.dump(2) + "\n");
    fmt::print("exported {} records, {} assets\n", exported, uids.size());
    return 0;
}

int cmd_data_stats(const DataArgs& a) {
    std::ifstream in(a.in);
    if (!in) throw Error(Errc::io_error, "cannot open " + a.in);
    std::vector<SftRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        records.push_back(sft_from_json(json::parse(line)));
    }
    DatasetStats stats = compute_stats(records);
    if (!a.out.empty()) write_text(a.out, stats_to_json(stats).dump(2) + "\n");
    fmt::print("{}", render_stats_table(stats));
    return 0;
}

// -------------------------------------------------------------------- merge

struct MergeArgs {
    std::string a;
    std::string b;
    double alpha = 0.8;
    std::string key_filter = "*";
    std::string out;
};

int cmd_merge(const MergeArgs& m) {
    ParameterMap theta_v = load_parameters(m.a);
    ParameterMap theta_t = load_parameters(m.b);
    MergeSpec spec;
    spec.alpha = m.alpha;
    spec.key_filter = m.key_filter;
    ParameterMap merged = interpolate(theta_v, theta_t, spec);
    save_parameters(merged, m.out);
    fmt::print("wrote {} ({} entries)\n", m.out, merged.entries.size());
    return 0;
}

// --------------------------------------------------------------------- eval

struct EvalRunArgs {
    std::string bench;
    std::string out;
    std::string replay;
    std::string store_dir = "mmagent_store";
    int max_turns = 30;
    int keep_recent = 5;
    long long max_tokens = 128000;
    int parallel = 4;
    std::string model_name = "default";
};

int cmd_eval_run(const EvalRunArgs& a) {
    Backends b = make_backends(a.store_dir, a.replay);
    std::vector<BenchItem> items = load_bench_items(a.bench);

    ContextPolicy policy;
    policy.max_turns = a.max_turns;
    policy.keep_recent_k = a.keep_recent;
    policy.max_context_tokens = a.max_tokens;

    ModelFactory factory = [&](const BenchItem& item) {
        return make_model(a.replay, item.item_id, a.model_name);
    };
    ExactGrader grader;
    std::vector<EvalRecord> records = run_benchmark(items, factory, *b.toolkit, *b.store,
                                                    *b.images, policy, grader, a.parallel);
    if (!a.out.empty()) {
        std::ofstream out(a.out, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::io_error, "cannot write " + a.out);
        for (const auto& r : records) out << eval_record_to_json(r).dump() << "\n";
    }
    fmt::print("items: {}\nsuccess rate: {:.1f}\n", records.size(), success_rate(records));
    return 0;
}

struct EvalScalingArgs {
    std::string records;
    std::string thresholds = "10,20,30,40,50,60,70,80,90,100";
    std::string out;
};

int cmd_eval_scaling(const EvalScalingArgs& a) {
    std::vector<EvalRecord> records = load_eval_records(a.records);
    std::vector<int> thresholds;
    for (const auto& part : split(a.thresholds, ','))
        if (!trim(part).empty()) thresholds.push_back(std::stoi(trim(part)));
    if (thresholds.empty()) throw UsageError("--thresholds must list at least one turn count");

    std::map<int, double> curve = scaling_curve(records, thresholds);
    json j = json::object();
    fmt::print("{:>6}  {:>8}\n", "turns", "accuracy");
    for (const auto& [n, acc] : curve) {
        fmt::print("{:>6}  {:>8.1f}\n", n, acc);
        j[std::to_string(n)] = acc;
    }
    if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal deep-search agent runtime"};
    app.require_subcommand(1);

    // agent run
    auto* agent = app.add_subcommand("agent", "run the agent loop");
    agent->require_subcommand(1);
    AgentRunArgs ar;
    auto* agent_run = agent->add_subcommand("run", "answer one question end to end");
    agent_run->add_option("--question", ar.question, "task question")->required();
    agent_run->add_option("--image-url", ar.image_urls, "input image URL (repeatable)");
    agent_run->add_option("--task-id", ar.task_id, "task identifier");
    agent_run->add_option("--max-turns", ar.max_turns, "turn budget");
    agent_run->add_option("--keep-recent", ar.keep_recent, "tool results kept at full fidelity");
    agent_run->add_option("--max-tokens", ar.max_tokens, "context token budget");
    agent_run->add_option("--replay", ar.replay, "fixture directory (offline mode)");
    agent_run->add_option("--store", ar.store_dir, "asset store directory");
    agent_run->add_option("--out", ar.out, "append the trajectory to this jsonl file");
    agent_run->add_option("--model", ar.model_name, "model name (live mode)");

    // scrape
    ScrapeArgs sc;
    auto* scrape = app.add_subcommand("scrape", "fetch a page through the middleware");
    scrape->add_option("--url", sc.url, "page URL")->required();
    scrape->add_option("--extract", sc.extract, "what to extract from the page");
    scrape->add_option("--replay", sc.replay, "fixture directory (offline mode)");
    scrape->add_option("--store", sc.store_dir, "asset store directory");

    // synth
    auto* synth = app.add_subcommand("synth", "question synthesis pipeline");
    synth->require_subcommand(1);
    SynthSeedArgs ss;
    auto* synth_seed = synth->add_subcommand("seed", "extract a query seed from a page");
    synth_seed->add_option("--page-url", ss.page_url, "source page URL")->required();
    synth_seed->add_option("--replay", ss.replay, "fixture directory (offline mode)");
    synth_seed->add_option("--script", ss.script, "scripted extractor responses (json)");
    synth_seed->add_option("--store", ss.store_dir, "asset store directory");
    synth_seed->add_option("--out", ss.out, "write the seed json here");
    synth_seed->add_option("--model", ss.model_name, "model name (live mode)");

    SynthGraphArgs sg;
    auto* synth_graph = synth->add_subcommand("graph", "grow a knowledge graph from a seed");
    synth_graph->add_option("--seed-file", sg.seed_file, "seed json from `synth seed`")
        ->required();
    synth_graph->add_option("--steps", sg.steps, "expansion steps");
    synth_graph->add_option("--rng-seed", sg.rng_seed, "random seed");
    synth_graph->add_option("--knowledge", sg.knowledge_dir, "attribute fixture directory");
    synth_graph->add_option("--counts", sg.counts_file,
                            "attribute-holder counts json (offline irreversibility oracle)");
    synth_graph->add_option("--max-branch", sg.max_branch, "attributes kept per node");
    synth_graph->add_option("--max-depth", sg.max_depth, "expansion depth limit");
    synth_graph->add_option("--fuzz-threshold", sg.fuzz_threshold,
                            "degree threshold for entity fuzzification (negative = off)");
    synth_graph->add_option("--script", sg.script, "scripted judge responses (json)");
    synth_graph->add_option("--out", sg.out, "write the graph json here");
    synth_graph->add_option("--model", sg.model_name, "model name (live mode)");

    SynthQuestionArgs sq;
    auto* synth_question =
        synth->add_subcommand("question", "compose a question from a graph");
    synth_question->add_option("--graph", sq.graph_file, "graph json from `synth graph`");
    synth_question->add_option("--seed-file", sq.seed_file, "seed json from `synth seed`")
        ->required();
    synth_question->add_option("--max-hops", sq.max_hops, "subgraph walk length cap");
    synth_question->add_option("--rng-seed", sq.rng_seed, "random seed");
    synth_question->add_option("--leaf-image", sq.leaf_image,
                               "image uid standing in for the walk endpoint");
    synth_question->add_option("--script", sq.script, "scripted composer responses (json)");
    synth_question->add_option("--out", sq.out, "write the question json here");
    synth_question->add_option("--model", sq.model_name, "model name (live mode)");

    // data
    auto* data = app.add_subcommand("data", "trajectory dataset pipeline");
    data->require_subcommand(1);
    DataArgs da;
    auto* data_prefilter =
        data->add_subcommand("prefilter", "drop questions a tool-less model already answers");
    data_prefilter->add_option("--in", da.in, "questions jsonl")->required();
    data_prefilter->add_option("--out", da.out, "kept questions jsonl")->required();
    data_prefilter->add_option("--script", da.script, "scripted judge turns (json)");
    data_prefilter->add_option("--store", da.store_dir, "asset store directory");
    data_prefilter->add_option("--model", da.model_name, "model name (live mode)");

    auto* data_filter =
        data->add_subcommand("filter", "rejection-sample trajectories against gold answers");
    data_filter->add_option("--in", da.in, "trajectories jsonl")->required();
    data_filter->add_option("--out", da.out, "kept trajectories jsonl")->required();
    data_filter->add_option("--manifest", da.manifest, "gold answers + source labels json");
    data_filter->add_option("--max-turns", da.max_turns, "turn cap");
    data_filter->add_option("--max-context", da.max_context, "peak context token cap");
    data_filter->add_flag("--keep-incorrect", da.keep_incorrect,
                          "keep trajectories regardless of answer correctness");

    auto* data_export = data->add_subcommand("export", "export trajectories as sft records");
    data_export->add_option("--in", da.in, "trajectories jsonl")->required();
    data_export->add_option("--out", da.out, "sft jsonl")->required();
    data_export->add_option("--manifest", da.manifest, "gold answers + source labels json");
    data_export->add_option("--store", da.store_dir, "asset store directory");
    data_export->add_option("--assets-manifest", da.assets_manifest,
                            "asset manifest output path");

    auto* data_stats = data->add_subcommand("stats", "dataset composition table");
    data_stats->add_option("--in", da.in, "sft jsonl")->required();
    data_stats->add_option("--out", da.out, "write stats json here");

    // merge
    MergeArgs ma;
    auto* merge = app.add_subcommand("merge", "interpolate two parameter files");
    merge->add_option("--a", ma.a, "vision-side parameter file")->required();
    merge->add_option("--b", ma.b, "text-side parameter file")->required();
    merge->add_option("--alpha", ma.alpha, "interpolation weight toward --a");
    merge->add_option("--key-filter", ma.key_filter, "glob selecting keys to interpolate");
    merge->add_option("--out", ma.out, "merged parameter file")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "benchmark harness");
    eval->require_subcommand(1);
    EvalRunArgs er;
    auto* eval_run = eval->add_subcommand("run", "run a benchmark item list");
    eval_run->add_option("--bench", er.bench, "benchmark items jsonl")->required();
    eval_run->add_option("--out", er.out, "write eval records jsonl here");
    eval_run->add_option("--replay", er.replay, "fixture directory (offline mode)");
    eval_run->add_option("--store", er.store_dir, "asset store directory");
    eval_run->add_option("--max-turns", er.max_turns, "turn budget");
    eval_run->add_option("--keep-recent", er.keep_recent, "tool results kept at full fidelity");
    eval_run->add_option("--max-tokens", er.max_tokens, "context token budget");
    eval_run->add_option("--parallel", er.parallel, "concurrent item runs");
    eval_run->add_option("--model", er.model_name, "model name (live mode)");

    EvalScalingArgs es;
    auto* eval_scaling = eval->add_subcommand("scaling", "success-within-N-turns curve");
    eval_scaling->add_option("--records", es.records, "eval records jsonl")->required();
    eval_scaling->add_option("--thresholds", es.thresholds, "comma-separated turn thresholds");
    eval_scaling->add_option("--out", es.out, "write the curve json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e); // prints help or the parse error
        return code == 0 ? 0 : 1;
    }

    try {
        if (agent_run->parsed()) return cmd_agent_run(ar);
        if (scrape->parsed()) return cmd_scrape(sc);
        if (synth_seed->parsed()) return cmd_synth_seed(ss);
        if (synth_graph->parsed()) return cmd_synth_graph(sg);
        if (synth_question->parsed()) return cmd_synth_question(sq);
        if (data_prefilter->parsed()) return cmd_data_prefilter(da);
        if (data_filter->parsed()) return cmd_data_filter(da);
        if (data_export->parsed()) return cmd_data_export(da);
        if (data_stats->parsed()) return cmd_data_stats(da);
        if (merge->parsed()) return cmd_merge(ma);
        if (eval_run->parsed()) return cmd_eval_run(er);
        if (eval_scaling->parsed()) return cmd_eval_scaling(es);
    } catch (const UsageError& e) {
        fmt::print(stderr, "usage error: {}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
    fmt::print(stderr, "usage error: no subcommand\n");
    return 1;
}
