#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmagent/document.hpp"
#include "mmagent/model_client.hpp"

namespace mmagent {

// Seed material for question synthesis: a serialized webpage, its core
// entity, the image tied to that entity, a clue linking the two, a visual
// question about the image, and the attribute value the finished question
// must resolve to.
struct QuerySeed {
    SerializedDocument webpage;
    std::string core_entity;
    std::string anchor_image; // uid
    std::string clue;
    std::string visual_question;
    std::string answer;
};

nlohmann::json seed_to_json(const QuerySeed& s);
QuerySeed seed_from_json(const nlohmann::json& j);

enum class NodeState { unexpanded, expanded };

struct GraphNode {
    int node_id = 0;
    std::string entity;
    NodeState state = NodeState::unexpanded;
    int depth = 0;
    std::optional<std::string> fuzzed_as; // attribute description replacing the name
    bool fuzz_skipped = false;            // wanted fuzzing but had no unused attribute
};

struct GraphEdge {
    int from = 0;
    std::string relation;
    int to = 0;
    bool irreversibility_checked = false;
};

// One (relation, target entity, value text) attribute offered by a knowledge
// source. `value` is the human-readable attribute value; empty falls back to
// the target entity name.
struct AttributeCandidate {
    std::string relation;
    std::string target;
    std::string value;
};

// What one expansion step saw and kept — enough to replay the construction
// as literal set unions and verify the final graph against it.
struct ExpansionStep {
    int node_id = 0;
    std::string entity;
    std::vector<AttributeCandidate> offered;
    std::vector<AttributeCandidate> kept;
};

struct KnowledgeGraph {
    std::map<int, GraphNode> nodes;
    std::vector<GraphEdge> edges;
    int root_id = 0;
    uint64_t rng_seed = 0;
    std::vector<ExpansionStep> history;
    int marked_leaf_id = -1; // set on sampled subgraphs: the image-replaced leaf

    int out_degree(int id) const;
    int in_degree(int id) const;
    const GraphNode* find_entity(const std::string& entity) const;
    // true if `to` can already reach `from` along directed edges.
    bool reaches(int from, int to) const;
};

KnowledgeGraph make_graph(const std::string& root_entity, uint64_t rng_seed);

nlohmann::json graph_to_json(const KnowledgeGraph& g);
KnowledgeGraph graph_from_json(const nlohmann::json& j);

class KnowledgeSource {
public:
    virtual ~KnowledgeSource() = default;
    virtual std::vector<AttributeCandidate> lookup(const std::string& entity) = 0;
};

// Reads <dir>/<entity_hash>.json:
//   {"entity": ..., "attributes": [{"relation", "target", "value"}...]}
// Unknown entities have no attributes.
class FixtureKnowledgeSource : public KnowledgeSource {
public:
    explicit FixtureKnowledgeSource(std::filesystem::path dir) : dir_(std::move(dir)) {}
    std::vector<AttributeCandidate> lookup(const std::string& entity) override;

private:
    std::filesystem::path dir_;
};

// Decides whether knowing an attribute phrase alone could identify the
// entity that carries it. Implementations must answer false (reject the
// edge) when they cannot tell.
class IrreversibilityJudge {
public:
    virtual ~IrreversibilityJudge() = default;
    virtual bool irreversible(const std::string& attribute_phrase,
                              const std::string& source_entity) = 0;
};

// Offline oracle over a candidate-count table (counts.json:
// {"<relation> <target>": holder_count}). An attribute is safe (irreversible)
// iff more than one entity holds it; unknown phrases are rejected.
class CountOracle : public IrreversibilityJudge {
public:
    explicit CountOracle(const std::string& counts_json_path);
    explicit CountOracle(std::map<std::string, long long> counts) : counts_(std::move(counts)) {}
    bool irreversible(const std::string& attribute_phrase,
                      const std::string& source_entity) override;

private:
    std::map<std::string, long long> counts_;
};

// Delegates the judgment to a chat endpoint ("yes"/"no" answer).
class ChatJudge : public IrreversibilityJudge {
public:
    explicit ChatJudge(ChatClient& client) : client_(client) {}
    bool irreversible(const std::string& attribute_phrase,
                      const std::string& source_entity) override;

private:
    ChatClient& client_;
};

// Failure-tolerant wrapper: true iff the judge affirms the attribute cannot
// reverse-identify the source entity; judge errors count as "no" (the edge
// is rejected rather than risked).
bool check_irreversibility(const std::string& attribute_phrase,
                           const std::string& source_entity, IrreversibilityJudge& judge);

// How aggressively expansion branches: at most max_branch attributes per
// node, none past max_depth, preferring targets in sparse graph regions.
struct FilterPolicy {
    int max_branch = 3;
    int max_depth = 3;
};

// One construction step: pick an unexpanded node, filter its attributes,
// union the survivors into the node and edge sets, mark the node expanded.
// Throws Error(Errc::no_unexpanded_node) when construction is complete.
void expand_step(KnowledgeGraph& graph, KnowledgeSource& source, const FilterPolicy& policy,
                 IrreversibilityJudge& judge);

// Runs up to `steps` expansion steps (stops early when no node is left).
void build_graph(KnowledgeGraph& graph, KnowledgeSource& source, const FilterPolicy& policy,
                 IrreversibilityJudge& judge, int steps);

// Replaces the names of leaves and low-degree nodes (root excluded) with a
// description built from a seeded-random attribute not already used on an
// incident edge. Nodes with no unused attribute are skipped and flagged.
void fuzzify(KnowledgeGraph& graph, KnowledgeSource& source, int degree_threshold,
             std::mt19937_64& rng);

// Seeded random root-anchored path of at most max_hops edges; the endpoint
// is marked for image replacement.
KnowledgeGraph sample_subgraph(const KnowledgeGraph& graph, std::mt19937_64& rng, int max_hops);

struct ProvenanceEdge {
    std::string from;
    std::string relation;
    std::string to;
};

struct SynthesizedQuestion {
    std::string question_text;
    std::string answer;
    std::string anchor_image; // uid
    int hop_count = 1;
    std::vector<ProvenanceEdge> provenance;
};

nlohmann::json question_to_json(const SynthesizedQuestion& q);

// Builds a QuerySeed from a live or fixture page: intercepts it, then asks
// the extractor to pick the core entity / anchor image pair. The extractor
// must answer with JSON fields entity, image_uid, clue, visual_question,
// answer. Throws Errc::no_qualifying_image on image-free pages and
// Errc::extractor_refusal on unusable extractor output.
QuerySeed extract_seed(const std::string& page_url, PageFetcher& fetcher,
                       ImageFetcher& image_fetcher, SummarizerClient& summarizer,
                       ChatClient& extractor, AssetStore& store);

// Composes the one-hop question q0 from a seed: the clue plus the visual
// question. The composer output must mention the clue and reference the
// image, else Errc::composer_refusal.
SynthesizedQuestion synthesize_single_hop(const QuerySeed& seed, ChatClient& composer);

// Splices a sampled subgraph into q0 as natural-language reasoning that
// terminates at the core entity; the marked leaf is presented through
// leaf_image instead of its name. Output must not name any fuzzified entity,
// else Errc::composer_refusal.
SynthesizedQuestion compose_multihop(const QuerySeed& seed, const KnowledgeGraph& subgraph,
                                     const std::string& leaf_image, ChatClient& composer);

} // namespace mmagent
