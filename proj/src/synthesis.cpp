#include "mmagent/synthesis.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "mmagent/errors.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

// ------------------------------------------------------------------- seeds

json seed_to_json(const QuerySeed& s) {
    json w{{"source_url", s.webpage.source_url}, {"summary_text", s.webpage.summary_text}};
    w["images"] = json::array();
    for (const auto& img : s.webpage.images) {
        json e{{"uid", img.uid}};
        if (img.caption) e["caption"] = *img.caption;
        w["images"].push_back(std::move(e));
    }
    w["failed_images"] = json::array();
    for (const auto& f : s.webpage.failed_images)
        w["failed_images"].push_back(json{{"url", f.url}, {"reason", f.reason}});
    return json{{"webpage", std::move(w)},
                {"core_entity", s.core_entity},
                {"anchor_image", s.anchor_image},
                {"clue", s.clue},
                {"visual_question", s.visual_question},
                {"answer", s.answer}};
}

QuerySeed seed_from_json(const json& j) {
    QuerySeed s;
    const json& w = j.at("webpage");
    s.webpage.source_url = w.at("source_url").get<std::string>();
    s.webpage.summary_text = w.at("summary_text").get<std::string>();
    for (const auto& e : w.at("images")) {
        SerializedImageEntry img;
        img.uid = e.at("uid").get<std::string>();
        if (e.contains("caption")) img.caption = e.at("caption").get<std::string>();
        s.webpage.images.push_back(std::move(img));
    }
    if (w.contains("failed_images"))
        for (const auto& e : w.at("failed_images"))
            s.webpage.failed_images.push_back(
                {e.at("url").get<std::string>(), e.at("reason").get<std::string>()});
    s.core_entity = j.at("core_entity").get<std::string>();
    s.anchor_image = j.at("anchor_image").get<std::string>();
    s.clue = j.at("clue").get<std::string>();
    s.visual_question = j.at("visual_question").get<std::string>();
    s.answer = j.at("answer").get<std::string>();
    return s;
}

// ------------------------------------------------------------------- graph

int KnowledgeGraph::out_degree(int id) const {
    int n = 0;
    for (const auto& e : edges)
        if (e.from == id) ++n;
    return n;
}

int KnowledgeGraph::in_degree(int id) const {
    int n = 0;
    for (const auto& e : edges)
        if (e.to == id) ++n;
    return n;
}

const GraphNode* KnowledgeGraph::find_entity(const std::string& entity) const {
    for (const auto& [id, node] : nodes)
        if (node.entity == entity) return &node;
    return nullptr;
}

bool KnowledgeGraph::reaches(int from, int to) const {
    if (from == to) return true;
    std::vector<int> stack{from};
    std::set<int> seen{from};
    while (!stack.empty()) {
        int cur = stack.back();
        stack.pop_back();
        for (const auto& e : edges) {
            if (e.from != cur || seen.count(e.to)) continue;
            if (e.to == to) return true;
            seen.insert(e.to);
            stack.push_back(e.to);
        }
    }
    return false;
}

KnowledgeGraph make_graph(const std::string& root_entity, uint64_t rng_seed) {
    KnowledgeGraph g;
    g.rng_seed = rng_seed;
    g.root_id = 0;
    GraphNode root;
    root.node_id = 0;
    root.entity = root_entity;
    root.depth = 0;
    g.nodes[0] = std::move(root);
    return g;
}

static json candidate_to_json(const AttributeCandidate& c) {
    return json{{"relation", c.relation}, {"target", c.target}, {"value", c.value}};
}

static AttributeCandidate candidate_from_json(const json& j) {
    return {j.at("relation").get<std::string>(), j.at("target").get<std::string>(),
            j.value("value", "")};
}

json graph_to_json(const KnowledgeGraph& g) {
    json j{{"root_id", g.root_id}, {"rng_seed", g.rng_seed}};
    if (g.marked_leaf_id >= 0) j["marked_leaf_id"] = g.marked_leaf_id;
    j["nodes"] = json::array();
    for (const auto& [id, n] : g.nodes) {
        json nj{{"node_id", n.node_id},
                {"entity", n.entity},
                {"state", n.state == NodeState::expanded ? "expanded" : "unexpanded"},
                {"depth", n.depth},
                {"fuzz_skipped", n.fuzz_skipped}};
        if (n.fuzzed_as) nj["fuzzed_as"] = *n.fuzzed_as;
        j["nodes"].push_back(std::move(nj));
    }
    j["edges"] = json::array();
    for (const auto& e : g.edges)
        j["edges"].push_back(json{{"from", e.from},
                                  {"relation", e.relation},
                                  {"to", e.to},
                                  {"irreversibility_checked", e.irreversibility_checked}});
    j["history"] = json::array();
    for (const auto& h : g.history) {
        json hj{{"node_id", h.node_id}, {"entity", h.entity}};
        hj["offered"] = json::array();
        for (const auto& c : h.offered) hj["offered"].push_back(candidate_to_json(c));
        hj["kept"] = json::array();
        for (const auto& c : h.kept) hj["kept"].push_back(candidate_to_json(c));
        j["history"].push_back(std::move(hj));
    }
    return j;
}

KnowledgeGraph graph_from_json(const json& j) {
    KnowledgeGraph g;
    g.root_id = j.at("root_id").get<int>();
    g.rng_seed = j.at("rng_seed").get<uint64_t>();
    g.marked_leaf_id = j.value("marked_leaf_id", -1);
    for (const auto& nj : j.at("nodes")) {
        GraphNode n;
        n.node_id = nj.at("node_id").get<int>();
        n.entity = nj.at("entity").get<std::string>();
        n.state = nj.at("state").get<std::string>() == "expanded" ? NodeState::expanded
                                                                  : NodeState::unexpanded;
        n.depth = nj.at("depth").get<int>();
        n.fuzz_skipped = nj.value("fuzz_skipped", false);
        if (nj.contains("fuzzed_as")) n.fuzzed_as = nj.at("fuzzed_as").get<std::string>();
        g.nodes[n.node_id] = std::move(n);
    }
    for (const auto& ej : j.at("edges")) {
        GraphEdge e;
        e.from = ej.at("from").get<int>();
        e.relation = ej.at("relation").get<std::string>();
        e.to = ej.at("to").get<int>();
        e.irreversibility_checked = ej.at("irreversibility_checked").get<bool>();
        g.edges.push_back(std::move(e));
    }
    if (j.contains("history"))
        for (const auto& hj : j.at("history")) {
            ExpansionStep h;
            h.node_id = hj.at("node_id").get<int>();
            h.entity = hj.at("entity").get<std::string>();
            for (const auto& c : hj.at("offered")) h.offered.push_back(candidate_from_json(c));
            for (const auto& c : hj.at("kept")) h.kept.push_back(candidate_from_json(c));
            g.history.push_back(std::move(h));
        }
    return g;
}

// ----------------------------------------------------------------- sources

std::vector<AttributeCandidate> FixtureKnowledgeSource::lookup(const std::string& entity) {
    auto path = dir_ / (short_hash(trim(entity)) + ".json");
    std::vector<AttributeCandidate> out;
    if (!std::filesystem::exists(path)) return out;
    json rec = json::parse(read_text_file(path.string()));
    for (const auto& a : rec.at("attributes")) out.push_back(candidate_from_json(a));
    return out;
}

CountOracle::CountOracle(const std::string& counts_json_path) {
    json j = json::parse(read_text_file(counts_json_path));
    for (auto it = j.begin(); it != j.end(); ++it)
        counts_[it.key()] = it.value().get<long long>();
}

bool CountOracle::irreversible(const std::string& attribute_phrase, const std::string&) {
    auto it = counts_.find(attribute_phrase);
    if (it == counts_.end())
        throw Error(Errc::judge_unavailable,
                    "no candidate count recorded for attribute: " + attribute_phrase);
    return it->second > 1;
}

bool ChatJudge::irreversible(const std::string& attribute_phrase,
                             const std::string& source_entity) {
    std::string verdict = client_.complete(
        "You judge attribute reversibility. Answer strictly 'yes' or 'no'.",
        fmt::format("Could the attribute \"{}\" alone uniquely identify the entity \"{}\"? "
                    "Answer 'yes' if it identifies it uniquely, 'no' if many entities share "
                    "the attribute.",
                    attribute_phrase, source_entity));
    std::string v = to_lower(trim(verdict));
    // "no" = not uniquely identifiable = safe to keep (irreversible).
    return v.rfind("no", 0) == 0;
}

bool check_irreversibility(const std::string& attribute_phrase,
                           const std::string& source_entity, IrreversibilityJudge& judge) {
    try {
        return judge.irreversible(attribute_phrase, source_entity);
    } catch (const std::exception&) {
        return false; // fail closed: an unjudgeable edge is never kept
    }
}

// --------------------------------------------------------------- expansion

static int select_unexpanded(const KnowledgeGraph& g) {
    for (const auto& [id, node] : g.nodes) // std::map: ascending node_id
        if (node.state == NodeState::unexpanded) return id;
    return -1;
}

void expand_step(KnowledgeGraph& graph, KnowledgeSource& source, const FilterPolicy& policy,
                 IrreversibilityJudge& judge) {
    int vid = select_unexpanded(graph);
    if (vid < 0) throw Error(Errc::no_unexpanded_node, "every node is already expanded");
    GraphNode& v = graph.nodes.at(vid);

    ExpansionStep step;
    step.node_id = vid;
    step.entity = v.entity;
    step.offered = source.lookup(v.entity);

    std::vector<AttributeCandidate> kept;
    if (v.depth < policy.max_depth) {
        // Order candidates toward sparse regions: fewest existing edges on
        // the target first, source order as the tiebreak.
        std::vector<size_t> order(step.offered.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            auto density = [&](const AttributeCandidate& c) {
                const GraphNode* n = graph.find_entity(c.target);
                return n ? graph.in_degree(n->node_id) + graph.out_degree(n->node_id) : 0;
            };
            return density(step.offered[a]) < density(step.offered[b]);
        });

        std::set<std::pair<std::string, std::string>> taken; // (relation, target) this step
        for (size_t idx : order) {
            if (static_cast<int>(kept.size()) == policy.max_branch) break;
            const AttributeCandidate& c = step.offered[idx];
            if (c.target.empty() || c.target == v.entity) continue;
            if (taken.count({c.relation, c.target})) continue;

            const GraphNode* existing = graph.find_entity(c.target);
            if (existing) {
                // Set semantics: an identical edge is already a no-op; an
                // edge into an ancestor would close a cycle — skip both.
                bool dup = false;
                for (const auto& e : graph.edges)
                    if (e.from == vid && e.relation == c.relation && e.to == existing->node_id)
                        dup = true;
                if (dup || graph.reaches(existing->node_id, vid)) continue;
            }
            if (!check_irreversibility(c.relation + " " + c.target, v.entity, judge)) continue;
            taken.insert({c.relation, c.target});
            kept.push_back(c);
        }
    }

    for (const auto& c : kept) {
        const GraphNode* existing = graph.find_entity(c.target);
        int to_id;
        if (existing) {
            to_id = existing->node_id;
        } else {
            to_id = graph.nodes.rbegin()->first + 1;
            GraphNode n;
            n.node_id = to_id;
            n.entity = c.target;
            n.depth = v.depth + 1;
            graph.nodes[to_id] = std::move(n);
        }
        graph.edges.push_back({vid, c.relation, to_id, true});
    }

    v.state = NodeState::expanded;
    step.kept = std::move(kept);
    graph.history.push_back(std::move(step));
}

void build_graph(KnowledgeGraph& graph, KnowledgeSource& source, const FilterPolicy& policy,
                 IrreversibilityJudge& judge, int steps) {
    for (int i = 0; i < steps; ++i) {
        try {
            expand_step(graph, source, policy, judge);
        } catch (const Error& e) {
            if (e.code() == Errc::no_unexpanded_node) return;
            throw;
        }
    }
}

// ----------------------------------------------------- fuzzify / subgraph

void fuzzify(KnowledgeGraph& graph, KnowledgeSource& source, int degree_threshold,
             std::mt19937_64& rng) {
    for (auto& [id, node] : graph.nodes) {
        if (id == graph.root_id) continue;
        int in = graph.in_degree(id), out = graph.out_degree(id);
        bool is_leaf = out == 0;
        if (!is_leaf && in + out > degree_threshold) continue;

        std::set<std::string> used;
        for (const auto& e : graph.edges)
            if (e.from == id || e.to == id) used.insert(e.relation);

        std::vector<AttributeCandidate> unused;
        for (const auto& c : source.lookup(node.entity))
            if (!used.count(c.relation)) unused.push_back(c);

        if (unused.empty()) {
            node.fuzz_skipped = true;
            continue;
        }
        const AttributeCandidate& pick = unused[rng() % unused.size()];
        node.fuzzed_as = fmt::format("the entity whose {} is {}", pick.relation,
                                     pick.value.empty() ? pick.target : pick.value);
    }
}

KnowledgeGraph sample_subgraph(const KnowledgeGraph& graph, std::mt19937_64& rng, int max_hops) {
    KnowledgeGraph sub;
    sub.root_id = graph.root_id;
    sub.rng_seed = graph.rng_seed;
    int current = graph.root_id;
    sub.nodes[current] = graph.nodes.at(current);
    for (int hop = 0; hop < max_hops; ++hop) {
        std::vector<const GraphEdge*> out;
        for (const auto& e : graph.edges)
            if (e.from == current) out.push_back(&e);
        if (out.empty()) break;
        const GraphEdge* pick = out[rng() % out.size()];
        sub.nodes[pick->to] = graph.nodes.at(pick->to);
        sub.edges.push_back(*pick);
        current = pick->to;
    }
    sub.marked_leaf_id = current;
    return sub;
}

// ------------------------------------------------------------ composition

json question_to_json(const SynthesizedQuestion& q) {
    json j{{"question_text", q.question_text},
           {"answer", q.answer},
           {"anchor_image", q.anchor_image},
           {"hop_count", q.hop_count}};
    j["provenance"] = json::array();
    for (const auto& e : q.provenance)
        j["provenance"].push_back(
            json{{"from", e.from}, {"relation", e.relation}, {"to", e.to}});
    return j;
}

QuerySeed extract_seed(const std::string& page_url, PageFetcher& fetcher,
                       ImageFetcher& image_fetcher, SummarizerClient& summarizer,
                       ChatClient& extractor, AssetStore& store) {
    InterleavedDocument doc = fetcher.fetch(page_url);
    SerializedDocument ser = intercept(doc, store, image_fetcher, summarizer);
    if (ser.images.empty())
        throw Error(Errc::no_qualifying_image,
                    "page has no registrable image with caption context: " + page_url);

    std::string response = extractor.complete(
        "You pick the core entity of a webpage and its most entity-defining image. The "
        "entity must be unique and unambiguous; the image must have a direct caption or "
        "rich surrounding context. Answer as JSON with fields: entity, image_uid, clue, "
        "visual_question, answer. If no unambiguous entity exists, answer {\"refusal\": "
        "\"<reason>\"}.",
        render(ser));

    json j;
    try {
        j = json::parse(response);
    } catch (const json::exception&) {
        throw Error(Errc::extractor_refusal, "extractor did not answer with JSON");
    }
    if (j.contains("refusal"))
        throw Error(Errc::extractor_refusal, j.at("refusal").get<std::string>());
    for (const char* field : {"entity", "image_uid", "clue", "visual_question", "answer"})
        if (!j.contains(field) || j.at(field).get<std::string>().empty())
            throw Error(Errc::extractor_refusal,
                        std::string("extractor answer is missing field: ") + field);

    QuerySeed seed;
    seed.webpage = std::move(ser);
    seed.core_entity = j.at("entity").get<std::string>();
    seed.anchor_image = j.at("image_uid").get<std::string>();
    seed.clue = j.at("clue").get<std::string>();
    seed.visual_question = j.at("visual_question").get<std::string>();
    seed.answer = j.at("answer").get<std::string>();

    bool on_page = false;
    for (const auto& img : seed.webpage.images)
        if (img.uid == seed.anchor_image) on_page = true;
    if (!on_page)
        throw Error(Errc::extractor_refusal,
                    "extractor chose an image that is not on the page: " + seed.anchor_image);
    return seed;
}

SynthesizedQuestion synthesize_single_hop(const QuerySeed& seed, ChatClient& composer) {
    std::string response = composer.complete(
        "You compose a question that can only be answered by looking at an image. Combine "
        "the clue (which identifies the entity indirectly) with the visual question, "
        "without naming information beyond the clue.",
        json{{"clue", seed.clue}, {"visual_question", seed.visual_question}}.dump());
    std::string q = trim(response);
    if (q.empty() || q.find(seed.clue) == std::string::npos ||
        to_lower(q).find("image") == std::string::npos)
        throw Error(Errc::composer_refusal,
                    "single-hop composition must restate the clue and reference the image");
    SynthesizedQuestion out;
    out.question_text = q;
    out.answer = seed.answer;
    out.anchor_image = seed.anchor_image;
    out.hop_count = 1;
    return out;
}

SynthesizedQuestion compose_multihop(const QuerySeed& seed, const KnowledgeGraph& subgraph,
                                     const std::string& leaf_image, ChatClient& composer) {
    if (!subgraph.nodes.count(subgraph.root_id))
        throw Error(Errc::invalid_argument, "subgraph does not contain the root entity");

    // Path from root to the marked leaf, rendered innermost-first so the
    // reasoning text concludes with the core entity.
    std::vector<const GraphEdge*> path;
    int cur = subgraph.root_id;
    while (cur != subgraph.marked_leaf_id) {
        const GraphEdge* next = nullptr;
        for (const auto& e : subgraph.edges)
            if (e.from == cur) next = &e;
        if (!next) break;
        path.push_back(next);
        cur = next->to;
    }

    std::string chain;
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
        const GraphEdge& e = **it;
        const GraphNode& from = subgraph.nodes.at(e.from);
        std::string from_desc = from.node_id == subgraph.root_id
                                    ? "the core entity"
                                    : from.fuzzed_as.value_or(from.entity);
        chain += fmt::format("- {} has {} leading to {}\n", from_desc, e.relation,
                             it + 1 == path.rend()
                                 ? "the entity shown in the attached image"
                                 : subgraph.nodes.at(e.to).fuzzed_as.value_or(
                                       subgraph.nodes.at(e.to).entity));
    }

    std::string response = composer.complete(
        "You rewrite a single-hop visual question into a multi-hop one by splicing in a "
        "reasoning chain that concludes at the original core entity. Never name a fuzzified "
        "entity directly; use its attribute description. The chain's final entity is shown "
        "only as an image.",
        json{{"base_question", seed.clue + " " + seed.visual_question}, {"chain", chain}}
            .dump());
    std::string q = trim(response);
    if (q.empty()) throw Error(Errc::composer_refusal, "composer returned no question");
    for (const auto& [id, node] : subgraph.nodes)
        if (node.fuzzed_as && q.find(node.entity) != std::string::npos)
            throw Error(Errc::composer_refusal,
                        "composition leaks a fuzzified entity name: " + node.entity);

    SynthesizedQuestion out;
    out.question_text = q;
    out.answer = seed.answer;
    out.anchor_image = leaf_image;
    out.hop_count = static_cast<int>(path.size()) + 1;
    for (const auto* e : path)
        out.provenance.push_back({subgraph.nodes.at(e->from).entity, e->relation,
                                  subgraph.nodes.at(e->to).entity});
    return out;
}

} // namespace mmagent
