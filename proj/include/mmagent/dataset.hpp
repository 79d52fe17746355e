#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmagent/agent.hpp"
#include "mmagent/model_client.hpp"

namespace mmagent {

// Answer grading. The default is normalized string equality with a numeric
// fallback; a judge-endpoint grader can be swapped in.
class Grader {
public:
    virtual ~Grader() = default;
    virtual bool correct(const std::string& answer, const std::string& gold) = 0;
};

class ExactGrader : public Grader {
public:
    bool correct(const std::string& answer, const std::string& gold) override;
};

class JudgeGrader : public Grader {
public:
    explicit JudgeGrader(ChatClient& client) : client_(client) {}
    bool correct(const std::string& answer, const std::string& gold) override;

private:
    ChatClient& client_;
};

// Case/whitespace normalization used by ExactGrader (exposed for tests).
std::string normalize_answer(const std::string& s);

// Acceptance bounds for teacher trajectories.
struct FilterCriteria {
    int max_turns = 40;
    long long max_context_tokens = 64000;
    bool require_success = true;
};

// Gold answers and source labels for a batch of tasks.
struct ManifestItem {
    std::string task_id;
    std::string gold_answer;
    std::string source;
};

std::map<std::string, ManifestItem> load_manifest(const std::string& path);

// True when the question should be kept for trajectory collection: the judge
// model, with tools withheld, fails to produce the gold answer directly.
// Judge failures keep the question (ambiguity is resolved downstream).
bool prefilter_query(const std::string& question, const std::vector<std::string>& images,
                     ModelClient& judge_model, AssetStore& store, const std::string& gold,
                     Grader& grader);

// Keep iff the trajectory answered correctly within the turn and context
// bounds (correctness check skipped when require_success is false).
bool rejection_filter(const Trajectory& traj, const std::string& gold, Grader& grader,
                      const FilterCriteria& criteria);

// One training record: the conversation with a per-message loss mask that is
// true exactly on assistant messages.
struct SftRecord {
    std::vector<Message> messages;
    std::vector<bool> loss_mask;
    std::string source_dataset;
    int turns = 0;                       // tool-role message count
    std::vector<std::string> tool_names; // one per tool-role message, in order
};

// Copies the trajectory conversation into an SftRecord. Every image UID must
// still resolve (Error(Errc::dangling_uid) otherwise — the record would not
// be self-contained).
SftRecord export_sft(const Trajectory& traj, AssetStore& store,
                     const std::string& source_label);

nlohmann::json sft_to_json(const SftRecord& r);
SftRecord sft_from_json(const nlohmann::json& j);

struct SourceStats {
    long long count = 0;
    double avg_turns = 0.0;
};

struct DatasetStats {
    std::map<std::string, SourceStats> per_source;
    std::map<std::string, long long> tool_histogram;
    long long total = 0;
};

// Per-source sample counts and mean tool-use turns plus a tool-name
// histogram. Throws Error(Errc::empty_dataset) on an empty input.
DatasetStats compute_stats(const std::vector<SftRecord>& records);

nlohmann::json stats_to_json(const DatasetStats& s);

// Plain-text table: one row per source with its sample count and average
// tool-use turns, plus a total row.
std::string render_stats_table(const DatasetStats& s);

} // namespace mmagent
