#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmagent/agent.hpp"
#include "mmagent/dataset.hpp"

namespace mmagent {

struct BenchItem {
    std::string item_id;
    std::string question;
    std::vector<std::string> input_image_urls;
    std::string gold_answer;
    std::string benchmark_label;
};

std::vector<BenchItem> load_bench_items(const std::string& jsonl_path);

struct EvalRecord {
    std::string item_id;
    std::optional<std::string> final_answer;
    bool correct = false;
    int turns_used = 0;
    TerminatedBy terminated_by = TerminatedBy::error;
};

nlohmann::json eval_record_to_json(const EvalRecord& r);
EvalRecord eval_record_from_json(const nlohmann::json& j);
std::vector<EvalRecord> load_eval_records(const std::string& jsonl_path);

// Builds the per-item model client (replay runs script one model per item;
// live runs share an endpoint).
using ModelFactory = std::function<std::unique_ptr<ModelClient>(const BenchItem&)>;

// One run_task per item: inputs are fetched and registered, the loop runs,
// the answer is graded. Per-item failures become correct=false records with
// terminated_by=error — the sweep itself never aborts. Results keep item
// order regardless of `parallel` (grader and backends must be thread-safe
// when parallel > 1). Throws Errc::empty_benchmark for an empty item list.
std::vector<EvalRecord> run_benchmark(const std::vector<BenchItem>& items,
                                      const ModelFactory& make_model, Toolkit& toolkit,
                                      AssetStore& store, ImageFetcher& input_fetcher,
                                      const ContextPolicy& policy, Grader& grader,
                                      int parallel = 4);

// mean(correct) · 100 over the records.
double success_rate(const std::vector<EvalRecord>& records);

// Interaction-scaling curve: accuracy(N) counts a record as a success only
// when it is correct, self-terminated, and used at most N turns. Thresholds
// must be positive and ascending.
std::map<int, double> scaling_curve(const std::vector<EvalRecord>& records,
                                    const std::vector<int>& thresholds);

} // namespace mmagent
