#include "mmagent/eval.hpp"

#include <atomic>
#include <fstream>
#include <thread>

#include "mmagent/errors.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

std::vector<BenchItem> load_bench_items(const std::string& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw Error(Errc::io_error, "cannot open " + jsonl_path);
    std::vector<BenchItem> items;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        BenchItem it;
        it.item_id = j.at("item_id").get<std::string>();
        it.question = j.at("question").get<std::string>();
        if (j.contains("input_image_urls"))
            it.input_image_urls = j.at("input_image_urls").get<std::vector<std::string>>();
        it.gold_answer = j.at("gold_answer").get<std::string>();
        it.benchmark_label = j.value("benchmark_label", "");
        items.push_back(std::move(it));
    }
    return items;
}

json eval_record_to_json(const EvalRecord& r) {
    json j{{"item_id", r.item_id},
           {"correct", r.correct},
           {"turns_used", r.turns_used},
           {"terminated_by", terminated_by_name(r.terminated_by)}};
    if (r.final_answer) j["final_answer"] = *r.final_answer;
    return j;
}

EvalRecord eval_record_from_json(const json& j) {
    EvalRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    if (j.contains("final_answer")) r.final_answer = j.at("final_answer").get<std::string>();
    r.correct = j.at("correct").get<bool>();
    r.turns_used = j.at("turns_used").get<int>();
    r.terminated_by = terminated_by_from_name(j.at("terminated_by").get<std::string>());
    return r;
}

std::vector<EvalRecord> load_eval_records(const std::string& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw Error(Errc::io_error, "cannot open " + jsonl_path);
    std::vector<EvalRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(eval_record_from_json(json::parse(line)));
    }
    return out;
}

std::vector<EvalRecord> run_benchmark(const std::vector<BenchItem>& items,
                                      const ModelFactory& make_model, Toolkit& toolkit,
                                      AssetStore& store, ImageFetcher& input_fetcher,
                                      const ContextPolicy& policy, Grader& grader,
                                      int parallel) {
    if (items.empty()) throw Error(Errc::empty_benchmark, "benchmark has no items");
    std::vector<EvalRecord> records(items.size());

    auto run_one = [&](size_t idx) {
        const BenchItem& item = items[idx];
        EvalRecord rec;
        rec.item_id = item.item_id;
        try {
            std::vector<std::string> uids;
            for (const auto& url : item.input_image_urls)
                uids.push_back(store.register_asset(input_fetcher.fetch(url), url,
                                                    "Original input image"));
            auto model = make_model(item);
            Trajectory traj = run_task(item.item_id, item.question, uids, *model, toolkit,
                                       store, policy);
            rec.final_answer = traj.final_answer;
            rec.turns_used = traj.turns_used;
            rec.terminated_by = traj.terminated_by;
            rec.correct = traj.final_answer &&
                          grader.correct(*traj.final_answer, item.gold_answer);
        } catch (const std::exception&) {
            rec.correct = false;
            rec.terminated_by = TerminatedBy::error;
        }
        records[idx] = std::move(rec);
    };

    int workers = std::max(1, parallel);
    if (workers == 1) {
        for (size_t i = 0; i < items.size(); ++i) run_one(i);
        return records;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            while (true) {
                size_t i = next.fetch_add(1);
                if (i >= items.size()) return;
                run_one(i);
            }
        });
    for (auto& t : pool) t.join();
    return records;
}

double success_rate(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw Error(Errc::empty_benchmark, "no evaluation records");
    long long correct = 0;
    for (const auto& r : records) correct += r.correct ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(records.size()) * 100.0;
}

std::map<int, double> scaling_curve(const std::vector<EvalRecord>& records,
                                    const std::vector<int>& thresholds) {
    for (size_t i = 0; i < thresholds.size(); ++i) {
        if (thresholds[i] <= 0)
            throw Error(Errc::invalid_argument, "turn thresholds must be positive");
        if (i > 0 && thresholds[i] < thresholds[i - 1])
            throw Error(Errc::invalid_argument, "turn thresholds must be ascending");
    }
    std::map<int, double> curve;
    for (int n : thresholds) {
        long long hits = 0;
        for (const auto& r : records)
            if (r.correct && r.terminated_by == TerminatedBy::self && r.turns_used <= n)
                ++hits;
        curve[n] = records.empty()
                       ? 0.0
                       : static_cast<double>(hits) / static_cast<double>(records.size()) * 100.0;
    }
    return curve;
}

} // namespace mmagent
