#include "mmagent/dataset.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mmagent/errors.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

std::string normalize_answer(const std::string& s) {
    return collapse_ws(to_lower(trim(s)));
}

static bool numeric_equal(const std::string& a, const std::string& b) {
    try {
        size_t pa = 0, pb = 0;
        double da = std::stod(a, &pa);
        double db = std::stod(b, &pb);
        if (pa != a.size() || pb != b.size()) return false;
        return std::fabs(da - db) <= 1e-9 * std::max({1.0, std::fabs(da), std::fabs(db)});
    } catch (const std::exception&) {
        return false;
    }
}

bool ExactGrader::correct(const std::string& answer, const std::string& gold) {
    std::string a = normalize_answer(answer), g = normalize_answer(gold);
    if (a == g) return true;
    return numeric_equal(a, g);
}

bool JudgeGrader::correct(const std::string& answer, const std::string& gold) {
    std::string verdict = client_.complete(
        "You grade answers. Reply strictly 'yes' if the candidate answer matches the gold "
        "answer in meaning, otherwise 'no'.",
        json{{"candidate", answer}, {"gold", gold}}.dump());
    return to_lower(trim(verdict)).rfind("yes", 0) == 0;
}

std::map<std::string, ManifestItem> load_manifest(const std::string& path) {
    json j = json::parse(read_text_file(path));
    std::map<std::string, ManifestItem> out;
    for (const auto& it : j.at("items")) {
        ManifestItem m;
        m.task_id = it.at("task_id").get<std::string>();
        m.gold_answer = it.at("gold_answer").get<std::string>();
        m.source = it.value("source", "unknown");
        out[m.task_id] = std::move(m);
    }
    return out;
}

bool prefilter_query(const std::string& question, const std::vector<std::string>& images,
                     ModelClient& judge_model, AssetStore& store, const std::string& gold,
                     Grader& grader) {
    std::vector<Message> messages;
    Message sys;
    sys.role = Role::system;
    sys.text = "Answer the question directly and concisely. You have no tools; give your "
               "best answer as boxed{answer}.";
    messages.push_back(std::move(sys));
    Message user;
    user.role = Role::user;
    user.text = question;
    user.images = images;
    messages.push_back(std::move(user));

    try {
        std::string reply = judge_model.complete(messages, json::array(), store);
        std::string direct = extract_final_answer(reply).value_or(reply);
        // Keep the question only when search is actually needed.
        return !grader.correct(direct, gold);
    } catch (const std::exception&) {
        return true; // fail open: an unjudged question stays in the pool
    }
}

bool rejection_filter(const Trajectory& traj, const std::string& gold, Grader& grader,
                      const FilterCriteria& criteria) {
    if (traj.turns_used > criteria.max_turns) return false;
    if (traj.peak_context_tokens > criteria.max_context_tokens) return false;
    if (!criteria.require_success) return true;
    if (!traj.final_answer) return false;
    return grader.correct(*traj.final_answer, gold);
}

SftRecord export_sft(const Trajectory& traj, AssetStore& store,
                     const std::string& source_label) {
    SftRecord r;
    r.source_dataset = source_label;
    for (const auto& m : traj.messages) {
        for (const auto& uid : m.images)
            if (!store.contains(uid))
                throw Error(Errc::dangling_uid,
                            fmt::format("trajectory {} references unresolvable asset {}",
                                        traj.task_id, uid));
        // The record keeps only the training payload; loop bookkeeping
        // (eviction flags, turn indices) stays in the trajectory. Tool
        // attribution survives in tool_names.
        Message copy;
        copy.role = m.role;
        copy.text = m.text;
        copy.images = m.images;
        r.messages.push_back(std::move(copy));
        r.loss_mask.push_back(m.role == Role::assistant);
        if (m.role == Role::tool) {
            ++r.turns;
            r.tool_names.push_back(m.tool_name);
        }
    }
    return r;
}

json sft_to_json(const SftRecord& r) {
    json j;
    j["messages"] = json::array();
    for (const auto& m : r.messages)
        j["messages"].push_back(
            json{{"role", role_name(m.role)}, {"text", m.text}, {"images", m.images}});
    j["loss_mask"] = r.loss_mask;
    j["source_dataset"] = r.source_dataset;
    j["turns"] = r.turns;
    j["tool_names"] = r.tool_names;
    return j;
}

SftRecord sft_from_json(const json& j) {
    SftRecord r;
    for (const auto& mj : j.at("messages")) {
        Message m;
        m.role = role_from_name(mj.at("role").get<std::string>());
        m.text = mj.at("text").get<std::string>();
        m.images = mj.at("images").get<std::vector<std::string>>();
        r.messages.push_back(std::move(m));
    }
    r.loss_mask = j.at("loss_mask").get<std::vector<bool>>();
    r.source_dataset = j.at("source_dataset").get<std::string>();
    r.turns = j.at("turns").get<int>();
    r.tool_names = j.at("tool_names").get<std::vector<std::string>>();
    return r;
}

DatasetStats compute_stats(const std::vector<SftRecord>& records) {
    if (records.empty()) throw Error(Errc::empty_dataset, "no records to aggregate");
    DatasetStats s;
    std::map<std::string, std::pair<long long, long long>> acc; // source -> (count, turn sum)
    for (const auto& r : records) {
        auto& [count, turn_sum] = acc[r.source_dataset];
        ++count;
        turn_sum += r.turns;
        for (const auto& name : r.tool_names) ++s.tool_histogram[name];
        ++s.total;
    }
    for (const auto& [source, ct] : acc)
        s.per_source[source] = {ct.first, static_cast<double>(ct.second) / ct.first};
    return s;
}

json stats_to_json(const DatasetStats& s) {
    json j{{"total", s.total}};
    j["sources"] = json::object();
    for (const auto& [source, st] : s.per_source)
        j["sources"][source] = json{{"count", st.count}, {"avg_turns", st.avg_turns}};
    j["tool_histogram"] = s.tool_histogram;
    return j;
}

std::string render_stats_table(const DatasetStats& s) {
    size_t width = std::string("Source").size();
    for (const auto& [source, _] : s.per_source) width = std::max(width, source.size());
    std::string out = fmt::format("{:<{}}  {:>8}  {:>10}\n", "Source", width, "Samples",
                                  "Avg. Turns");
    double total_turns = 0;
    for (const auto& [source, st] : s.per_source) {
        out += fmt::format("{:<{}}  {:>8}  {:>10.2f}\n", source, width, st.count, st.avg_turns);
        total_turns += st.avg_turns * static_cast<double>(st.count);
    }
    out += fmt::format("{:<{}}  {:>8}  {:>10.2f}\n", "Total", width, s.total,
                       s.total ? total_turns / static_cast<double>(s.total) : 0.0);
    return out;
}

} // namespace mmagent
