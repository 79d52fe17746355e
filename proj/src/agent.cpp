#include "mmagent/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "mmagent/errors.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

const std::string& default_summarization_prompt() {
    static const std::string p =
        "Summarize the above conversation, and output the FINAL ANSWER to the original "
        "question. If a clear answer has already been provided earlier in the conversation, "
        "do not rethink or recalculate it — simply extract that answer and reformat it to "
        "match the required format below. If a definitive answer could not be determined, "
        "make a well-informed educated guess based on the conversation. Output the final "
        "answer as boxed{answer}.";
    return p;
}

const std::string& default_system_prompt() {
    static const std::string p =
        "You are a multimodal deep-search agent. Solve the user's question by reasoning "
        "step by step and using the available tools. Write your reasoning inside "
        "<think>...</think>. Issue at most one tool call per turn, formatted as "
        "<tool_call>{\"name\": ..., \"arguments\": {...}}</tool_call>. Search results "
        "reference images by URL; load an image's pixels with fetch_image, and inspect "
        "details with zoom_in. When you know the final answer, output it as boxed{answer}.";
    return p;
}

const char* terminated_by_name(TerminatedBy t) {
    switch (t) {
        case TerminatedBy::self: return "self";
        case TerminatedBy::turn_budget: return "turn_budget";
        case TerminatedBy::context_budget: return "context_budget";
        case TerminatedBy::error: return "error";
    }
    return "error";
}

TerminatedBy terminated_by_from_name(const std::string& s) {
    if (s == "self") return TerminatedBy::self;
    if (s == "turn_budget") return TerminatedBy::turn_budget;
    if (s == "context_budget") return TerminatedBy::context_budget;
    if (s == "error") return TerminatedBy::error;
    throw Error(Errc::io_error, "bad termination mode: " + s);
}

static long long default_token_count(const std::string& text) {
    return static_cast<long long>((text.size() + 3) / 4);
}

long long count_context(const std::vector<Message>& messages, const ContextPolicy& policy) {
    long long total = 0;
    for (const auto& m : messages) {
        total += policy.token_counter ? policy.token_counter(m.text)
                                      : default_token_count(m.text);
        total += policy.image_token_cost * static_cast<long long>(m.images.size());
    }
    return total;
}

static std::string eviction_placeholder(const Message& m) {
    std::string s = fmt::format("[evicted tool result (turn {}, {})", m.turn_index,
                                m.tool_name.empty() ? "tool" : m.tool_name);
    if (!m.images.empty()) {
        s += " images:";
        for (const auto& uid : m.images) s += " " + uid;
    }
    s += "]";
    return s;
}

std::vector<Message> apply_eviction(std::vector<Message> messages, const ContextPolicy& policy) {
    std::vector<size_t> tool_indices;
    for (size_t i = 0; i < messages.size(); ++i)
        if (messages[i].role == Role::tool) tool_indices.push_back(i);

    size_t keep = static_cast<size_t>(std::max(policy.keep_recent_k, 0));
    if (tool_indices.size() <= keep) return messages;

    for (size_t j = 0; j + keep < tool_indices.size(); ++j) {
        Message& m = messages[tool_indices[j]];
        if (m.evicted) continue;
        std::string placeholder = eviction_placeholder(m);
        // The original body is an acceptable stand-in only if it already
        // names every asset the result carried; otherwise the placeholder is
        // mandatory so no UID becomes unreachable.
        bool body_names_all_uids = true;
        for (const auto& uid : m.images)
            if (m.text.find(uid) == std::string::npos) body_names_all_uids = false;
        if (!(body_names_all_uids && m.text.size() <= placeholder.size()))
            m.text = std::move(placeholder);
        m.images.clear();
        m.evicted = true;
    }
    return messages;
}

std::optional<std::string> extract_final_answer(const std::string& assistant_text) {
    if (auto boxed = extract_boxed(assistant_text)) return boxed;
    if (parse_tool_calls(assistant_text).empty()) return assistant_text;
    return std::nullopt;
}

namespace {

Message make_message(Role role, std::string text, std::vector<std::string> images = {}) {
    Message m;
    m.role = role;
    m.text = std::move(text);
    m.images = std::move(images);
    return m;
}

std::string result_summary(const ToolResult& r) {
    return utf8_truncate(single_line(r.text), 200);
}

const std::string& summarization_prompt(const ContextPolicy& policy) {
    return policy.forced_summarization_prompt.empty() ? default_summarization_prompt()
                                                      : policy.forced_summarization_prompt;
}

} // namespace

Trajectory run_task(const std::string& task_id, const std::string& question,
                    const std::vector<std::string>& input_images, ModelClient& model,
                    Toolkit& toolkit, AssetStore& store, const ContextPolicy& policy) {
    Trajectory traj;
    traj.task_id = task_id;
    traj.question = question;
    traj.input_images = input_images;

    std::vector<Message>& messages = traj.messages;
    messages.push_back(make_message(Role::system, default_system_prompt()));

    std::string opening = question;
    for (const auto& uid : input_images) {
        opening += "\nImage URL: [" + uid + "]";
        try {
            if (auto cap = store.resolve(uid).caption)
                opening += "  Description: [" + *cap + "]";
        } catch (const std::exception&) {
            // leave the bare UID line; materialization below will surface it
        }
    }
    // The task's own images are pinned into the first user message; eviction
    // never touches user messages, so they stay available all run.
    messages.push_back(make_message(Role::user, opening, input_images));

    const json schemas = Toolkit::tool_schemas();
    bool summarization_used = false;
    int turns = 0;
    auto note_peak = [&](long long tokens) {
        traj.peak_context_tokens = std::max(traj.peak_context_tokens, tokens);
    };

    while (true) {
        if (turns == policy.max_turns) {
            // Turn budget exhausted: one grace exchange to extract whatever
            // answer the conversation already supports. The grace call is
            // not a search turn and does not count toward turns_used.
            messages = apply_eviction(messages, policy);
            messages.push_back(make_message(Role::user, summarization_prompt(policy)));
            long long tokens = count_context(messages, policy);
            note_peak(tokens);
            if (tokens > policy.max_context_tokens) {
                traj.terminated_by = TerminatedBy::context_budget;
                break;
            }
            try {
                std::string text = model.complete(messages, schemas, store);
                messages.push_back(make_message(Role::assistant, text));
                traj.final_answer = extract_final_answer(text);
                traj.terminated_by = TerminatedBy::turn_budget;
            } catch (const std::exception&) {
                traj.terminated_by = TerminatedBy::error;
            }
            break;
        }

        messages = apply_eviction(messages, policy);
        long long tokens = count_context(messages, policy);
        note_peak(tokens);
        if (tokens > policy.max_context_tokens) {
            traj.terminated_by = TerminatedBy::context_budget;
            break;
        }

        std::string text;
        try {
            text = model.complete(messages, schemas, store);
        } catch (const std::exception&) {
            traj.terminated_by = TerminatedBy::error;
            break;
        }
        ++turns;
        messages.push_back(make_message(Role::assistant, text));

        if (auto boxed = extract_boxed(text)) {
            traj.final_answer = boxed;
            traj.terminated_by = TerminatedBy::self;
            break;
        }

        std::vector<ToolCall> calls = parse_tool_calls(text);
        if (calls.empty()) {
            if (!summarization_used) {
                // No tool call and no final-answer marker: nudge the model
                // once to wrap up, then keep looping.
                summarization_used = true;
                messages.push_back(make_message(Role::user, summarization_prompt(policy)));
                continue;
            }
            traj.final_answer = text;
            traj.terminated_by = TerminatedBy::self;
            break;
        }

        ToolResult result;
        if (calls.size() > 1) {
            result.is_error = true;
            result.text = fmt::format(
                "received {} tool calls in one turn; issue exactly one tool call per turn and "
                "retry",
                calls.size());
            result.tool_name = canonical_tool_name(calls[0].name);
            if (result.tool_name.empty()) result.tool_name = calls[0].name;
            result.turn_index = turns;
        } else if (calls[0].name.empty()) {
            result.is_error = true;
            result.text = "malformed tool call: arguments are not valid JSON";
            result.tool_name = "malformed";
            result.turn_index = turns;
        } else {
            result = toolkit.dispatch(calls[0], turns);
        }

        Message tool_msg = make_message(Role::tool, result.text, result.materialized_images);
        tool_msg.tool_name = result.tool_name;
        tool_msg.turn_index = turns;
        messages.push_back(std::move(tool_msg));

        TrajectoryToolCall rec;
        rec.turn = turns;
        rec.call = calls[0];
        rec.result_summary = result_summary(result);
        rec.is_error = result.is_error;
        traj.tool_calls.push_back(std::move(rec));
    }

    traj.turns_used = turns;
    return traj;
}

// ------------------------------------------------------------ persistence

json trajectory_to_json(const Trajectory& t) {
    json j;
    j["task_id"] = t.task_id;
    j["question"] = t.question;
    j["input_images"] = t.input_images;
    j["messages"] = json::array();
    for (const auto& m : t.messages) {
        json mj{{"role", role_name(m.role)}, {"text", m.text}, {"images", m.images},
                {"evicted", m.evicted}};
        if (m.role == Role::tool) {
            mj["tool_name"] = m.tool_name;
            mj["turn_index"] = m.turn_index;
        }
        j["messages"].push_back(std::move(mj));
    }
    j["tool_calls"] = json::array();
    for (const auto& tc : t.tool_calls) {
        j["tool_calls"].push_back(json{{"turn", tc.turn},
                                       {"name", tc.call.name},
                                       {"arguments", tc.call.arguments},
                                       {"result_summary", tc.result_summary},
                                       {"is_error", tc.is_error}});
    }
    if (t.final_answer) j["final_answer"] = *t.final_answer;
    j["terminated_by"] = terminated_by_name(t.terminated_by);
    j["turns_used"] = t.turns_used;
    j["peak_context_tokens"] = t.peak_context_tokens;
    if (t.success) j["success"] = *t.success;
    return j;
}

Trajectory trajectory_from_json(const json& j) {
    Trajectory t;
    t.task_id = j.at("task_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    t.input_images = j.at("input_images").get<std::vector<std::string>>();
    for (const auto& mj : j.at("messages")) {
        Message m;
        m.role = role_from_name(mj.at("role").get<std::string>());
        m.text = mj.at("text").get<std::string>();
        m.images = mj.at("images").get<std::vector<std::string>>();
        m.evicted = mj.at("evicted").get<bool>();
        if (mj.contains("tool_name")) m.tool_name = mj.at("tool_name").get<std::string>();
        if (mj.contains("turn_index")) m.turn_index = mj.at("turn_index").get<int>();
        t.messages.push_back(std::move(m));
    }
    for (const auto& tj : j.at("tool_calls")) {
        TrajectoryToolCall tc;
        tc.turn = tj.at("turn").get<int>();
        tc.call.name = tj.at("name").get<std::string>();
        tc.call.arguments = tj.at("arguments");
        tc.result_summary = tj.at("result_summary").get<std::string>();
        tc.is_error = tj.at("is_error").get<bool>();
        t.tool_calls.push_back(std::move(tc));
    }
    if (j.contains("final_answer")) t.final_answer = j.at("final_answer").get<std::string>();
    t.terminated_by = terminated_by_from_name(j.at("terminated_by").get<std::string>());
    t.turns_used = j.at("turns_used").get<int>();
    t.peak_context_tokens = j.at("peak_context_tokens").get<long long>();
    if (j.contains("success")) t.success = j.at("success").get<bool>();
    return t;
}

void append_trajectory(const Trajectory& t, const std::string& jsonl_path) {
    append_line(jsonl_path, trajectory_to_json(t).dump());
}

std::vector<Trajectory> load_trajectories(const std::string& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw Error(Errc::io_error, "cannot open " + jsonl_path);
    std::vector<Trajectory> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(trajectory_from_json(json::parse(line)));
    }
    return out;
}

} // namespace mmagent
