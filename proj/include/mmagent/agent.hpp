#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmagent/model_client.hpp"
#include "mmagent/toolkit.hpp"

namespace mmagent {

// Budgets and context-management knobs for one agent run.
struct ContextPolicy {
    int max_turns = 30;
    int keep_recent_k = 5;           // tool results kept at full fidelity
    long long max_context_tokens = 128000;
    long long image_token_cost = 1024; // charge per materialized image
    // Optional custom text→token counter; the default is ceil(bytes/4).
    std::function<long long(const std::string&)> token_counter;
    std::string forced_summarization_prompt; // empty → built-in default
};

// The built-in forced-summarization user prompt injected when the model must
// wrap up (turn budget reached, or a turn arrived with neither a tool call
// nor a final answer).
const std::string& default_summarization_prompt();
const std::string& default_system_prompt();

enum class TerminatedBy { self, turn_budget, context_budget, error };
const char* terminated_by_name(TerminatedBy t);
TerminatedBy terminated_by_from_name(const std::string& s);

struct TrajectoryToolCall {
    int turn = 0;
    ToolCall call;
    std::string result_summary;
    bool is_error = false;
};

// Complete record of one agent run.
struct Trajectory {
    std::string task_id;
    std::string question;
    std::vector<std::string> input_images;
    std::vector<Message> messages;
    std::vector<TrajectoryToolCall> tool_calls;
    std::optional<std::string> final_answer;
    TerminatedBy terminated_by = TerminatedBy::error;
    int turns_used = 0;
    long long peak_context_tokens = 0;
    std::optional<bool> success;
};

// Tokens the current message list would occupy: per-message text under the
// policy counter plus a fixed charge per materialized image. Placeholders of
// evicted messages count — they stay in context.
long long count_context(const std::vector<Message>& messages, const ContextPolicy& policy);

// Keep-recent-K: all but the newest keep_recent_k tool results lose their
// payload. Each evicted message keeps a line that preserves its turn index,
// tool name and every asset UID it carried (or the original body verbatim
// when that is shorter than the placeholder — context never grows under
// eviction). Pixels are always dropped. Non-tool messages are untouched.
std::vector<Message> apply_eviction(std::vector<Message> messages, const ContextPolicy& policy);

// Final-answer extraction from one assistant turn: the last boxed{...}
// content if present; otherwise the whole text when the turn makes no tool
// call; otherwise nothing.
std::optional<std::string> extract_final_answer(const std::string& assistant_text);

// Runs the full loop: model turn → (at most one) tool call → tool result,
// with eviction before every model call, until the model answers, a budget
// trips, or the endpoint dies. Never throws for tool failures — those are
// fed back as error results.
Trajectory run_task(const std::string& task_id, const std::string& question,
                    const std::vector<std::string>& input_images, ModelClient& model,
                    Toolkit& toolkit, AssetStore& store, const ContextPolicy& policy);

nlohmann::json trajectory_to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

void append_trajectory(const Trajectory& t, const std::string& jsonl_path);
std::vector<Trajectory> load_trajectories(const std::string& jsonl_path);

} // namespace mmagent
