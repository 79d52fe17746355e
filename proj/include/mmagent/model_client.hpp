#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmagent/asset_store.hpp"
#include "mmagent/toolkit.hpp"

namespace mmagent {

enum class Role { system, user, assistant, tool };

const char* role_name(Role r);
Role role_from_name(const std::string& s);

// One conversation entry. Assistant text may embed <think>...</think> and
// <tool_call>{...}</tool_call> markup; `images` lists assets whose pixels
// accompany the text when the message is sent to the model. `evicted` marks
// tool results whose payload was replaced by a placeholder.
struct Message {
    Role role = Role::user;
    std::string text;
    std::vector<std::string> images;
    bool evicted = false;
    // Tool-result bookkeeping (meaningful when role == tool).
    std::string tool_name;
    int turn_index = 0;
};

// A chat-completions endpoint that can drive the agent loop.
class ModelClient {
public:
    virtual ~ModelClient() = default;
    // Returns the next assistant turn as markup text. Throws
    // Error(Errc::model_unavailable) once retries are exhausted.
    virtual std::string complete(const std::vector<Message>& messages,
                                 const nlohmann::json& tool_schemas, AssetStore& store) = 0;
};

// Replays a fixed sequence of assistant turns; context is ignored. Running
// past the script throws Errc::model_unavailable.
class ScriptedModelClient : public ModelClient {
public:
    explicit ScriptedModelClient(std::vector<std::string> turns) : turns_(std::move(turns)) {}
    // Loads either a JSON array of strings or {"turns": [...]}.
    static ScriptedModelClient from_file(const std::string& path);

    std::string complete(const std::vector<Message>& messages,
                         const nlohmann::json& tool_schemas, AssetStore& store) override;

    size_t remaining() const { return turns_.size() - next_; }

private:
    std::vector<std::string> turns_;
    size_t next_ = 0;
};

// OpenAI-style chat completions with function calling. Native tool_calls in
// the response are folded back into <tool_call> markup so the loop sees one
// uniform format. Images are sent as base64 data URLs.
class HttpModelClient : public ModelClient {
public:
    HttpModelClient(std::string endpoint, std::string api_key, std::string model,
                    int max_retries = 3)
        : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)),
          model_(std::move(model)), max_retries_(max_retries) {}

    std::string complete(const std::vector<Message>& messages,
                         const nlohmann::json& tool_schemas, AssetStore& store) override;

private:
    std::string endpoint_;
    std::string api_key_;
    std::string model_;
    int max_retries_;
};

// Single-shot prompt→text client used by synthesis (extractor/composer) and
// graders.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::string& system_prompt, const std::string& user_prompt) = 0;
};

class ScriptedChatClient : public ChatClient {
public:
    explicit ScriptedChatClient(std::vector<std::string> responses)
        : responses_(std::move(responses)) {}
    static ScriptedChatClient from_file(const std::string& path);
    std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;

private:
    std::vector<std::string> responses_;
    size_t next_ = 0;
};

class HttpChatClient : public ChatClient {
public:
    HttpChatClient(std::string endpoint, std::string api_key, std::string model)
        : endpoint_(std::move(endpoint)), api_key_(std::move(api_key)), model_(std::move(model)) {}
    std::string complete(const std::string& system_prompt, const std::string& user_prompt) override;

private:
    std::string endpoint_;
    std::string api_key_;
    std::string model_;
};

// All <tool_call>...</tool_call> spans of an assistant turn, in order. A span
// whose JSON does not parse yields a ToolCall with an empty name and the raw
// text under arguments["raw"] — the loop turns those into error results.
std::vector<ToolCall> parse_tool_calls(const std::string& assistant_text);

// Content of the last boxed{...} marker (brace-balanced), if any.
std::optional<std::string> extract_boxed(const std::string& text);

} // namespace mmagent
