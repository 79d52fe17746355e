#include "mmagent/model_client.hpp"

#include <chrono>
#include <thread>

#include <fmt/format.h>

#include "mmagent/errors.hpp"
#include "mmagent/http_util.hpp"
#include "mmagent/util.hpp"

namespace mmagent {

using nlohmann::json;

const char* role_name(Role r) {
    switch (r) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

Role role_from_name(const std::string& s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    if (s == "tool") return Role::tool;
    throw Error(Errc::io_error, "bad message role: " + s);
}

// ------------------------------------------------------------- scripted

ScriptedModelClient ScriptedModelClient::from_file(const std::string& path) {
    json j = json::parse(read_text_file(path));
    const json& arr = j.is_object() ? j.at("turns") : j;
    std::vector<std::string> turns;
    for (const auto& t : arr) turns.push_back(t.get<std::string>());
    return ScriptedModelClient(std::move(turns));
}

std::string ScriptedModelClient::complete(const std::vector<Message>&, const json&, AssetStore&) {
    if (next_ >= turns_.size())
        throw Error(Errc::model_unavailable,
                    fmt::format("scripted model exhausted after {} turns", turns_.size()));
    return turns_[next_++];
}

ScriptedChatClient ScriptedChatClient::from_file(const std::string& path) {
    json j = json::parse(read_text_file(path));
    const json& arr = j.is_object() ? j.at("responses") : j;
    std::vector<std::string> responses;
    for (const auto& t : arr) responses.push_back(t.get<std::string>());
    return ScriptedChatClient(std::move(responses));
}

std::string ScriptedChatClient::complete(const std::string&, const std::string&) {
    if (next_ >= responses_.size())
        throw Error(Errc::model_unavailable, "scripted chat client exhausted");
    return responses_[next_++];
}

// ----------------------------------------------------------------- http

static json message_payload(const Message& m, AssetStore& store) {
    json msg{{"role", role_name(m.role)}};
    if (m.images.empty()) {
        msg["content"] = m.text;
        return msg;
    }
    json parts = json::array();
    parts.push_back(json{{"type", "text"}, {"text", m.text}});
    for (const auto& uid : m.images) {
        VisualAsset a = store.resolve(uid);
        parts.push_back(json{
            {"type", "image_url"},
            {"image_url",
             {{"url", "data:" + a.media_type + ";base64," +
                          base64_encode(a.bytes.data(), a.bytes.size())}}}});
    }
    msg["content"] = std::move(parts);
    return msg;
}

static std::string fold_response_markup(const json& message) {
    std::string text;
    if (message.contains("content") && message.at("content").is_string())
        text = message.at("content").get<std::string>();
    if (message.contains("tool_calls") && message.at("tool_calls").is_array()) {
        for (const auto& tc : message.at("tool_calls")) {
            if (!tc.contains("function")) continue;
            const json& f = tc.at("function");
            json call{{"name", f.value("name", "")}};
            // OpenAI serializes arguments as a JSON string; unwrap if possible.
            if (f.contains("arguments") && f.at("arguments").is_string()) {
                try {
                    call["arguments"] = json::parse(f.at("arguments").get<std::string>());
                } catch (const json::exception&) {
                    call["arguments"] = f.at("arguments");
                }
            } else if (f.contains("arguments")) {
                call["arguments"] = f.at("arguments");
            } else {
                call["arguments"] = json::object();
            }
            text += "<tool_call>" + call.dump() + "</tool_call>";
        }
    }
    return text;
}

std::string HttpModelClient::complete(const std::vector<Message>& messages,
                                      const json& tool_schemas, AssetStore& store) {
    json body{{"messages", json::array()}};
    if (!model_.empty()) body["model"] = model_;
    for (const auto& m : messages) body["messages"].push_back(message_payload(m, store));
    if (tool_schemas.is_array() && !tool_schemas.empty()) {
        body["tools"] = tool_schemas;
        body["tool_choice"] = "auto";
    }

    std::map<std::string, std::string> headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;

    std::string last_error;
    for (int attempt = 0; attempt < max_retries_; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(250 << attempt));
        try {
            std::string resp = http_post_json(endpoint_, body.dump(), headers);
            json j = json::parse(resp);
            return fold_response_markup(j.at("choices").at(0).at("message"));
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw Error(Errc::model_unavailable,
                fmt::format("model endpoint failed after {} attempts: {}", max_retries_,
                            last_error));
}

std::string HttpChatClient::complete(const std::string& system_prompt,
                                     const std::string& user_prompt) {
    json body{{"messages",
               json::array({json{{"role", "system"}, {"content", system_prompt}},
                            json{{"role", "user"}, {"content", user_prompt}}})}};
    if (!model_.empty()) body["model"] = model_;
    std::map<std::string, std::string> headers;
    if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
    std::string resp = http_post_json(endpoint_, body.dump(), headers);
    json j = json::parse(resp);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

// --------------------------------------------------------------- parsing

std::vector<ToolCall> parse_tool_calls(const std::string& text) {
    std::vector<ToolCall> calls;
    const std::string open = "<tool_call>", close = "</tool_call>";
    size_t pos = 0;
    while (true) {
        size_t start = text.find(open, pos);
        if (start == std::string::npos) break;
        size_t end = text.find(close, start + open.size());
        if (end == std::string::npos) break;
        std::string body = trim(text.substr(start + open.size(), end - start - open.size()));
        ToolCall call;
        try {
            json j = json::parse(body);
            call.name = j.value("name", "");
            call.arguments = j.contains("arguments") ? j.at("arguments") : json::object();
        } catch (const json::exception&) {
            call.name = "";
            call.arguments = json{{"raw", body}};
        }
        calls.push_back(std::move(call));
        pos = end + close.size();
    }
    return calls;
}

std::optional<std::string> extract_boxed(const std::string& text) {
    const std::string marker = "boxed{";
    size_t best = std::string::npos;
    size_t pos = 0;
    while (true) {
        size_t p = text.find(marker, pos);
        if (p == std::string::npos) break;
        best = p;
        pos = p + marker.size();
    }
    if (best == std::string::npos) return std::nullopt;
    size_t i = best + marker.size();
    int depth = 1;
    std::string out;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (c == '{') ++depth;
        if (c == '}') {
            --depth;
            if (depth == 0) return trim(out);
        }
        out += c;
    }
    return std::nullopt; // unbalanced marker
}

} // namespace mmagent
