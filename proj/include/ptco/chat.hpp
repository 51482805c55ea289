#pragma once

#include <chrono>
#include <deque>
#include <mutex>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ptco/errors.hpp"
#include "ptco/text.hpp"

namespace ptco {

// Marker embedded in prompts when the production code did not change.
inline constexpr const char* kNoProductionChange = "«no production change»";

// A rendered prompt: the system message plus one human message.
struct PromptPair {
    std::string system;
    std::string human;
};

enum class ChatRole { SYSTEM, HUMAN, ASSISTANT };

inline std::string to_string(ChatRole r) {
    switch (r) {
        case ChatRole::SYSTEM: return "system";
        case ChatRole::HUMAN: return "human";
        case ChatRole::ASSISTANT: return "assistant";
    }
    return "human";
}

struct ChatTurn {
    ChatRole role = ChatRole::HUMAN;
    std::string content;
};

struct SamplingParams {
    double temperature = 0.0;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
};

// Windowed short-term memory: the system turn is always kept; only the most
// recent `window_size` human/assistant exchange pairs are carried.
class ConversationMemory {
public:
    explicit ConversationMemory(std::size_t window_size = 3) : window_size_(window_size) {}

    void set_system(std::string content) { system_ = ChatTurn{ChatRole::SYSTEM, std::move(content)}; }
    const std::optional<ChatTurn>& system() const { return system_; }
    std::size_t window_size() const { return window_size_; }

    // Turns that would accompany `prompt` on the wire.
    std::vector<ChatTurn> outbound_payload(const ChatTurn& prompt) const {
        std::vector<ChatTurn> payload;
        if (system_) payload.push_back(*system_);
        std::size_t start =
            exchanges_.size() > window_size_ ? exchanges_.size() - window_size_ : 0;
        for (std::size_t i = start; i < exchanges_.size(); ++i) {
            payload.push_back(exchanges_[i].first);
            payload.push_back(exchanges_[i].second);
        }
        payload.push_back(prompt);
        return payload;
    }

    void record(ChatTurn prompt, ChatTurn reply) {
        exchanges_.emplace_back(std::move(prompt), std::move(reply));
        while (exchanges_.size() > window_size_) exchanges_.pop_front();
    }

    std::size_t exchange_count() const { return exchanges_.size(); }

private:
    std::size_t window_size_;
    std::optional<ChatTurn> system_;
    std::deque<std::pair<ChatTurn, ChatTurn>> exchanges_;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    // Returns the assistant reply for one outbound payload. Throws
    // ProviderTimeout (retryable), ProviderRejection or MalformedResponse.
    virtual ChatTurn complete(const std::vector<ChatTurn>& payload,
                              const SamplingParams& params) = 0;
};

// Deterministic test double: a FIFO queue of canned replies. A queue entry may
// also direct the provider to simulate a timeout. Every payload received is
// kept for inspection.
class ScriptedChatProvider final : public ChatProvider {
public:
    struct Entry {
        bool timeout = false;
        std::string reply;
    };

    ScriptedChatProvider() = default;
    explicit ScriptedChatProvider(std::vector<std::string> replies) {
        for (std::string& r : replies) entries_.push_back({false, std::move(r)});
    }

    void push_reply(std::string reply) { entries_.push_back({false, std::move(reply)}); }
    void push_timeout() { entries_.push_back({true, {}}); }

    ChatTurn complete(const std::vector<ChatTurn>& payload, const SamplingParams&) override {
        payload_log_.push_back(payload);
        if (next_ >= entries_.size())
            throw ScriptedExhausted("scripted transcript exhausted after " +
                                    std::to_string(entries_.size()) + " entries");
        const Entry& e = entries_[next_++];
        if (e.timeout) throw ProviderTimeout("scripted timeout");
        return ChatTurn{ChatRole::ASSISTANT, e.reply};
    }

    std::size_t call_count() const { return payload_log_.size(); }
    const std::vector<std::vector<ChatTurn>>& payload_log() const { return payload_log_; }

    // Transcript file: JSON Lines, each {"reply": text} or {"timeout": true}.
    static ScriptedChatProvider from_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read transcript: " + path.string());
        ScriptedChatProvider provider;
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            if (j.value("timeout", false))
                provider.push_timeout();
            else
                provider.push_reply(j.at("reply").get<std::string>());
        }
        return provider;
    }

private:
    std::vector<Entry> entries_;
    std::size_t next_ = 0;
    std::vector<std::vector<ChatTurn>> payload_log_;
};

// Append-only JSON Lines trail of every raw request/response. Records carry a
// sequence number, never wall-clock time, so reruns are byte-identical. Safe
// to share across concurrent sessions.
class AuditLog {
public:
    explicit AuditLog(const std::filesystem::path& path) : out_(path, std::ios::app) {
        if (!out_) throw Error("cannot open audit log: " + path.string());
    }

    void append(const nlohmann::ordered_json& record) {
        std::lock_guard<std::mutex> lock(mutex_);
        nlohmann::ordered_json j;
        j["seq"] = seq_++;
        j.update(record);
        out_ << j.dump() << '\n';
        out_.flush();
    }

private:
    std::mutex mutex_;
    std::ofstream out_;
    std::size_t seq_ = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{200};
    int backoff_multiplier = 2;
};

// Sends one prompt: windows the memory into a payload, calls the provider
// (retrying timeouts with exponential backoff), records the exchange and the
// audit trail, and returns the assistant reply.
inline ChatTurn send(ChatProvider& provider, ConversationMemory& memory, const ChatTurn& prompt,
                     const SamplingParams& params, AuditLog* audit = nullptr,
                     const RetryPolicy& retry = {}) {
    if (prompt.role != ChatRole::HUMAN) throw Error("prompt must be a human turn");
    if (prompt.content.empty()) throw Error("prompt content must be non-empty");

    std::vector<ChatTurn> payload = memory.outbound_payload(prompt);
    ChatTurn reply;
    std::chrono::milliseconds backoff = retry.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            reply = provider.complete(payload, params);
            break;
        } catch (const ProviderTimeout&) {
            if (attempt >= retry.max_attempts) throw;
            std::this_thread::sleep_for(backoff);
            backoff *= retry.backoff_multiplier;
        }
    }
    if (reply.role != ChatRole::ASSISTANT || reply.content.empty())
        throw MalformedResponse("provider returned an empty or non-assistant reply");

    if (audit) {
        nlohmann::ordered_json messages = nlohmann::ordered_json::array();
        for (const ChatTurn& t : payload)
            messages.push_back({{"role", to_string(t.role)}, {"content", t.content}});
        audit->append({{"kind", "chat"},
                       {"request",
                        {{"messages", messages},
                         {"temperature", params.temperature},
                         {"top_p", params.top_p},
                         {"frequency_penalty", params.frequency_penalty},
                         {"presence_penalty", params.presence_penalty}}},
                       {"response", reply.content}});
    }
    memory.record(prompt, reply);
    return reply;
}

// Content of the first fenced code block; a fenceless reply is returned
// trimmed.
inline std::string extract_code_block(const std::string& reply) {
    if (trim(reply).empty()) throw EmptyReply("reply is empty");
    std::vector<std::string> lines = split_lines(reply);
    std::size_t open = lines.size();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).rfind("```", 0) == 0) {
            open = i;
            break;
        }
    }
    if (open == lines.size()) return trim(reply);
    std::string block;
    for (std::size_t i = open + 1; i < lines.size(); ++i) {
        if (trim(lines[i]).rfind("```", 0) == 0) break;
        block += lines[i];
        block += '\n';
    }
    if (!block.empty()) block.pop_back();
    return block;
}

}  // namespace ptco
