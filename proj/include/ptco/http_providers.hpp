#pragma once

// HTTP-backed chat and embedding providers. Kept in a separate header so the
// (large) httplib include is paid only by code that actually talks to remote
// services.

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ptco/chat.hpp"
#include "ptco/embed.hpp"
#include "ptco/errors.hpp"

namespace ptco {

namespace detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /v1/...
};

inline SplitUrl split_url(const std::string& url) {
    std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint must include a scheme: " + url);
    std::size_t slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

inline std::string env_or_empty(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

}  // namespace detail

// Chat wire contract: POST {"model", "messages", "temperature", "top_p",
// "frequency_penalty", "presence_penalty"}; the reply carries
// choices[0].message.content.
class HttpChatProvider final : public ChatProvider {
public:
    HttpChatProvider(std::string endpoint_url, std::string model,
                     std::string api_key = detail::env_or_empty("PTCO_CHAT_API_KEY"))
        : url_(detail::split_url(endpoint_url)),
          model_(std::move(model)),
          api_key_(std::move(api_key)) {}

    ChatTurn complete(const std::vector<ChatTurn>& payload, const SamplingParams& params) override {
        nlohmann::ordered_json body;
        body["model"] = model_;
        nlohmann::ordered_json messages = nlohmann::ordered_json::array();
        for (const ChatTurn& t : payload)
            messages.push_back({{"role", wire_role(t.role)}, {"content", t.content}});
        body["messages"] = messages;
        body["temperature"] = params.temperature;
        body["top_p"] = params.top_p;
        body["frequency_penalty"] = params.frequency_penalty;
        body["presence_penalty"] = params.presence_penalty;

        httplib::Client client(url_.base);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post(url_.path, headers, body.dump(), "application/json");
        if (!res) throw ProviderTimeout("chat endpoint unreachable: " + url_.base);
        if (res->status == 408 || res->status == 429 || res->status >= 500)
            throw ProviderTimeout("chat endpoint returned status " + std::to_string(res->status));
        if (res->status != 200)
            throw ProviderRejection("chat endpoint returned status " +
                                    std::to_string(res->status) + ": " + res->body);
        try {
            auto j = nlohmann::json::parse(res->body);
            return ChatTurn{ChatRole::ASSISTANT,
                            j.at("choices").at(0).at("message").at("content").get<std::string>()};
        } catch (const nlohmann::json::exception& e) {
            throw MalformedResponse(std::string("chat reply not understood: ") + e.what());
        }
    }

private:
    static std::string wire_role(ChatRole r) {
        switch (r) {
            case ChatRole::SYSTEM: return "system";
            case ChatRole::HUMAN: return "user";
            case ChatRole::ASSISTANT: return "assistant";
        }
        return "user";
    }

    detail::SplitUrl url_;
    std::string model_;
    std::string api_key_;
};

// Embedding wire contract: POST {"input": [texts], "model"}; the reply carries
// data[i].embedding.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(std::string endpoint_url, std::string model,
                          std::string api_key = detail::env_or_empty("PTCO_EMBED_API_KEY"))
        : url_(detail::split_url(endpoint_url)),
          model_(std::move(model)),
          api_key_(std::move(api_key)) {}

    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
        nlohmann::ordered_json body;
        body["input"] = texts;
        body["model"] = model_;

        httplib::Client client(url_.base);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post(url_.path, headers, body.dump(), "application/json");
        if (!res) throw EmbeddingProviderError("embedding endpoint unreachable: " + url_.base);
        if (res->status != 200)
            throw EmbeddingProviderError("embedding endpoint returned status " +
                                         std::to_string(res->status) + ": " + res->body);
        try {
            auto j = nlohmann::json::parse(res->body);
            std::vector<EmbeddingVector> out;
            for (const auto& item : j.at("data"))
                out.push_back(EmbeddingVector{item.at("embedding").get<std::vector<double>>()});
            if (out.size() != texts.size())
                throw EmbeddingProviderError("embedding count mismatch");
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw EmbeddingProviderError(std::string("embedding reply not understood: ") +
                                         e.what());
        }
    }

    std::string id() const override { return "http:" + model_; }

private:
    detail::SplitUrl url_;
    std::string model_;
    std::string api_key_;
};

}  // namespace ptco
