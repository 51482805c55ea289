#include "ptco/chat.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <thread>

#include "ptco/http_providers.hpp"
#include "ptco/io.hpp"

using namespace ptco;
namespace fs = std::filesystem;

namespace {

RetryPolicy fast_retry() {
    RetryPolicy r;
    r.initial_backoff = std::chrono::milliseconds(0);
    return r;
}

}  // namespace

TEST_CASE("scripted reply round trip grows memory by one exchange") {
    ScriptedChatProvider provider({"OK"});
    ConversationMemory memory(3);
    ChatTurn reply = send(provider, memory, {ChatRole::HUMAN, "ping"}, {});
    CHECK(reply.content == "OK");
    CHECK(reply.role == ChatRole::ASSISTANT);
    CHECK(memory.exchange_count() == 1);
}

TEST_CASE("window of 3 keeps system turn plus last three exchanges") {
    ScriptedChatProvider provider({"r1", "r2", "r3", "r4", "r5", "r6"});
    ConversationMemory memory(3);
    memory.set_system("you are a test assistant");
    for (int i = 1; i <= 5; ++i)
        send(provider, memory, {ChatRole::HUMAN, "q" + std::to_string(i)}, {});

    // sixth send: payload must carry system + exchanges 3,4,5 + new prompt
    send(provider, memory, {ChatRole::HUMAN, "q6"}, {});
    const auto& payload = provider.payload_log().back();
    REQUIRE(payload.size() == 1 + 2 * 3 + 1);
    CHECK(payload[0].role == ChatRole::SYSTEM);
    CHECK(payload[1].content == "q3");
    CHECK(payload[2].content == "r3");
    CHECK(payload[3].content == "q4");
    CHECK(payload[5].content == "q5");
    CHECK(payload[6].content == "r5");
    CHECK(payload[7].content == "q6");
}

TEST_CASE("payload never exceeds one system plus twice the window") {
    ScriptedChatProvider provider;
    for (int i = 0; i < 20; ++i) provider.push_reply("r");
    ConversationMemory memory(3);
    memory.set_system("sys");
    for (int i = 0; i < 20; ++i) {
        send(provider, memory, {ChatRole::HUMAN, "q"}, {});
        std::size_t history = provider.payload_log().back().size() - 1;  // minus new prompt
        CHECK(history <= 1 + 2 * memory.window_size());
    }
}

TEST_CASE("two timeouts then success makes exactly three attempts") {
    ScriptedChatProvider provider;
    provider.push_timeout();
    provider.push_timeout();
    provider.push_reply("finally");
    ConversationMemory memory(3);
    ChatTurn reply = send(provider, memory, {ChatRole::HUMAN, "q"}, {}, nullptr, fast_retry());
    CHECK(reply.content == "finally");
    CHECK(provider.call_count() == 3);
}

TEST_CASE("three timeouts exhaust the retry budget") {
    ScriptedChatProvider provider;
    for (int i = 0; i < 3; ++i) provider.push_timeout();
    ConversationMemory memory(3);
    CHECK_THROWS_AS(send(provider, memory, {ChatRole::HUMAN, "q"}, {}, nullptr, fast_retry()),
                    ProviderTimeout);
    CHECK(provider.call_count() == 3);
}

TEST_CASE("exhausted transcript is an error") {
    ScriptedChatProvider provider({"only"});
    ConversationMemory memory(3);
    send(provider, memory, {ChatRole::HUMAN, "q1"}, {});
    CHECK_THROWS_AS(send(provider, memory, {ChatRole::HUMAN, "q2"}, {}), ScriptedExhausted);
}

TEST_CASE("audit log is deterministic across identical runs") {
    fs::path dir = fs::temp_directory_path() / "ptco_audit";
    fs::remove_all(dir);
    fs::create_directories(dir);

    auto run = [&](const fs::path& path) {
        ScriptedChatProvider provider({"a1", "a2"});
        ConversationMemory memory(3);
        memory.set_system("sys");
        AuditLog audit(path);
        send(provider, memory, {ChatRole::HUMAN, "q1"}, {}, &audit);
        send(provider, memory, {ChatRole::HUMAN, "q2"}, {}, &audit);
    };
    run(dir / "one.jsonl");
    run(dir / "two.jsonl");
    CHECK(read_file(dir / "one.jsonl") == read_file(dir / "two.jsonl"));
    CHECK(read_file(dir / "one.jsonl").find("\"seq\":0") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("transcript files parse replies and timeouts") {
    fs::path path = fs::temp_directory_path() / "ptco_transcript.jsonl";
    write_file_atomic(path, "{\"reply\": \"hello\"}\n{\"timeout\": true}\n{\"reply\": \"bye\"}\n");
    ScriptedChatProvider provider = ScriptedChatProvider::from_file(path);
    ConversationMemory memory(3);
    CHECK(send(provider, memory, {ChatRole::HUMAN, "q"}, {}, nullptr, fast_retry()).content ==
          "hello");
    CHECK(send(provider, memory, {ChatRole::HUMAN, "q"}, {}, nullptr, fast_retry()).content ==
          "bye");
    CHECK(provider.call_count() == 3);  // timeout consumed one call
    fs::remove(path);
}

TEST_CASE("extract_code_block takes the first fenced block") {
    CHECK(extract_code_block("```\nfoo()\n```") == "foo()");
    CHECK(extract_code_block("text\n```java\nint x = 1;\nint y = 2;\n```\ntail") ==
          "int x = 1;\nint y = 2;");
    CHECK(extract_code_block("```\nfirst\n```\n```\nsecond\n```") == "first");
    CHECK(extract_code_block("  no fence here  ") == "no fence here");
    CHECK_THROWS_AS(extract_code_block("   \n \t"), EmptyReply);
}

TEST_CASE("chat wire contract carries sampling params and windowed messages") {
    httplib::Server server;
    nlohmann::json seen_body;
    std::string seen_auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = nlohmann::json::parse(req.body);
        auto it = req.headers.find("Authorization");
        seen_auth = it == req.headers.end() ? "" : it->second;
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "remote says hi"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpChatProvider provider("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions",
                              "test-model", "sekret");
    ConversationMemory memory(3);
    memory.set_system("sys prompt");
    SamplingParams params;  // defaults: 0 / 1 / 0 / 0
    ChatTurn reply = send(provider, memory, {ChatRole::HUMAN, "hello"}, params);

    CHECK(reply.content == "remote says hi");
    CHECK(seen_auth == "Bearer sekret");
    CHECK(seen_body.at("model") == "test-model");
    CHECK(seen_body.at("temperature") == 0.0);
    CHECK(seen_body.at("top_p") == 1.0);
    CHECK(seen_body.at("frequency_penalty") == 0.0);
    CHECK(seen_body.at("presence_penalty") == 0.0);
    REQUIRE(seen_body.at("messages").size() == 2);
    CHECK(seen_body.at("messages")[0].at("role") == "system");
    CHECK(seen_body.at("messages")[1].at("role") == "user");
    CHECK(seen_body.at("messages")[1].at("content") == "hello");

    server.stop();
    t.join();
}

TEST_CASE("embedding wire contract round trip") {
    httplib::Server server;
    nlohmann::json seen_body;
    server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        seen_body = nlohmann::json::parse(req.body);
        nlohmann::json reply = {{"data", nlohmann::json::array()}};
        for (std::size_t i = 0; i < seen_body.at("input").size(); ++i)
            reply["data"].push_back({{"embedding", {0.1 * (i + 1), 0.2, 0.3}}});
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    // the api key defaults from the environment
    nlohmann::json first_auth_seen;
    std::string seen_auth;
    server.Post("/v1/auth_probe", [&](const httplib::Request& req, httplib::Response& res) {
        auto it = req.headers.find("Authorization");
        seen_auth = it == req.headers.end() ? "" : it->second;
        res.set_content(R"({"data": [{"embedding": [1.0]}]})", "application/json");
    });
    setenv("PTCO_EMBED_API_KEY", "env-key", 1);
    HttpEmbeddingProvider env_provider(
        "http://127.0.0.1:" + std::to_string(port) + "/v1/auth_probe", "embed-model");
    env_provider.embed({"x"});
    CHECK(seen_auth == "Bearer env-key");
    unsetenv("PTCO_EMBED_API_KEY");

    HttpEmbeddingProvider provider("http://127.0.0.1:" + std::to_string(port) + "/v1/embeddings",
                                   "embed-model", "");
    auto vectors = provider.embed({"alpha", "beta"});
    REQUIRE(vectors.size() == 2);
    CHECK(vectors[0].dimension() == 3);
    CHECK(vectors[1].values[0] == Catch::Approx(0.2));
    CHECK(seen_body.at("model") == "embed-model");
    CHECK(seen_body.at("input") == nlohmann::json({"alpha", "beta"}));

    server.stop();
    t.join();

    // unreachable endpoint surfaces as a provider error
    HttpEmbeddingProvider dead("http://127.0.0.1:1/v1/embeddings", "embed-model", "");
    CHECK_THROWS_AS(dead.embed({"x"}), EmbeddingProviderError);
}
