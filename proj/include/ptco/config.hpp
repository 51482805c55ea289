#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include "ptco/chat.hpp"
#include "ptco/errors.hpp"
#include "ptco/io.hpp"
#include "ptco/text.hpp"
#include "ptco/validate.hpp"

namespace ptco {

// Run configuration: a flat key = value file ('#' comments). Secrets never
// live here; API keys come from PTCO_CHAT_API_KEY / PTCO_EMBED_API_KEY.
struct RunConfig {
    // chat provider
    std::string chat_provider = "http";  // "http" or "scripted:<transcript>"
    std::string chat_endpoint = "https://api.openai.com/v1/chat/completions";
    std::string chat_model = "gpt-4";

    // embedding provider
    std::string embed_provider = "hashing";  // "hashing" or "http"
    std::string embed_endpoint = "https://api.openai.com/v1/embeddings";
    std::string embed_model = "text-embedding-ada-002";
    std::size_t embed_dimension = 256;

    SamplingParams sampling;
    std::size_t window_size = 3;

    std::size_t block_size = 50;

    std::size_t max_iterations = 8;
    std::size_t retrieval_k = 1;
    bool zero_shot = false;
    std::size_t prompt_budget = 16000;
    std::size_t concurrency = 1;

    // validation adapter
    std::string adapter_kind = "commands";  // commands | maven | scripted
    std::string adapter_script;             // scripted reports file
    CommandAdapterConfig adapter;

    std::filesystem::path workspace_root;
    std::filesystem::path workspace_repo;  // repository cloned per session
    std::filesystem::path audit_path;

    static RunConfig load(const std::filesystem::path& path) {
        RunConfig config;
        config.apply_file(path);
        return config;
    }

    void apply_file(const std::filesystem::path& path) {
        for (const std::string& raw : split_lines(read_file(path))) {
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;
            std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line is not key = value: " + line);
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    void set(const std::string& key, const std::string& value) {
        auto to_count = [&](const std::string& v) -> std::size_t {
            try {
                return static_cast<std::size_t>(std::stoull(v));
            } catch (...) {
                throw ConfigError("expected a number for " + key + ", got: " + v);
            }
        };
        auto to_real = [&](const std::string& v) -> double {
            try {
                return std::stod(v);
            } catch (...) {
                throw ConfigError("expected a number for " + key + ", got: " + v);
            }
        };
        auto to_bool = [&](const std::string& v) -> bool {
            if (v == "true" || v == "1" || v == "yes") return true;
            if (v == "false" || v == "0" || v == "no") return false;
            throw ConfigError("expected true/false for " + key + ", got: " + v);
        };

        if (key == "chat.provider") chat_provider = value;
        else if (key == "chat.endpoint") chat_endpoint = value;
        else if (key == "chat.model") chat_model = value;
        else if (key == "embed.provider") embed_provider = value;
        else if (key == "embed.endpoint") embed_endpoint = value;
        else if (key == "embed.model") embed_model = value;
        else if (key == "embed.dimension") embed_dimension = to_count(value);
        else if (key == "sampling.temperature") sampling.temperature = to_real(value);
        else if (key == "sampling.top_p") sampling.top_p = to_real(value);
        else if (key == "sampling.frequency_penalty") sampling.frequency_penalty = to_real(value);
        else if (key == "sampling.presence_penalty") sampling.presence_penalty = to_real(value);
        else if (key == "memory.window_size") window_size = to_count(value);
        else if (key == "kb.block_size") block_size = to_count(value);
        else if (key == "update.max_iterations") max_iterations = to_count(value);
        else if (key == "update.retrieval_k") retrieval_k = to_count(value);
        else if (key == "update.zero_shot") zero_shot = to_bool(value);
        else if (key == "update.prompt_budget") prompt_budget = to_count(value);
        else if (key == "update.concurrency") concurrency = to_count(value);
        else if (key == "adapter.kind") adapter_kind = value;
        else if (key == "adapter.script") adapter_script = value;
        else if (key == "adapter.compile_cmd") adapter.compile_cmd = value;
        else if (key == "adapter.test_cmd") adapter.test_cmd = value;
        else if (key == "adapter.coverage_cmd") adapter.coverage_cmd = value;
        else if (key == "adapter.report_path") adapter.report_path = value;
        else if (key == "adapter.coverage_format") {
            if (value == "xml") adapter.coverage_format = CoverageFormat::XML_LINE_REPORT;
            else if (value == "lcov") adapter.coverage_format = CoverageFormat::LCOV_TEXT;
            else throw ConfigError("adapter.coverage_format must be xml or lcov");
        } else if (key == "adapter.coverage_mode") {
            if (value == "all") adapter.require_all_lines = true;
            else if (value == "any") adapter.require_all_lines = false;
            else throw ConfigError("adapter.coverage_mode must be all or any");
        } else if (key == "timeouts.stage_seconds") {
            adapter.stage_timeout = std::chrono::seconds(to_count(value));
        } else if (key == "workspace.root") workspace_root = value;
        else if (key == "workspace.repo") workspace_repo = value;
        else if (key == "audit.path") audit_path = value;
        else throw ConfigError("unknown config key: " + key);
    }
};

}  // namespace ptco
