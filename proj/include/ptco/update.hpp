#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptco/change_pair.hpp"
#include "ptco/chat.hpp"
#include "ptco/diff.hpp"
#include "ptco/errors.hpp"
#include "ptco/knowledge_base.hpp"
#include "ptco/method_scan.hpp"
#include "ptco/validate.hpp"

namespace ptco {

enum class FeedbackKind { NONE, COMPILE_ERROR, TEST_FAILURE, COVERAGE_GAP };

inline std::string to_string(FeedbackKind k) {
    switch (k) {
        case FeedbackKind::NONE: return "NONE";
        case FeedbackKind::COMPILE_ERROR: return "COMPILE_ERROR";
        case FeedbackKind::TEST_FAILURE: return "TEST_FAILURE";
        case FeedbackKind::COVERAGE_GAP: return "COVERAGE_GAP";
    }
    return "NONE";
}

inline FeedbackKind feedback_kind_from_string(const std::string& s) {
    if (s == "NONE") return FeedbackKind::NONE;
    if (s == "COMPILE_ERROR") return FeedbackKind::COMPILE_ERROR;
    if (s == "TEST_FAILURE") return FeedbackKind::TEST_FAILURE;
    if (s == "COVERAGE_GAP") return FeedbackKind::COVERAGE_GAP;
    throw Error("unknown feedback kind: " + s);
}

// The single highest-priority failure of a report decides the feedback type:
// compile > test > coverage.
inline FeedbackKind feedback_for_level(QualityLevel level) {
    switch (level) {
        case QualityLevel::COMPILATION_FAILURE: return FeedbackKind::COMPILE_ERROR;
        case QualityLevel::TEST_FAILURE: return FeedbackKind::TEST_FAILURE;
        case QualityLevel::COVERAGE_FAILURE: return FeedbackKind::COVERAGE_GAP;
        case QualityLevel::SATISFIES_ALL: return FeedbackKind::NONE;
    }
    return FeedbackKind::NONE;
}

struct IterationRecord {
    std::size_t iteration = 1;
    std::string raw_reply;  // the model's reply the candidate was cut from
    std::string candidate_test;
    ValidationReport validation;
    FeedbackKind feedback_kind = FeedbackKind::NONE;
    std::string feedback_prompt;  // empty iff feedback_kind == NONE
};

enum class UpdateOutcome { SUCCESS, EXHAUSTED };

inline std::string to_string(UpdateOutcome o) {
    return o == UpdateOutcome::SUCCESS ? "SUCCESS" : "EXHAUSTED";
}

struct UpdateSession {
    std::string sample_id;
    std::string group;
    std::string project;
    PromptPair initial_prompt;
    std::string retrieved_entry_id;  // empty in zero-shot mode
    double retrieved_similarity = 0.0;
    bool zero_shot = false;
    std::size_t max_iterations = 8;
    std::vector<IterationRecord> iterations;
    UpdateOutcome outcome = UpdateOutcome::EXHAUSTED;
    std::optional<std::string> final_test;  // present iff SUCCESS

    QualityLevel best_level() const {
        QualityLevel best = QualityLevel::COMPILATION_FAILURE;
        for (const IterationRecord& it : iterations) best = std::max(best, it.validation.level);
        return best;
    }
};

struct UpdateOptions {
    std::size_t max_iterations = 8;
    bool zero_shot = false;
    std::size_t retrieval_k = 1;
    std::size_t prompt_budget = 16000;  // characters of the human message
    std::size_t window_size = 3;
    std::size_t diff_context = 3;
    SamplingParams params;
    RetryPolicy retry;
};

inline constexpr const char* kDiffTruncatedMarker = "«diff truncated»";

// Shortens a unified diff to at most `max_chars` by dropping whole hunks from
// the tail; lines are never cut mid-way.
inline std::string truncate_diff_tail(const std::string& diff_text, std::size_t max_chars) {
    if (diff_text.size() <= max_chars) return diff_text;
    std::string marker = std::string(kDiffTruncatedMarker) + "\n";

    std::vector<std::string> blocks;  // file header, then one block per hunk
    std::string current;
    for (const std::string& line : split_lines(diff_text)) {
        if (line.rfind("@@ ", 0) == 0 && !current.empty()) {
            blocks.push_back(current);
            current.clear();
        }
        current += line;
        current += '\n';
    }
    if (!current.empty()) blocks.push_back(current);

    std::string out;
    for (const std::string& block : blocks) {
        if (out.size() + block.size() + marker.size() > max_chars) break;
        out += block;
    }
    out += marker;
    return out;
}

// Few-shot update prompt: the production diff, the obsolete test, and (unless
// zero-shot) the retrieved sample's production and test diffs.
inline PromptPair render_update_prompt(const std::string& p, const std::string& p_new,
                                       const std::string& t, const KnowledgeEntry* sample,
                                       std::size_t prompt_budget = 16000,
                                       std::size_t diff_context = 3) {
    PromptPair prompt;
    prompt.system =
        "You are an expert test engineer. The production code has changed and the given test "
        "method is obsolete. Produce an updated test method that compiles, passes, and covers "
        "the changed production lines. Always reply with the complete updated test method "
        "inside a fenced code block.";

    std::string prod_diff = render_diff_text(compute_diff(p, p_new), diff_context);
    std::string sample_prod = sample ? sample->prod_diff_text : std::string{};
    std::string sample_test = sample ? sample->test_diff_text : std::string{};

    auto assemble = [&](const std::string& main_diff, const std::string& s_prod,
                        const std::string& s_test) {
        std::string human;
        human += "# Production code change\n";
        human += main_diff.empty() ? std::string(kNoProductionChange) + "\n" : main_diff;
        human += "\n# Obsolete test code\n";
        human += t;
        if (!t.empty() && t.back() != '\n') human += '\n';
        if (sample) {
            human += "\n# Similar historical example\n";
            human += "## Production change\n";
            human += s_prod.empty() ? std::string(kNoProductionChange) + "\n" : s_prod;
            human += "## Test update\n";
            human += s_test.empty() ? std::string(kNoProductionChange) + "\n" : s_test;
        }
        human +=
            "\nUpdate the obsolete test code so it stays consistent with the production "
            "change. Reply with the complete updated test method in a fenced code block.";
        return human;
    };

    prompt.human = assemble(prod_diff, sample_prod, sample_test);
    if (prompt.human.size() > prompt_budget) {
        // shrink diffs hunk-by-hunk from the tail, sample diffs first
        std::string* pieces[] = {&sample_test, &sample_prod, &prod_diff};
        for (std::string* piece : pieces) {
            if (prompt.human.size() <= prompt_budget) break;
            std::size_t over = prompt.human.size() - prompt_budget;
            std::size_t target = piece->size() > over ? piece->size() - over : 0;
            *piece = truncate_diff_tail(*piece, target);
            prompt.human = assemble(prod_diff, sample_prod, sample_test);
        }
    }
    return prompt;
}

// Feedback carrying the validator's findings back to the model. For coverage
// gaps the uncovered production lines are echoed with surrounding source from
// the post-change production text.
inline std::string render_feedback_prompt(FeedbackKind kind, const ValidationReport& validation,
                                          const std::string& prod_new = {}) {
    if (kind == FeedbackKind::NONE) throw Error("no feedback to render for a passing report");
    std::string text;
    switch (kind) {
        case FeedbackKind::COMPILE_ERROR: {
            text += "The candidate test failed to compile. Compiler diagnostics:\n";
            for (const std::string& d : validation.compile_diagnostics) text += d + "\n";
            text +=
                "\nFix the compilation errors and reply with the complete corrected test "
                "method in a fenced code block.";
            break;
        }
        case FeedbackKind::TEST_FAILURE: {
            text += "The candidate test compiled but failed when executed. Failing tests:\n";
            for (const TestResult& r : validation.test_results) {
                if (r.status == TestStatus::PASS) continue;
                text += "- " + r.name + " (" + to_string(r.status) + "): " + r.message + "\n";
            }
            text +=
                "\nFix the test logic so it passes against the changed production code and "
                "reply with the complete test method in a fenced code block.";
            break;
        }
        case FeedbackKind::COVERAGE_GAP: {
            text +=
                "The candidate test compiled and passed, but it does not cover these changed "
                "production lines:\n";
            std::vector<std::string> prod_lines = split_lines(prod_new);
            std::size_t lo = 0, hi = 0;
            const std::vector<LineRef>& gap =
                validation.coverage ? validation.coverage->gap : std::vector<LineRef>{};
            for (const LineRef& ref : gap) {
                text += "- line " + std::to_string(ref.line);
                if (ref.line >= 1 && ref.line <= prod_lines.size())
                    text += ": " + prod_lines[ref.line - 1];
                text += "\n";
                if (lo == 0 || ref.line < lo) lo = ref.line;
                hi = std::max(hi, ref.line);
            }
            if (lo > 0 && !prod_lines.empty() && lo <= prod_lines.size()) {
                text += "\nSurrounding production code:\n";
                std::size_t from = lo > 2 ? lo - 2 : 1;
                std::size_t to = std::min(prod_lines.size(), hi + 2);
                for (std::size_t n = from; n <= to; ++n)
                    text += std::to_string(n) + " | " + prod_lines[n - 1] + "\n";
            }
            text +=
                "\nStrengthen the test so it exercises every listed line and reply with the "
                "complete test method in a fenced code block.";
            break;
        }
        case FeedbackKind::NONE: break;
    }
    return text;
}

// Changed executable production lines, keyed the way coverage reports name
// files (package path slash class file). Pair snapshots are method texts, so
// the diff's line numbers are method-relative; when a workspace holding the
// post-change tree is given, they are translated to file-absolute positions.
inline std::set<LineRef> changed_production_lines(const ChangePair& pair,
                                                  const std::filesystem::path& workspace = {}) {
    CodeDiff diff = compute_diff(pair.prod_old, pair.prod_new);
    std::set<std::size_t> executable = executable_lines(pair.prod_new);
    std::string file = pair.change_p.package;
    std::replace(file.begin(), file.end(), '.', '/');
    if (!file.empty()) file += "/";
    file += pair.change_p.class_name + ".java";

    std::size_t offset = 0;
    if (!workspace.empty()) {
        namespace fs = std::filesystem;
        std::string pkg_path = pair.change_p.package;
        std::replace(pkg_path.begin(), pkg_path.end(), '.', '/');
        fs::path base = workspace;
        if (!pair.change_p.module.empty()) base /= pair.change_p.module;
        std::string filename = pair.change_p.class_name + ".java";
        fs::path source_file;
        for (const fs::path& candidate :
             {base / "src/main/java" / pkg_path / filename, base / "src/main" / pkg_path / filename,
              base / pkg_path / filename}) {
            if (fs::exists(candidate)) {
                source_file = candidate;
                break;
            }
        }
        if (!source_file.empty()) {
            try {
                auto methods = scan_methods(pair.prod_new);
                if (!methods.empty()) {
                    auto in_file =
                        find_method(read_file(source_file), methods.front().name,
                                    static_cast<long>(methods.front().arity));
                    if (in_file) offset = in_file->start_line - 1;
                }
            } catch (const Error&) {
            }
        }
    }

    std::set<LineRef> refs;
    for (std::size_t line : diff.changed_lines_new)
        if (executable.count(line)) refs.insert({file, line + offset});
    return refs;
}

// Drives Update(p, p', t): generate, validate, feed the highest-priority
// failure back, until SATISFIES_ALL or the iteration cutoff.
inline UpdateSession update(const ChangePair& pair, const KnowledgeBase* kb,
                            EmbeddingProvider* embedder, ChatProvider& provider,
                            ValidationAdapter& validator,
                            const std::filesystem::path& workspace = {},
                            const UpdateOptions& options = {}, AuditLog* audit = nullptr,
                            std::string sample_id = {}) {
    UpdateSession session;
    session.sample_id = std::move(sample_id);
    session.group = pair.group;
    session.project = pair.project;
    session.zero_shot = options.zero_shot;
    session.max_iterations = options.max_iterations;
    if (options.max_iterations < 1) throw Error("max_iterations must be >= 1");

    const KnowledgeEntry* sample = nullptr;
    if (!options.zero_shot) {
        if (!kb || !embedder)
            throw Error("update needs a knowledge base and embedder unless zero-shot");
        auto hits = kb->retrieve(pair.prod_diff_text(options.diff_context), *embedder,
                                 options.retrieval_k);
        sample = hits.front().entry;
        session.retrieved_entry_id = sample->entry_id;
        session.retrieved_similarity = hits.front().similarity;
    }

    ValidationTarget target;
    target.module = pair.change_t.module;
    target.package = pair.change_t.package;
    target.class_name = pair.change_t.class_name;
    try {
        auto methods = scan_methods(pair.test_old);
        if (!methods.empty()) target.method = methods.front().name;
    } catch (const Error&) {
    }
    if (target.method.empty()) target.method = "test";

    std::set<LineRef> changed_lines = changed_production_lines(pair, workspace);

    PromptPair prompt = render_update_prompt(pair.prod_old, pair.prod_new, pair.test_old, sample,
                                             options.prompt_budget, options.diff_context);
    session.initial_prompt = prompt;
    ConversationMemory memory(options.window_size);
    memory.set_system(prompt.system);

    std::string next_human = prompt.human;
    for (std::size_t k = 1; k <= options.max_iterations; ++k) {
        ChatTurn reply = send(provider, memory, {ChatRole::HUMAN, next_human}, options.params,
                              audit, options.retry);
        IterationRecord record;
        record.iteration = k;
        record.raw_reply = reply.content;
        record.candidate_test = extract_code_block(reply.content);
        record.validation =
            validator.validate(workspace, record.candidate_test, target, changed_lines);
        record.feedback_kind = feedback_for_level(record.validation.level);
        if (record.feedback_kind == FeedbackKind::NONE) {
            session.final_test = record.candidate_test;
            session.outcome = UpdateOutcome::SUCCESS;
            session.iterations.push_back(std::move(record));
            return session;
        }
        record.feedback_prompt =
            render_feedback_prompt(record.feedback_kind, record.validation, pair.prod_new);
        next_human = record.feedback_prompt;
        session.iterations.push_back(std::move(record));
    }
    session.outcome = UpdateOutcome::EXHAUSTED;
    return session;
}

inline nlohmann::ordered_json session_to_json(const UpdateSession& s) {
    nlohmann::ordered_json j;
    j["sample_id"] = s.sample_id;
    j["group"] = s.group;
    j["project"] = s.project;
    j["initial_prompt"] = {{"system", s.initial_prompt.system},
                           {"human", s.initial_prompt.human}};
    j["zero_shot"] = s.zero_shot;
    if (s.retrieved_entry_id.empty()) {
        j["retrieved"] = nullptr;
    } else {
        j["retrieved"] = {{"entry_id", s.retrieved_entry_id},
                          {"similarity", s.retrieved_similarity}};
    }
    j["max_iterations"] = s.max_iterations;
    j["outcome"] = to_string(s.outcome);
    if (s.final_test)
        j["final_test"] = *s.final_test;
    else
        j["final_test"] = nullptr;
    j["iterations"] = nlohmann::ordered_json::array();
    for (const IterationRecord& it : s.iterations) {
        j["iterations"].push_back({{"iteration", it.iteration},
                                   {"raw_reply", it.raw_reply},
                                   {"candidate_test", it.candidate_test},
                                   {"feedback_kind", to_string(it.feedback_kind)},
                                   {"feedback_prompt", it.feedback_prompt},
                                   {"validation", report_to_json(it.validation)}});
    }
    return j;
}

inline UpdateSession session_from_json(const nlohmann::json& j) {
    UpdateSession s;
    s.sample_id = j.value("sample_id", "");
    s.group = j.value("group", "");
    s.project = j.value("project", "");
    if (j.contains("initial_prompt")) {
        s.initial_prompt.system = j.at("initial_prompt").value("system", "");
        s.initial_prompt.human = j.at("initial_prompt").value("human", "");
    }
    s.zero_shot = j.value("zero_shot", false);
    if (j.contains("retrieved") && !j.at("retrieved").is_null()) {
        s.retrieved_entry_id = j.at("retrieved").at("entry_id").get<std::string>();
        s.retrieved_similarity = j.at("retrieved").at("similarity").get<double>();
    }
    s.max_iterations = j.value("max_iterations", std::size_t{8});
    s.outcome = j.at("outcome").get<std::string>() == "SUCCESS" ? UpdateOutcome::SUCCESS
                                                                : UpdateOutcome::EXHAUSTED;
    if (j.contains("final_test") && !j.at("final_test").is_null())
        s.final_test = j.at("final_test").get<std::string>();
    for (const auto& it : j.at("iterations")) {
        IterationRecord r;
        r.iteration = it.at("iteration").get<std::size_t>();
        r.raw_reply = it.value("raw_reply", "");
        r.candidate_test = it.at("candidate_test").get<std::string>();
        r.feedback_kind = feedback_kind_from_string(it.at("feedback_kind").get<std::string>());
        r.feedback_prompt = it.value("feedback_prompt", "");
        r.validation = report_from_json(it.at("validation"));
        s.iterations.push_back(std::move(r));
    }
    return s;
}

}  // namespace ptco
