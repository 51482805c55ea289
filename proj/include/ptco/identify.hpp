#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptco/change_pair.hpp"
#include "ptco/chat.hpp"
#include "ptco/diff.hpp"
#include "ptco/errors.hpp"
#include "ptco/io.hpp"

namespace ptco {

enum class ExperienceKind { ABSTRACTION_LEVEL, PARAMETER_INDEPENDENCE, CONSISTENCY_PRODUCTION };

inline std::string to_string(ExperienceKind k) {
    switch (k) {
        case ExperienceKind::ABSTRACTION_LEVEL: return "ABSTRACTION_LEVEL";
        case ExperienceKind::PARAMETER_INDEPENDENCE: return "PARAMETER_INDEPENDENCE";
        case ExperienceKind::CONSISTENCY_PRODUCTION: return "CONSISTENCY_PRODUCTION";
    }
    return "ABSTRACTION_LEVEL";
}

inline ExperienceKind experience_kind_from_string(const std::string& s) {
    if (s == "ABSTRACTION_LEVEL") return ExperienceKind::ABSTRACTION_LEVEL;
    if (s == "PARAMETER_INDEPENDENCE") return ExperienceKind::PARAMETER_INDEPENDENCE;
    if (s == "CONSISTENCY_PRODUCTION") return ExperienceKind::CONSISTENCY_PRODUCTION;
    throw Error("unknown experience kind: " + s);
}

// Short tag used inside prompts: AL / PI / CP.
inline std::string experience_tag(ExperienceKind k) {
    switch (k) {
        case ExperienceKind::ABSTRACTION_LEVEL: return "AL";
        case ExperienceKind::PARAMETER_INDEPENDENCE: return "PI";
        case ExperienceKind::CONSISTENCY_PRODUCTION: return "CP";
    }
    return "AL";
}

// One generalized identification rule distilled from training samples.
struct Experience {
    std::string experience_id;
    ExperienceKind kind = ExperienceKind::ABSTRACTION_LEVEL;
    std::string statement;
    int round = 1;
};

inline void write_experiences(const std::filesystem::path& path,
                              const std::vector<Experience>& experiences) {
    json arr = json::array();
    for (const Experience& e : experiences)
        arr.push_back({{"experience_id", e.experience_id},
                       {"kind", to_string(e.kind)},
                       {"statement", e.statement},
                       {"round", e.round}});
    write_file_atomic(path, arr.dump(2) + "\n");
}

inline std::vector<Experience> read_experiences(const std::filesystem::path& path) {
    json arr = json::parse(read_file(path));
    std::vector<Experience> out;
    for (const auto& j : arr) {
        Experience e;
        e.experience_id = j.at("experience_id").get<std::string>();
        e.kind = experience_kind_from_string(j.at("kind").get<std::string>());
        e.statement = j.at("statement").get<std::string>();
        e.round = j.at("round").get<int>();
        out.push_back(std::move(e));
    }
    return out;
}

enum class Decision { NOT_OBSOLETE = 0, OBSOLETE = 1 };

struct IdentificationVerdict {
    Decision decision = Decision::NOT_OBSOLETE;
    std::string explanation;
    std::string rendered_prompt;  // verbatim human message for audit
    std::string raw_reply;
};

namespace detail {

inline std::string sample_digest(const ChangePair& pair, std::size_t index) {
    std::string text = "## Sample " + std::to_string(index) + " (" + to_string(pair.label) + ")\n";
    text += "### Production change\n";
    std::string prod = pair.prod_diff_text();
    text += prod.empty() ? std::string(kNoProductionChange) + "\n" : prod;
    text += "### Test change\n";
    if (pair.label == PairLabel::POSITIVE) {
        text += pair.test_diff_text();
    } else {
        text += "«test unchanged»\n";
    }
    return text;
}

// Accepts exactly `VERDICT: YES|NO` (case-insensitive) on the final non-empty
// line.
inline std::optional<Decision> parse_verdict_line(const std::string& reply) {
    std::vector<std::string> lines = split_lines(reply);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string line = trim(*it);
        if (line.empty()) continue;
        std::string lowered = to_lower(line);
        if (lowered == "verdict: yes" || lowered == "verdict:yes") return Decision::OBSOLETE;
        if (lowered == "verdict: no" || lowered == "verdict:no") return Decision::NOT_OBSOLETE;
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace detail

inline PromptPair render_identification_prompt(const std::string& p, const std::string& p_new,
                                               const std::string& t,
                                               const std::vector<Experience>& experiences) {
    if (experiences.empty()) throw Error("identification prompt needs at least one experience");

    PromptPair prompt;
    prompt.system =
        "You are an experienced software maintenance engineer. Given a production code "
        "change and an existing test method, you judge whether the test has become obsolete "
        "and must be updated. Apply the numbered experience rules. Explain your reasoning, "
        "then end your reply with a final line of exactly VERDICT: YES (the test must be "
        "updated) or VERDICT: NO (the test remains valid).";

    std::string diff_text = render_diff_text(compute_diff(p, p_new));
    std::string& human = prompt.human;
    human += "# Production code change\n";
    human += diff_text.empty() ? std::string(kNoProductionChange) + "\n" : diff_text;
    human += "\n# Test code\n";
    human += t;
    if (!t.empty() && t.back() != '\n') human += '\n';
    human += "\n# Experience\n";
    for (std::size_t i = 0; i < experiences.size(); ++i) {
        human += std::to_string(i + 1) + ". [" + experience_tag(experiences[i].kind) + "] " +
                 experiences[i].statement + "\n";
    }
    human +=
        "\nDecide whether the test code must be updated to stay consistent with the "
        "production change. Give your explanation, then finish with the final line "
        "VERDICT: YES or VERDICT: NO.";
    return prompt;
}

// Identify(p, p', t): queries the provider and parses the mandated verdict
// line, reprompting once before giving up.
inline IdentificationVerdict identify(const std::string& p, const std::string& p_new,
                                      const std::string& t,
                                      const std::vector<Experience>& experiences,
                                      ChatProvider& provider, const SamplingParams& params,
                                      AuditLog* audit = nullptr, std::size_t window_size = 3,
                                      const RetryPolicy& retry = {}) {
    PromptPair prompt = render_identification_prompt(p, p_new, t, experiences);
    ConversationMemory memory(window_size);
    memory.set_system(prompt.system);

    ChatTurn reply = send(provider, memory, {ChatRole::HUMAN, prompt.human}, params, audit, retry);
    std::optional<Decision> decision = detail::parse_verdict_line(reply.content);
    if (!decision) {
        ChatTurn retry_prompt{ChatRole::HUMAN,
                              "Your previous reply did not end with the mandated verdict line. "
                              "Reply again and end with exactly one final line: VERDICT: YES or "
                              "VERDICT: NO."};
        reply = send(provider, memory, retry_prompt, params, audit, retry);
        decision = detail::parse_verdict_line(reply.content);
        if (!decision)
            throw UnparseableVerdict("reply did not contain a final VERDICT: YES|NO line");
    }

    IdentificationVerdict verdict;
    verdict.decision = *decision;
    verdict.rendered_prompt = prompt.human;
    verdict.raw_reply = reply.content;

    // explanation: the reply minus its verdict line
    std::vector<std::string> lines = split_lines(reply.content);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (!lines.empty()) lines.pop_back();
    verdict.explanation = trim(join_lines(lines, false));
    return verdict;
}

// Distills >= 1 experience per kind from labeled training pairs, refining the
// statements over `max_rounds` rounds. Requires at least two samples of each
// label.
inline std::vector<Experience> learn_experience(const std::vector<ChangePair>& training_pairs,
                                                ChatProvider& provider, int max_rounds = 1,
                                                const SamplingParams& params = {},
                                                AuditLog* audit = nullptr,
                                                const std::filesystem::path& save_path = {},
                                                const RetryPolicy& retry = {}) {
    std::vector<const ChangePair*> positives;
    std::vector<const ChangePair*> negatives;
    for (const ChangePair& p : training_pairs) {
        if (p.label == PairLabel::POSITIVE) positives.push_back(&p);
        if (p.label == PairLabel::NEGATIVE) negatives.push_back(&p);
    }
    if (positives.size() < 2 || negatives.size() < 2)
        throw InsufficientSamples("experience learning needs >= 2 samples per label, got " +
                                  std::to_string(positives.size()) + " positive / " +
                                  std::to_string(negatives.size()) + " negative");
    if (max_rounds < 1) throw Error("max_rounds must be >= 1");

    std::string samples_section;
    std::size_t index = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(4, positives.size()); ++i)
        samples_section += detail::sample_digest(*positives[i], index++);
    for (std::size_t i = 0; i < std::min<std::size_t>(4, negatives.size()); ++i)
        samples_section += detail::sample_digest(*negatives[i], index++);

    const std::string system_text =
        "You distill generalized experience rules for deciding when a production-code change "
        "makes existing test code obsolete. You always answer with exactly three lines, "
        "starting with 'AL:', 'PI:' and 'CP:'.";

    std::vector<Experience> experiences;
    for (int round = 1; round <= max_rounds; ++round) {
        std::string human;
        if (round == 1) {
            human +=
                "Below are labeled co-evolution samples. POSITIVE means the test code had to "
                "be updated, NEGATIVE means it remained valid.\n\n";
        } else {
            human += "Current rules:\n";
            for (const Experience& e : experiences)
                human += experience_tag(e.kind) + ": " + e.statement + "\n";
            human += "\nRefine the rules using the same samples, keeping what works.\n\n";
        }
        human += samples_section;
        human +=
            "\nDerive three generalized rules:\n"
            "AL: when a change in abstraction level makes tests obsolete.\n"
            "PI: when parameter changes leave tests valid because their independence is kept.\n"
            "CP: when changes consistent with existing production patterns leave tests valid.\n"
            "Reply with exactly three lines starting with 'AL:', 'PI:' and 'CP:'.";

        ConversationMemory memory(3);
        memory.set_system(system_text);
        ChatTurn reply = send(provider, memory, {ChatRole::HUMAN, human}, params, audit, retry);

        auto statement_of = [&](const std::string& tag) -> std::string {
            for (const std::string& line : split_lines(reply.content)) {
                std::string t = trim(line);
                if (t.rfind(tag + ":", 0) == 0) return trim(t.substr(tag.size() + 1));
            }
            throw MalformedResponse("experience reply lacks a '" + tag + ":' line");
        };

        experiences.clear();
        const ExperienceKind kinds[] = {ExperienceKind::ABSTRACTION_LEVEL,
                                        ExperienceKind::PARAMETER_INDEPENDENCE,
                                        ExperienceKind::CONSISTENCY_PRODUCTION};
        for (ExperienceKind kind : kinds) {
            Experience e;
            e.kind = kind;
            e.round = round;
            e.experience_id = experience_tag(kind) + "-" + std::to_string(round);
            e.statement = statement_of(experience_tag(kind));
            if (e.statement.empty()) throw MalformedResponse("empty experience statement");
            experiences.push_back(std::move(e));
        }
        if (!save_path.empty()) write_experiences(save_path, experiences);
    }
    return experiences;
}

inline json verdict_to_json(const IdentificationVerdict& v) {
    return json{{"decision", v.decision == Decision::OBSOLETE ? "OBSOLETE" : "NOT_OBSOLETE"},
                {"explanation", v.explanation},
                {"rendered_prompt", v.rendered_prompt},
                {"raw_reply", v.raw_reply}};
}

}  // namespace ptco
