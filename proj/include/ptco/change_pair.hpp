#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptco/diff.hpp"
#include "ptco/errors.hpp"
#include "ptco/io.hpp"

namespace ptco {

using json = nlohmann::ordered_json;

enum class ChangeType { CREATE, DELETE, EDIT };

inline std::string to_string(ChangeType t) {
    switch (t) {
        case ChangeType::CREATE: return "CREATE";
        case ChangeType::DELETE: return "DELETE";
        case ChangeType::EDIT: return "EDIT";
    }
    return "EDIT";
}

inline ChangeType change_type_from_string(const std::string& s) {
    if (s == "CREATE") return ChangeType::CREATE;
    if (s == "DELETE") return ChangeType::DELETE;
    if (s == "EDIT") return ChangeType::EDIT;
    throw Error("unknown change type: " + s);
}

// Per-file change metadata: commit id plus the module/package/class that
// locate the source file in the tree.
struct ChangeMeta {
    std::string version;
    std::string module;
    std::string package;
    std::string class_name;
    ChangeType change_type = ChangeType::EDIT;
};

enum class PairLabel { POSITIVE, NEGATIVE, UNLABELED };

inline std::string to_string(PairLabel l) {
    switch (l) {
        case PairLabel::POSITIVE: return "POSITIVE";
        case PairLabel::NEGATIVE: return "NEGATIVE";
        case PairLabel::UNLABELED: return "UNLABELED";
    }
    return "UNLABELED";
}

inline PairLabel label_from_string(const std::string& s) {
    if (s == "POSITIVE") return PairLabel::POSITIVE;
    if (s == "NEGATIVE") return PairLabel::NEGATIVE;
    if (s == "UNLABELED") return PairLabel::UNLABELED;
    throw Error("unknown label: " + s);
}

// One mined co-evolution sample: the production method before/after the
// change and the paired test method before/after (the "after" side is absent
// for unlabeled or negative samples).
struct ChangePair {
    std::string group;
    std::string project;
    ChangeMeta change_p;
    ChangeMeta change_t;
    std::string prod_old;
    std::string prod_new;
    std::string test_old;
    std::optional<std::string> test_new;
    PairLabel label = PairLabel::UNLABELED;

    std::string prod_diff_text(std::size_t context_lines = 3) const {
        return render_diff_text(compute_diff(prod_old, prod_new), context_lines);
    }
    std::string test_diff_text(std::size_t context_lines = 3) const {
        return render_diff_text(compute_diff(test_old, test_new ? *test_new : test_old),
                                context_lines);
    }
};

inline json meta_to_json(const ChangeMeta& m) {
    return json{{"version", m.version},
                {"module", m.module},
                {"package", m.package},
                {"class", m.class_name},
                {"type", to_string(m.change_type)}};
}

inline ChangeMeta meta_from_json(const json& j) {
    ChangeMeta m;
    m.version = j.at("version").get<std::string>();
    m.module = j.at("module").get<std::string>();
    m.package = j.at("package").get<std::string>();
    m.class_name = j.at("class").get<std::string>();
    m.change_type = change_type_from_string(j.at("type").get<std::string>());
    return m;
}

inline json pair_to_json(const ChangePair& p) {
    json j{{"group", p.group},
           {"project", p.project},
           {"change_p", meta_to_json(p.change_p)},
           {"change_t", meta_to_json(p.change_t)},
           {"prod_old", p.prod_old},
           {"prod_new", p.prod_new},
           {"test_old", p.test_old}};
    if (p.test_new)
        j["test_new"] = *p.test_new;
    else
        j["test_new"] = nullptr;
    j["label"] = to_string(p.label);
    return j;
}

inline ChangePair pair_from_json(const json& j) {
    ChangePair p;
    p.group = j.at("group").get<std::string>();
    p.project = j.at("project").get<std::string>();
    p.change_p = meta_from_json(j.at("change_p"));
    p.change_t = meta_from_json(j.at("change_t"));
    p.prod_old = j.at("prod_old").get<std::string>();
    p.prod_new = j.at("prod_new").get<std::string>();
    p.test_old = j.at("test_old").get<std::string>();
    if (j.contains("test_new") && !j.at("test_new").is_null())
        p.test_new = j.at("test_new").get<std::string>();
    p.label = label_from_string(j.at("label").get<std::string>());
    return p;
}

inline std::string pairs_to_jsonl(const std::vector<ChangePair>& pairs) {
    std::string out;
    for (const ChangePair& p : pairs) {
        out += pair_to_json(p).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<ChangePair> pairs_from_jsonl(const std::string& content) {
    std::vector<ChangePair> pairs;
    for (const std::string& line : split_lines(content)) {
        if (trim(line).empty()) continue;
        pairs.push_back(pair_from_json(json::parse(line)));
    }
    return pairs;
}

inline std::vector<ChangePair> read_pairs_file(const std::filesystem::path& path) {
    return pairs_from_jsonl(read_file(path));
}

inline void write_pairs_file(const std::filesystem::path& path,
                             const std::vector<ChangePair>& pairs) {
    write_file_atomic(path, pairs_to_jsonl(pairs));
}

}  // namespace ptco
