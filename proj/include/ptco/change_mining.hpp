#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ptco/change_pair.hpp"
#include "ptco/diff.hpp"
#include "ptco/errors.hpp"
#include "ptco/method_scan.hpp"
#include "ptco/subprocess.hpp"
#include "ptco/text.hpp"

namespace ptco {

// Production↔test pairing conventions. Defaults follow the Maven layout:
// a test class `XTest`/`TestX` in a mirrored package pairs with class `X`,
// with a reference-based fallback.
struct PairingConfig {
    std::vector<std::string> source_extensions{".java"};
    std::vector<std::string> test_suffixes{"Test", "Tests"};
    std::vector<std::string> test_prefixes{"Test"};
    std::vector<std::string> test_path_markers{"/src/test/", "/test/"};
    bool reference_fallback = true;
    bool mine_negatives = true;
    std::string group = "local";
    std::string project;  // defaults to the repository directory name
};

struct MiningResult {
    std::vector<ChangePair> pairs;
    std::vector<std::string> warnings;
};

// Thin shell over the git CLI.
class GitRepo {
public:
    explicit GitRepo(std::filesystem::path root) : root_(std::move(root)) {
        CommandResult r = git("rev-parse --git-dir");
        if (!r.ok()) throw RepoUnreadable("not a readable git repository: " + root_.string());
    }

    const std::filesystem::path& root() const { return root_; }

    std::string rev_parse(const std::string& ref) const {
        CommandResult r = git("rev-parse --verify " + sh_quote(ref + "^{commit}"));
        if (!r.ok()) throw CommitNotFound("commit not found: " + ref);
        return trim(r.out);
    }

    // Commits reachable from `to` but not `from`, oldest first, merges skipped.
    std::vector<std::string> rev_list(const std::string& from, const std::string& to) const {
        CommandResult r = git("rev-list --topo-order --reverse --no-merges " +
                              sh_quote(from + ".." + to));
        if (!r.ok()) throw CommitNotFound("cannot enumerate " + from + ".." + to + ": " + r.err);
        std::vector<std::string> commits;
        for (const std::string& line : split_lines(r.out))
            if (!trim(line).empty()) commits.push_back(trim(line));
        return commits;
    }

    struct FileChange {
        char status = 'M';  // A / M / D
        std::string path;
    };

    std::vector<FileChange> commit_changes(const std::string& sha) const {
        CommandResult r = git("diff-tree -r --no-commit-id --name-status --root " + sh_quote(sha));
        if (!r.ok()) throw Error("diff-tree failed for " + sha + ": " + r.err);
        std::vector<FileChange> changes;
        for (const std::string& line : split_lines(r.out)) {
            if (line.empty()) continue;
            std::size_t tab = line.find('\t');
            if (tab == std::string::npos) continue;
            changes.push_back({line[0], line.substr(tab + 1)});
        }
        return changes;
    }

    // Content of path at rev; empty when the file does not exist there.
    std::string show_file(const std::string& rev, const std::string& path) const {
        CommandResult r = git("show " + sh_quote(rev + ":" + path));
        return r.ok() ? r.out : std::string{};
    }

    std::vector<std::string> ls_files(const std::string& rev) const {
        CommandResult r = git("ls-tree -r --name-only " + sh_quote(rev));
        if (!r.ok()) throw Error("ls-tree failed for " + rev);
        std::vector<std::string> files;
        for (const std::string& line : split_lines(r.out))
            if (!line.empty()) files.push_back(line);
        return files;
    }

private:
    CommandResult git(const std::string& args) const {
        return run_command("git -C " + sh_quote(root_.string()) + " " + args);
    }

    std::filesystem::path root_;
};

namespace detail {

struct SourceLocation {
    std::string module;   // leading path segment before src/, may be empty
    std::string package;  // dot-separated
    std::string class_name;
};

inline SourceLocation locate_source(const std::string& path) {
    SourceLocation loc;
    std::filesystem::path p(path);
    loc.class_name = p.stem().string();

    static const char* kRoots[] = {"src/main/java/", "src/test/java/", "src/main/", "src/test/"};
    for (const char* root : kRoots) {
        std::size_t at = path.find(root);
        if (at == std::string::npos) continue;
        loc.module = at == 0 ? "" : path.substr(0, at - 1);
        std::string rest = path.substr(at + std::string(root).size());
        std::filesystem::path rel(rest);
        std::string pkg;
        for (auto it = rel.begin(); it != rel.end(); ++it) {
            if (std::next(it) == rel.end()) break;  // filename
            if (!pkg.empty()) pkg += '.';
            pkg += it->string();
        }
        loc.package = pkg;
        return loc;
    }
    // flat layout: directories become the package
    std::string pkg;
    std::filesystem::path parent = p.parent_path();
    for (const auto& part : parent) {
        if (!pkg.empty()) pkg += '.';
        pkg += part.string();
    }
    loc.package = pkg;
    return loc;
}

inline bool has_extension(const std::string& path, const std::vector<std::string>& exts) {
    for (const std::string& e : exts)
        if (path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0)
            return true;
    return false;
}

inline bool is_test_class_name(const std::string& name, const PairingConfig& config) {
    for (const std::string& s : config.test_suffixes)
        if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0)
            return true;
    for (const std::string& p : config.test_prefixes)
        if (name.size() > p.size() && name.compare(0, p.size(), p) == 0) return true;
    return false;
}

inline bool is_test_path(const std::string& path, const PairingConfig& config) {
    for (const std::string& m : config.test_path_markers)
        if (("/" + path).find(m) != std::string::npos) return true;
    return is_test_class_name(std::filesystem::path(path).stem().string(), config);
}

// Test class names that would pair with production class `name`.
inline std::vector<std::string> expected_test_names(const std::string& name,
                                                    const PairingConfig& config) {
    std::vector<std::string> out;
    for (const std::string& s : config.test_suffixes) out.push_back(name + s);
    for (const std::string& p : config.test_prefixes) out.push_back(p + name);
    return out;
}

// A method before/after one commit; absent side means created/deleted.
struct MethodChange {
    std::optional<MethodInfo> before;
    std::optional<MethodInfo> after;

    bool changed() const {
        if (before.has_value() != after.has_value()) return true;
        return before && before->text != after->text;
    }
    std::string name() const { return after ? after->name : before->name; }
    std::string signature() const { return after ? after->signature() : before->signature(); }
    std::string old_text() const { return before ? before->text : std::string{}; }
    std::string new_text() const { return after ? after->text : std::string{}; }
};

// Pairs up old/new methods: exact (name, arity) first, then case-insensitive
// name, then a single leftover on each side (a rename).
inline std::vector<MethodChange> match_methods(std::vector<MethodInfo> old_methods,
                                               std::vector<MethodInfo> new_methods) {
    std::vector<MethodChange> changes;
    std::vector<bool> old_used(old_methods.size(), false);
    std::vector<bool> new_used(new_methods.size(), false);

    auto try_match = [&](auto&& matches) {
        for (std::size_t i = 0; i < old_methods.size(); ++i) {
            if (old_used[i]) continue;
            for (std::size_t j = 0; j < new_methods.size(); ++j) {
                if (new_used[j]) continue;
                if (matches(old_methods[i], new_methods[j])) {
                    old_used[i] = true;
                    new_used[j] = true;
                    changes.push_back({old_methods[i], new_methods[j]});
                    break;
                }
            }
        }
    };
    try_match([](const MethodInfo& a, const MethodInfo& b) {
        return a.name == b.name && a.arity == b.arity;
    });
    try_match([](const MethodInfo& a, const MethodInfo& b) {
        return to_lower(a.name) == to_lower(b.name);
    });

    std::vector<std::size_t> old_left, new_left;
    for (std::size_t i = 0; i < old_methods.size(); ++i)
        if (!old_used[i]) old_left.push_back(i);
    for (std::size_t j = 0; j < new_methods.size(); ++j)
        if (!new_used[j]) new_left.push_back(j);
    if (old_left.size() == 1 && new_left.size() == 1) {
        changes.push_back({old_methods[old_left[0]], new_methods[new_left[0]]});
    } else {
        for (std::size_t i : old_left) changes.push_back({old_methods[i], std::nullopt});
        for (std::size_t j : new_left) changes.push_back({std::nullopt, new_methods[j]});
    }

    std::sort(changes.begin(), changes.end(), [](const MethodChange& a, const MethodChange& b) {
        return a.signature() < b.signature();
    });
    return changes;
}

// True when the test method exercises the production method: its body
// references the name at a word boundary, or its own name (minus a test
// prefix/suffix) equals it. Containment alone is too loose: `Uniform` must
// not claim `testUniformCdf`.
inline bool test_targets_method(const MethodInfo& test_method, const MethodChange& prod) {
    std::string core = to_lower(test_method.name);
    if (core.rfind("test", 0) == 0) core = core.substr(4);
    if (core.size() >= 4 && core.compare(core.size() - 4, 4, "test") == 0)
        core = core.substr(0, core.size() - 4);
    while (!core.empty() && (core.front() == '_')) core.erase(core.begin());

    std::vector<std::string> names;
    if (prod.before) names.push_back(prod.before->name);
    if (prod.after && (!prod.before || prod.after->name != prod.before->name))
        names.push_back(prod.after->name);
    for (const std::string& n : names) {
        if (contains_word_ci(test_method.text, n)) return true;
        if (core == to_lower(n)) return true;
    }
    return false;
}

}  // namespace detail

// Walks `from..to` (from exclusive), extracts per-method production/test
// changes, and pairs them by naming convention. Malformed sources are skipped
// with a warning, never fatally.
inline MiningResult mine_change_pairs(const std::filesystem::path& repo_path,
                                      const std::string& from, const std::string& to,
                                      const PairingConfig& config = {}) {
    GitRepo repo(repo_path);
    std::string from_sha = repo.rev_parse(from);
    std::string to_sha = repo.rev_parse(to);

    MiningResult result;
    std::string project =
        config.project.empty() ? repo_path.filename().string() : config.project;
    if (project.empty()) project = "project";

    if (from_sha == to_sha) return result;

    std::set<std::string> dedup;  // version | prod signature | test signature

    for (const std::string& sha : repo.rev_list(from_sha, to_sha)) {
        struct ChangedFile {
            GitRepo::FileChange change;
            detail::SourceLocation loc;
            std::string old_text;
            std::string new_text;
            std::vector<detail::MethodChange> methods;
        };
        std::vector<ChangedFile> prod_files;
        std::vector<ChangedFile> test_files;

        for (const GitRepo::FileChange& fc : repo.commit_changes(sha)) {
            if (!detail::has_extension(fc.path, config.source_extensions)) continue;
            ChangedFile cf;
            cf.change = fc;
            cf.loc = detail::locate_source(fc.path);
            cf.old_text = fc.status == 'A' ? std::string{} : repo.show_file(sha + "^", fc.path);
            cf.new_text = fc.status == 'D' ? std::string{} : repo.show_file(sha, fc.path);
            try {
                cf.methods = detail::match_methods(scan_methods(cf.old_text),
                                                   scan_methods(cf.new_text));
            } catch (const Error& e) {
                result.warnings.push_back("skipped " + fc.path + " at " + sha.substr(0, 12) +
                                          ": " + e.what());
                continue;
            }
            (detail::is_test_path(fc.path, config) ? test_files : prod_files)
                .push_back(std::move(cf));
        }
        if (prod_files.empty()) continue;

        std::sort(prod_files.begin(), prod_files.end(),
                  [](const ChangedFile& a, const ChangedFile& b) {
                      return a.change.path < b.change.path;
                  });

        // unchanged test classes are looked up lazily from the commit tree
        std::vector<std::string> tree;
        bool tree_loaded = false;

        for (const ChangedFile& pf : prod_files) {
            // locate the paired test class: changed test files first
            const ChangedFile* paired = nullptr;
            std::vector<std::string> wanted =
                detail::expected_test_names(pf.loc.class_name, config);
            for (const ChangedFile& tf : test_files) {
                for (const std::string& name : wanted)
                    if (tf.loc.class_name == name && tf.loc.package == pf.loc.package)
                        paired = &tf;
                if (paired) break;
            }
            if (!paired && config.reference_fallback) {
                for (const ChangedFile& tf : test_files) {
                    const std::string& body = tf.new_text.empty() ? tf.old_text : tf.new_text;
                    if (contains_word(body, pf.loc.class_name)) {
                        paired = &tf;
                        break;
                    }
                }
            }

            ChangedFile unchanged_test;  // filled when pairing against an untouched test class
            if (!paired && config.mine_negatives) {
                if (!tree_loaded) {
                    tree = repo.ls_files(sha);
                    tree_loaded = true;
                }
                for (const std::string& path : tree) {
                    if (!detail::has_extension(path, config.source_extensions)) continue;
                    if (!detail::is_test_path(path, config)) continue;
                    detail::SourceLocation loc = detail::locate_source(path);
                    bool name_ok = false;
                    for (const std::string& name : wanted)
                        if (loc.class_name == name) name_ok = true;
                    if (!name_ok || loc.package != pf.loc.package) continue;
                    unchanged_test.change = {'M', path};
                    unchanged_test.loc = loc;
                    unchanged_test.new_text = repo.show_file(sha, path);
                    unchanged_test.old_text = unchanged_test.new_text;
                    try {
                        auto methods = scan_methods(unchanged_test.new_text);
                        unchanged_test.methods.clear();
                        for (MethodInfo& m : methods)
                            unchanged_test.methods.push_back({m, m});
                    } catch (const Error& e) {
                        result.warnings.push_back("skipped " + path + " at " + sha.substr(0, 12) +
                                                  ": " + e.what());
                        continue;
                    }
                    paired = &unchanged_test;
                    break;
                }
            }
            if (!paired) continue;

            for (const detail::MethodChange& pm : pf.methods) {
                if (!pm.changed()) continue;
                for (const detail::MethodChange& tm : paired->methods) {
                    // deleted test methods carry no update target
                    if (!tm.after) continue;
                    const MethodInfo& probe = tm.before ? *tm.before : *tm.after;
                    if (!detail::test_targets_method(probe, pm) &&
                        !detail::test_targets_method(*tm.after, pm))
                        continue;

                    ChangePair pair;
                    pair.group = config.group;
                    pair.project = project;
                    pair.change_p = {sha, pf.loc.module, pf.loc.package, pf.loc.class_name,
                                     pf.change.status == 'A'   ? ChangeType::CREATE
                                     : pf.change.status == 'D' ? ChangeType::DELETE
                                                               : ChangeType::EDIT};
                    pair.change_t = {sha, paired->loc.module, paired->loc.package,
                                     paired->loc.class_name,
                                     paired->change.status == 'A'   ? ChangeType::CREATE
                                     : paired->change.status == 'D' ? ChangeType::DELETE
                                                                    : ChangeType::EDIT};
                    pair.prod_old = pm.old_text();
                    pair.prod_new = pm.new_text();
                    pair.test_old = tm.old_text();
                    if (tm.changed() && tm.after) {
                        pair.test_new = tm.new_text();
                        pair.label = *pair.test_new != pair.test_old ? PairLabel::POSITIVE
                                                                     : PairLabel::NEGATIVE;
                    } else {
                        pair.label = PairLabel::NEGATIVE;
                    }

                    std::string key = sha + "|" + pm.signature() + "|" + tm.signature();
                    if (!dedup.insert(key).second) continue;
                    result.pairs.push_back(std::move(pair));
                }
            }
        }
    }
    return result;
}

// Attaches POSITIVE/NEGATIVE labels from a ground-truth file: JSON Lines of
// {"version", "prod_method", "test_method", "label"}. Method names are
// matched against the pair's own snapshots.
inline std::size_t apply_labels(std::vector<ChangePair>& pairs,
                                const std::filesystem::path& truth_file) {
    struct Key {
        std::string version, prod, test;
        bool operator<(const Key& o) const {
            return std::tie(version, prod, test) < std::tie(o.version, o.prod, o.test);
        }
    };
    std::map<Key, PairLabel> truth;
    for (const std::string& line : split_lines(read_file(truth_file))) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        truth[{j.at("version").get<std::string>(), j.at("prod_method").get<std::string>(),
               j.at("test_method").get<std::string>()}] =
            label_from_string(j.at("label").get<std::string>());
    }

    auto method_name = [](const std::string& text) -> std::string {
        if (text.empty()) return {};
        try {
            auto methods = scan_methods(text);
            return methods.empty() ? std::string{} : methods.front().name;
        } catch (const Error&) {
            return {};
        }
    };

    std::size_t applied = 0;
    for (ChangePair& p : pairs) {
        std::string prod = method_name(p.prod_new.empty() ? p.prod_old : p.prod_new);
        std::string test = method_name(p.test_new && !p.test_new->empty() ? *p.test_new
                                                                          : p.test_old);
        auto it = truth.find({p.change_p.version, prod, test});
        if (it != truth.end()) {
            p.label = it->second;
            ++applied;
        }
    }
    return applied;
}

}  // namespace ptco
