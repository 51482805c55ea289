#pragma once

#include <algorithm>
#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptco/errors.hpp"
#include "ptco/io.hpp"
#include "ptco/method_scan.hpp"
#include "ptco/subprocess.hpp"
#include "ptco/text.hpp"

namespace ptco {

// The four-tier quality ladder for a candidate test, ordered worst to best.
enum class QualityLevel {
    COMPILATION_FAILURE = 0,
    TEST_FAILURE = 1,
    COVERAGE_FAILURE = 2,
    SATISFIES_ALL = 3,
};

inline std::string to_string(QualityLevel l) {
    switch (l) {
        case QualityLevel::COMPILATION_FAILURE: return "COMPILATION_FAILURE";
        case QualityLevel::TEST_FAILURE: return "TEST_FAILURE";
        case QualityLevel::COVERAGE_FAILURE: return "COVERAGE_FAILURE";
        case QualityLevel::SATISFIES_ALL: return "SATISFIES_ALL";
    }
    return "COMPILATION_FAILURE";
}

inline QualityLevel quality_level_from_string(const std::string& s) {
    if (s == "COMPILATION_FAILURE") return QualityLevel::COMPILATION_FAILURE;
    if (s == "TEST_FAILURE") return QualityLevel::TEST_FAILURE;
    if (s == "COVERAGE_FAILURE") return QualityLevel::COVERAGE_FAILURE;
    if (s == "SATISFIES_ALL") return QualityLevel::SATISFIES_ALL;
    throw Error("unknown quality level: " + s);
}

// Cumulative gates: compiling means the candidate got past the compiler, and
// so on up the ladder.
inline bool reached_compile(QualityLevel l) { return l >= QualityLevel::TEST_FAILURE; }
inline bool reached_test_pass(QualityLevel l) { return l >= QualityLevel::COVERAGE_FAILURE; }
inline bool reached_full(QualityLevel l) { return l == QualityLevel::SATISFIES_ALL; }

enum class TestStatus { PASS, FAIL, ERROR };

inline std::string to_string(TestStatus s) {
    switch (s) {
        case TestStatus::PASS: return "PASS";
        case TestStatus::FAIL: return "FAIL";
        case TestStatus::ERROR: return "ERROR";
    }
    return "ERROR";
}

inline TestStatus test_status_from_string(const std::string& s) {
    if (s == "PASS") return TestStatus::PASS;
    if (s == "FAIL") return TestStatus::FAIL;
    if (s == "ERROR") return TestStatus::ERROR;
    throw Error("unknown test status: " + s);
}

struct TestResult {
    std::string name;
    TestStatus status = TestStatus::PASS;
    std::string message;
};

// (file path, 1-based line)
struct LineRef {
    std::string file;
    std::size_t line = 0;

    bool operator<(const LineRef& o) const {
        return std::tie(file, line) < std::tie(o.file, o.line);
    }
    bool operator==(const LineRef& o) const { return file == o.file && line == o.line; }
};

using LineCoverage = std::map<LineRef, bool>;

struct CoverageRecord {
    LineCoverage per_line;
    std::set<LineRef> required_lines;  // changed executable production lines
    bool covered = false;
    std::vector<LineRef> gap;  // uncovered required lines when not covered
};

// A required line matches a report entry exactly or by path suffix; coverage
// tools report paths in their own notation.
inline bool line_is_covered(const LineCoverage& per_line, const LineRef& ref) {
    auto it = per_line.find(ref);
    if (it != per_line.end()) return it->second;
    for (const auto& [key, hit] : per_line) {
        if (key.line != ref.line) continue;
        const std::string& a = key.file;
        const std::string& b = ref.file;
        const std::string& longer = a.size() >= b.size() ? a : b;
        const std::string& shorter = a.size() >= b.size() ? b : a;
        if (shorter.empty()) continue;
        if (longer == shorter ||
            (longer.size() > shorter.size() &&
             longer.compare(longer.size() - shorter.size() - 1, 1, "/") == 0 &&
             longer.compare(longer.size() - shorter.size(), shorter.size(), shorter) == 0))
            return hit;
    }
    return false;
}

// Pure verdict recomputation: COVERED iff every required line is covered (or
// any line, in any-line mode).
inline CoverageRecord make_coverage_record(LineCoverage per_line, std::set<LineRef> required,
                                           bool require_all = true) {
    CoverageRecord record;
    record.per_line = std::move(per_line);
    record.required_lines = std::move(required);
    std::size_t hit = 0;
    for (const LineRef& ref : record.required_lines) {
        if (line_is_covered(record.per_line, ref))
            ++hit;
        else
            record.gap.push_back(ref);
    }
    record.covered = require_all ? record.gap.empty()
                                 : (hit > 0 || record.required_lines.empty());
    if (record.covered) record.gap.clear();
    return record;
}

struct ValidationReport {
    QualityLevel level = QualityLevel::COMPILATION_FAILURE;
    std::vector<std::string> compile_diagnostics;
    std::vector<TestResult> test_results;
    std::optional<CoverageRecord> coverage;
    double wall_time_seconds = 0.0;
};

inline nlohmann::ordered_json report_to_json(const ValidationReport& r) {
    nlohmann::ordered_json j;
    j["level"] = to_string(r.level);
    j["compile_diagnostics"] = r.compile_diagnostics;
    j["test_results"] = nlohmann::ordered_json::array();
    for (const TestResult& t : r.test_results)
        j["test_results"].push_back(
            {{"name", t.name}, {"status", to_string(t.status)}, {"message", t.message}});
    if (r.coverage) {
        nlohmann::ordered_json c;
        c["per_line"] = nlohmann::ordered_json::array();
        for (const auto& [ref, hit] : r.coverage->per_line)
            c["per_line"].push_back({{"file", ref.file}, {"line", ref.line}, {"covered", hit}});
        c["required_lines"] = nlohmann::ordered_json::array();
        for (const LineRef& ref : r.coverage->required_lines)
            c["required_lines"].push_back({{"file", ref.file}, {"line", ref.line}});
        c["covered"] = r.coverage->covered;
        c["gap"] = nlohmann::ordered_json::array();
        for (const LineRef& ref : r.coverage->gap)
            c["gap"].push_back({{"file", ref.file}, {"line", ref.line}});
        j["coverage"] = c;
    } else {
        j["coverage"] = nullptr;
    }
    j["wall_time_seconds"] = r.wall_time_seconds;
    return j;
}

inline ValidationReport report_from_json(const nlohmann::json& j) {
    ValidationReport r;
    r.level = quality_level_from_string(j.at("level").get<std::string>());
    if (j.contains("compile_diagnostics"))
        r.compile_diagnostics = j.at("compile_diagnostics").get<std::vector<std::string>>();
    if (j.contains("test_results"))
        for (const auto& t : j.at("test_results"))
            r.test_results.push_back({t.at("name").get<std::string>(),
                                      test_status_from_string(t.at("status").get<std::string>()),
                                      t.value("message", "")});
    if (j.contains("coverage") && !j.at("coverage").is_null()) {
        const auto& c = j.at("coverage");
        LineCoverage per_line;
        for (const auto& e : c.at("per_line"))
            per_line[{e.at("file").get<std::string>(), e.at("line").get<std::size_t>()}] =
                e.at("covered").get<bool>();
        std::set<LineRef> required;
        if (c.contains("required_lines"))
            for (const auto& e : c.at("required_lines"))
                required.insert({e.at("file").get<std::string>(), e.at("line").get<std::size_t>()});
        r.coverage = make_coverage_record(std::move(per_line), std::move(required));
    }
    r.wall_time_seconds = j.value("wall_time_seconds", 0.0);
    return r;
}

// Structural invariants every adapter's reports must satisfy: stages run in
// order and stop at the first failure.
inline void check_report_invariants(const ValidationReport& r) {
    if (r.level == QualityLevel::COMPILATION_FAILURE) {
        if (r.compile_diagnostics.empty())
            throw Error("COMPILATION_FAILURE report without diagnostics");
        if (!r.test_results.empty() || r.coverage.has_value())
            throw Error("compile failure must not carry test or coverage results");
    }
    if (r.level == QualityLevel::SATISFIES_ALL) {
        for (const TestResult& t : r.test_results)
            if (t.status != TestStatus::PASS)
                throw Error("SATISFIES_ALL report with a non-passing test");
        if (r.coverage && !r.coverage->covered)
            throw Error("SATISFIES_ALL report with an uncovered coverage record");
    }
    if (r.level == QualityLevel::COVERAGE_FAILURE && r.coverage && r.coverage->covered)
        throw Error("COVERAGE_FAILURE report with a covered coverage record");
}

enum class CoverageFormat { XML_LINE_REPORT, LCOV_TEXT };

namespace detail {

struct XmlTag {
    std::string name;
    std::map<std::string, std::string> attrs;
    bool closing = false;
    std::size_t end_pos = 0;
};

inline XmlTag parse_xml_tag(const std::string& bytes, std::size_t lt) {
    std::size_t gt = bytes.find('>', lt);
    if (gt == std::string::npos) throw MalformedReport("unterminated XML tag", lt);
    XmlTag tag;
    tag.end_pos = gt;
    std::size_t i = lt + 1;
    if (i < gt && bytes[i] == '/') {
        tag.closing = true;
        ++i;
    }
    while (i < gt && !std::isspace(static_cast<unsigned char>(bytes[i])) && bytes[i] != '/')
        tag.name += bytes[i++];
    while (i < gt) {
        while (i < gt && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
        if (i >= gt || bytes[i] == '/' || bytes[i] == '?') break;
        std::string key;
        while (i < gt && bytes[i] != '=' && !std::isspace(static_cast<unsigned char>(bytes[i])))
            key += bytes[i++];
        while (i < gt && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
        if (i >= gt || bytes[i] != '=') throw MalformedReport("attribute without value", i);
        ++i;
        while (i < gt && std::isspace(static_cast<unsigned char>(bytes[i]))) ++i;
        if (i >= gt || (bytes[i] != '"' && bytes[i] != '\''))
            throw MalformedReport("unquoted attribute value", i);
        char quote = bytes[i++];
        std::string value;
        while (i < gt && bytes[i] != quote) value += bytes[i++];
        if (i >= gt) throw MalformedReport("unterminated attribute value", i);
        ++i;
        tag.attrs[key] = value;
    }
    return tag;
}

inline std::size_t parse_count(const std::string& text, std::size_t offset_for_error) {
    if (text.empty()) throw MalformedReport("empty numeric attribute", offset_for_error);
    std::size_t value = 0;
    for (char c : text) {
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw MalformedReport("non-numeric count: " + text, offset_for_error);
        value = value * 10 + static_cast<std::size_t>(c - '0');
    }
    return value;
}

}  // namespace detail

// Parses a coverage report into (file, line) -> covered. XML_LINE_REPORT reads
// JaCoCo-style reports: <package name>/<sourcefile name> scoping with
// <line nr=".." ci=".."/> entries (ci > 0 means covered). LCOV_TEXT reads
// SF:/DA:<line>,<count> records.
inline LineCoverage parse_coverage_report(const std::string& bytes, CoverageFormat format) {
    LineCoverage out;
    if (format == CoverageFormat::XML_LINE_REPORT) {
        std::string package;
        std::string sourcefile;
        std::size_t pos = 0;
        while ((pos = bytes.find('<', pos)) != std::string::npos) {
            if (bytes.compare(pos, 4, "<!--") == 0) {
                std::size_t end = bytes.find("-->", pos);
                if (end == std::string::npos) throw MalformedReport("unterminated comment", pos);
                pos = end + 3;
                continue;
            }
            if (bytes.compare(pos, 2, "<?") == 0 || bytes.compare(pos, 2, "<!") == 0) {
                std::size_t end = bytes.find('>', pos);
                if (end == std::string::npos) throw MalformedReport("unterminated directive", pos);
                pos = end + 1;
                continue;
            }
            detail::XmlTag tag = detail::parse_xml_tag(bytes, pos);
            if (tag.closing) {
                if (tag.name == "package") package.clear();
                if (tag.name == "sourcefile") sourcefile.clear();
            } else if (tag.name == "package") {
                package = tag.attrs.count("name") ? tag.attrs["name"] : "";
            } else if (tag.name == "sourcefile") {
                if (!tag.attrs.count("name"))
                    throw MalformedReport("sourcefile without name", pos);
                sourcefile = tag.attrs["name"];
            } else if (tag.name == "line") {
                if (!tag.attrs.count("nr")) throw MalformedReport("line without nr", pos);
                std::size_t nr = detail::parse_count(tag.attrs["nr"], pos);
                std::size_t ci =
                    tag.attrs.count("ci") ? detail::parse_count(tag.attrs["ci"], pos) : 0;
                std::string file = sourcefile;
                if (!package.empty()) file = package + "/" + sourcefile;
                out[{file, nr}] = ci > 0;
            }
            pos = tag.end_pos + 1;
        }
        return out;
    }

    // LCOV text
    std::string file;
    std::size_t offset = 0;
    for (const std::string& line : split_lines(bytes)) {
        std::string t = trim(line);
        if (t.rfind("SF:", 0) == 0) {
            file = t.substr(3);
        } else if (t.rfind("DA:", 0) == 0) {
            if (file.empty()) throw MalformedReport("DA record before SF", offset);
            std::size_t comma = t.find(',');
            if (comma == std::string::npos) throw MalformedReport("DA without count", offset);
            std::size_t nr = detail::parse_count(t.substr(3, comma - 3), offset);
            std::size_t count = detail::parse_count(t.substr(comma + 1), offset);
            out[{file, nr}] = count > 0;
        } else if (t == "end_of_record") {
            file.clear();
        }
        offset += line.size() + 1;
    }
    return out;
}

// 1-based line numbers of lines that can execute: not blank, not comment-only,
// not made of braces/punctuation alone.
inline std::set<std::size_t> executable_lines(const std::string& source) {
    std::set<std::size_t> lines;
    bool in_block_comment = false;
    std::size_t n = 0;
    for (const std::string& raw : split_lines(source)) {
        ++n;
        std::string line = trim(raw);
        bool has_code = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (in_block_comment) {
                if (line.compare(i, 2, "*/") == 0) {
                    in_block_comment = false;
                    ++i;
                }
                continue;
            }
            if (line.compare(i, 2, "//") == 0) break;
            if (line.compare(i, 2, "/*") == 0) {
                in_block_comment = true;
                ++i;
                continue;
            }
            char c = line[i];
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            if (c == '{' || c == '}' || c == ';' || c == '(' || c == ')') continue;
            if (c == '@') {  // annotation-only lines do not execute
                while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
                continue;
            }
            has_code = true;
        }
        if (has_code) lines.insert(n);
    }
    return lines;
}

// Where to find the method under validation inside the workspace.
struct ValidationTarget {
    std::string module;
    std::string package;
    std::string class_name;
    std::string method;
};

class ValidationAdapter {
public:
    virtual ~ValidationAdapter() = default;
    // Stages run strictly compile -> test -> coverage, stopping at the first
    // failure.
    virtual ValidationReport validate(const std::filesystem::path& workspace,
                                      const std::string& candidate_test,
                                      const ValidationTarget& target,
                                      const std::set<LineRef>& changed_lines) = 0;
};

// Replays canned reports in order; used by every deterministic test of the
// update loop.
class ScriptedValidationAdapter final : public ValidationAdapter {
public:
    ScriptedValidationAdapter() = default;
    explicit ScriptedValidationAdapter(std::vector<ValidationReport> reports)
        : reports_(reports.begin(), reports.end()) {}

    void push(ValidationReport report) {
        check_report_invariants(report);
        reports_.push_back(std::move(report));
    }

    ValidationReport validate(const std::filesystem::path&, const std::string& candidate_test,
                              const ValidationTarget&, const std::set<LineRef>&) override {
        candidates_seen_.push_back(candidate_test);
        if (reports_.empty()) throw Error("scripted validation reports exhausted");
        ValidationReport r = std::move(reports_.front());
        reports_.pop_front();
        return r;
    }

    static ScriptedValidationAdapter from_file(const std::filesystem::path& path) {
        ScriptedValidationAdapter adapter;
        for (const std::string& line : split_lines(read_file(path))) {
            if (trim(line).empty()) continue;
            adapter.push(report_from_json(nlohmann::json::parse(line)));
        }
        return adapter;
    }

    const std::vector<std::string>& candidates_seen() const { return candidates_seen_; }

private:
    std::deque<ValidationReport> reports_;
    std::vector<std::string> candidates_seen_;
};

// Three shell commands plus parsing rules; {class}/{method}/{package}/{module}
// placeholders are substituted from the target.
struct CommandAdapterConfig {
    std::string compile_cmd;
    std::string test_cmd;
    std::string coverage_cmd;
    CoverageFormat coverage_format = CoverageFormat::XML_LINE_REPORT;
    std::string report_path;  // relative to the workspace
    std::chrono::seconds stage_timeout{300};
    bool require_all_lines = true;
};

inline CommandAdapterConfig maven_preset() {
    CommandAdapterConfig config;
    config.compile_cmd = "mvn -q -B test-compile";
    config.test_cmd = "mvn -q -B -Dtest={class}#{method} test";
    config.coverage_cmd =
        "mvn -q -B -Dtest={class}#{method} org.jacoco:jacoco-maven-plugin:prepare-agent test "
        "org.jacoco:jacoco-maven-plugin:report";
    config.coverage_format = CoverageFormat::XML_LINE_REPORT;
    config.report_path = "target/site/jacoco/jacoco.xml";
    return config;
}

class CommandValidationAdapter final : public ValidationAdapter {
public:
    explicit CommandValidationAdapter(CommandAdapterConfig config) : config_(std::move(config)) {}

    ValidationReport validate(const std::filesystem::path& workspace,
                              const std::string& candidate_test, const ValidationTarget& target,
                              const std::set<LineRef>& changed_lines) override {
        auto started = std::chrono::steady_clock::now();
        ValidationReport report;

        apply_candidate(workspace, candidate_test, target);

        // stage 1: compile
        CommandResult compile =
            run_command(substitute(config_.compile_cmd, target), workspace, config_.stage_timeout);
        if (!compile.ok()) {
            report.level = QualityLevel::COMPILATION_FAILURE;
            report.compile_diagnostics = stage_diagnostics(compile, "compile");
            report.wall_time_seconds = seconds_since(started);
            return report;
        }

        // stage 2: run the test
        CommandResult test =
            run_command(substitute(config_.test_cmd, target), workspace, config_.stage_timeout);
        if (!test.ok()) {
            report.level = QualityLevel::TEST_FAILURE;
            report.test_results = failing_results(test, target);
            report.wall_time_seconds = seconds_since(started);
            return report;
        }
        report.test_results.push_back({target.method, TestStatus::PASS, ""});

        // stage 3: coverage
        if (!config_.coverage_cmd.empty()) {
            CommandResult cov = run_command(substitute(config_.coverage_cmd, target), workspace,
                                            config_.stage_timeout);
            if (cov.timed_out) {
                report.level = QualityLevel::COVERAGE_FAILURE;
                report.coverage = make_coverage_record({}, changed_lines,
                                                       config_.require_all_lines);
                report.wall_time_seconds = seconds_since(started);
                return report;
            }
        }
        std::filesystem::path report_file = workspace / config_.report_path;
        if (!std::filesystem::exists(report_file))
            throw WorkspaceCorrupt("coverage report not produced: " + report_file.string());
        LineCoverage per_line = parse_coverage_report(read_file(report_file),
                                                      config_.coverage_format);
        report.coverage =
            make_coverage_record(std::move(per_line), changed_lines, config_.require_all_lines);
        report.level = report.coverage->covered ? QualityLevel::SATISFIES_ALL
                                                : QualityLevel::COVERAGE_FAILURE;
        report.wall_time_seconds = seconds_since(started);
        return report;
    }

    // Splices the candidate over the target method inside its test file.
    static void apply_candidate(const std::filesystem::path& workspace,
                                const std::string& candidate_test, const ValidationTarget& target) {
        std::filesystem::path file = resolve_test_file(workspace, target);
        std::string source = read_file(file);
        std::optional<std::string> updated = replace_method(source, target.method,
                                                            candidate_test);
        if (!updated) {
            // the method may be gone from a previous iteration's splice; try
            // the candidate's own name
            try {
                auto methods = scan_methods(candidate_test);
                if (!methods.empty())
                    updated = replace_method(source, methods.front().name, candidate_test);
            } catch (const Error&) {
            }
        }
        if (!updated)
            throw ValidatorSetupError("target test method " + target.method + " not found in " +
                                      file.string());
        write_file_atomic(file, *updated);
    }

    static std::filesystem::path resolve_test_file(const std::filesystem::path& workspace,
                                                   const ValidationTarget& target) {
        std::string pkg_path = target.package;
        std::replace(pkg_path.begin(), pkg_path.end(), '.', '/');
        std::vector<std::filesystem::path> candidates;
        std::filesystem::path base = workspace;
        if (!target.module.empty()) base /= target.module;
        candidates.push_back(base / "src/test/java" / pkg_path / (target.class_name + ".java"));
        candidates.push_back(base / "src/test" / pkg_path / (target.class_name + ".java"));
        candidates.push_back(base / pkg_path / (target.class_name + ".java"));
        for (const auto& c : candidates)
            if (std::filesystem::exists(c)) return c;
        // last resort: search the tree
        std::vector<std::filesystem::path> found;
        for (auto it = std::filesystem::recursive_directory_iterator(workspace);
             it != std::filesystem::recursive_directory_iterator(); ++it)
            if (it->is_regular_file() && it->path().filename() == target.class_name + ".java")
                found.push_back(it->path());
        std::sort(found.begin(), found.end());
        if (found.empty())
            throw WorkspaceCorrupt("test file for " + target.class_name + " not found under " +
                                   workspace.string());
        return found.front();
    }

private:
    static double seconds_since(std::chrono::steady_clock::time_point start) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    std::string substitute(std::string cmd, const ValidationTarget& target) const {
        auto replace_all_of = [&](const std::string& key, const std::string& value) {
            std::size_t at = 0;
            while ((at = cmd.find(key, at)) != std::string::npos) {
                cmd.replace(at, key.size(), value);
                at += value.size();
            }
        };
        replace_all_of("{class}", target.class_name);
        replace_all_of("{method}", target.method);
        replace_all_of("{package}", target.package);
        replace_all_of("{module}", target.module);
        return cmd;
    }

    static std::vector<std::string> stage_diagnostics(const CommandResult& r,
                                                      const std::string& stage) {
        if (r.timed_out) return {stage + " stage timed out"};
        std::vector<std::string> diags;
        for (const std::string& line : split_lines(r.err.empty() ? r.out : r.err))
            if (!trim(line).empty()) diags.push_back(line);
        if (diags.empty()) diags.push_back(stage + " command exited with code " +
                                           std::to_string(r.exit_code));
        return diags;
    }

    static std::vector<TestResult> failing_results(const CommandResult& r,
                                                   const ValidationTarget& target) {
        if (r.timed_out) return {{target.method, TestStatus::ERROR, "test stage timed out"}};
        std::string message;
        std::vector<std::string> lines = split_lines(r.err.empty() ? r.out : r.err);
        std::size_t start = lines.size() > 20 ? lines.size() - 20 : 0;
        for (std::size_t i = start; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            if (!message.empty()) message += '\n';
            message += lines[i];
        }
        if (message.empty()) message = "test command exited with code " +
                                       std::to_string(r.exit_code);
        return {{target.method, TestStatus::FAIL, message}};
    }

    CommandAdapterConfig config_;
};

}  // namespace ptco
