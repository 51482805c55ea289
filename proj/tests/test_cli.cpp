#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <string>

#include "ptco/change_pair.hpp"
#include "ptco/io.hpp"
#include "ptco/knowledge_base.hpp"
#include "ptco/subprocess.hpp"
#include "ptco/update.hpp"

#include "case_study.hpp"
#include "fixture_repo.hpp"

using namespace ptco;
namespace fs = std::filesystem;

namespace {

CommandResult cli(const std::string& args, const fs::path& cwd = {}) {
    return run_command(std::string(PTCO_CLI_BIN) + " " + args, cwd);
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("ptco_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_transcript(const fs::path& path, const std::vector<std::string>& replies) {
    std::string out;
    for (const std::string& r : replies) {
        nlohmann::json j{{"reply", r}};
        out += j.dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

void write_reports(const fs::path& path, const std::vector<ValidationReport>& reports) {
    std::string out;
    for (const ValidationReport& r : reports) {
        out += report_to_json(r).dump();
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::string experiences_json() {
    return R"([
  {"experience_id": "AL-1", "kind": "ABSTRACTION_LEVEL", "statement": "Abstraction shifts obsolete structure-bound tests.", "round": 1},
  {"experience_id": "PI-1", "kind": "PARAMETER_INDEPENDENCE", "statement": "Independent parameter tweaks keep tests valid.", "round": 1},
  {"experience_id": "CP-1", "kind": "CONSISTENCY_PRODUCTION", "statement": "Pattern-consistent edits keep tests valid.", "round": 1}
])";
}

std::vector<ChangePair> four_labeled_pairs() {
    std::vector<ChangePair> pairs;
    for (int i = 0; i < 4; ++i) {
        ChangePair p = fixtures::case_study_pair();
        p.change_p.class_name += std::to_string(i);
        p.change_t.class_name += std::to_string(i);
        p.label = i < 2 ? PairLabel::POSITIVE : PairLabel::NEGATIVE;
        if (p.label == PairLabel::NEGATIVE) p.test_new.reset();
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace

TEST_CASE("cli mine extracts the fixture pair") {
    auto repo = fixtures::make_rename_repo("cli_mine");
    fs::path dir = fresh_dir("mine");
    CommandResult r = cli("mine --repo " + sh_quote(repo.dir().string()) + " --from " +
                          repo.shas()[0] + " --to " + repo.shas()[1] + " --out " +
                          sh_quote((dir / "pairs.jsonl").string()));
    REQUIRE(r.exit_code == 0);
    std::vector<ChangePair> pairs = read_pairs_file(dir / "pairs.jsonl");
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].label == PairLabel::POSITIVE);
    fs::remove_all(dir);
}

TEST_CASE("cli mine exits 2 on a missing repository") {
    CommandResult r = cli("mine --repo /no/such/repo --from a --to b --out /tmp/out.jsonl");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("not a readable git repository") != std::string::npos);
}

TEST_CASE("cli mine attaches labels from ground truth") {
    auto repo = fixtures::make_rename_repo("cli_labels");
    fs::path dir = fresh_dir("mine_labels");
    nlohmann::json truth{{"version", repo.shas()[1]},
                         {"prod_method", "uniformCdf"},
                         {"test_method", "testUniformCdf"},
                         {"label", "NEGATIVE"}};
    write_file_atomic(dir / "truth.jsonl", truth.dump() + "\n");
    CommandResult r = cli("mine --repo " + sh_quote(repo.dir().string()) + " --from " +
                          repo.shas()[0] + " --to " + repo.shas()[1] + " --out " +
                          sh_quote((dir / "pairs.jsonl").string()) + " --label-from " +
                          sh_quote((dir / "truth.jsonl").string()));
    REQUIRE(r.exit_code == 0);
    CHECK(r.err.find("labels applied to 1") != std::string::npos);
    std::vector<ChangePair> pairs = read_pairs_file(dir / "pairs.jsonl");
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].label == PairLabel::NEGATIVE);
    fs::remove_all(dir);
}

TEST_CASE("cli build-kb writes a manifest with the positive count") {
    fs::path dir = fresh_dir("buildkb");
    std::vector<ChangePair> pairs = four_labeled_pairs();  // 2 positive, 2 negative
    write_pairs_file(dir / "pairs.jsonl", pairs);

    CommandResult r = cli("build-kb --pairs " + sh_quote((dir / "pairs.jsonl").string()) +
                          " --out " + sh_quote((dir / "kb").string()));
    REQUIRE(r.exit_code == 0);
    CHECK(r.err.find("filtered 2 non-positive") != std::string::npos);
    nlohmann::json manifest = nlohmann::json::parse(read_file(dir / "kb/manifest.json"));
    CHECK(manifest.at("count") == 2);
    CHECK(manifest.at("block_size") == 50);

    // empty corpus still builds a store, with a warning and exit 0
    write_pairs_file(dir / "none.jsonl", {});
    CommandResult empty = cli("build-kb --pairs " + sh_quote((dir / "none.jsonl").string()) +
                              " --out " + sh_quote((dir / "kb_empty").string()));
    CHECK(empty.exit_code == 0);
    CHECK(empty.err.find("empty corpus") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cli identify produces deterministic verdicts") {
    fs::path dir = fresh_dir("identify");
    write_pairs_file(dir / "pairs.jsonl", four_labeled_pairs());
    write_file_atomic(dir / "experiences.json", experiences_json());
    write_transcript(dir / "transcript.jsonl",
                     {"call changed\nVERDICT: YES", "call changed\nVERDICT: YES",
                      "still fine\nVERDICT: NO", "still fine\nVERDICT: NO"});

    std::string cmd = "--provider scripted:" + (dir / "transcript.jsonl").string() +
                      " identify --pairs " + sh_quote((dir / "pairs.jsonl").string()) +
                      " --experiences " + sh_quote((dir / "experiences.json").string());
    CommandResult r1 = cli(cmd + " --out " + sh_quote((dir / "v1.jsonl").string()));
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.out.find("identified 2 of 4") != std::string::npos);
    CommandResult r2 = cli(cmd + " --out " + sh_quote((dir / "v2.jsonl").string()));
    REQUIRE(r2.exit_code == 0);
    CHECK(read_file(dir / "v1.jsonl") == read_file(dir / "v2.jsonl"));

    // four verdict lines with sample ids and truth labels
    auto lines = split_lines(read_file(dir / "v1.jsonl"));
    REQUIRE(lines.size() == 4);
    nlohmann::json first = nlohmann::json::parse(lines[0]);
    CHECK(first.at("sample_id") == "s000000");
    CHECK(first.at("truth") == "POSITIVE");
    CHECK(first.at("decision") == "OBSOLETE");
    CHECK(first.contains("rendered_prompt"));
    fs::remove_all(dir);
}

TEST_CASE("cli identify exits 2 when the experiences file is missing") {
    fs::path dir = fresh_dir("identify_noexp");
    write_pairs_file(dir / "pairs.jsonl", four_labeled_pairs());
    write_transcript(dir / "transcript.jsonl", {"VERDICT: NO"});
    CommandResult r = cli("--provider scripted:" + (dir / "transcript.jsonl").string() +
                          " identify --pairs " + sh_quote((dir / "pairs.jsonl").string()) +
                          " --experiences /no/such/experiences.json --out " +
                          sh_quote((dir / "v.jsonl").string()));
    CHECK(r.exit_code == 2);
    fs::remove_all(dir);
}

TEST_CASE("cli identify --experience-learn learns before judging") {
    fs::path dir = fresh_dir("identify_learn");
    write_pairs_file(dir / "pairs.jsonl", four_labeled_pairs());
    write_transcript(dir / "transcript.jsonl",
                     {"AL: a rule.\nPI: b rule.\nCP: c rule.", "VERDICT: YES", "VERDICT: YES",
                      "VERDICT: NO", "VERDICT: NO"});
    CommandResult r = cli("--provider scripted:" + (dir / "transcript.jsonl").string() +
                          " identify --pairs " + sh_quote((dir / "pairs.jsonl").string()) +
                          " --experiences " + sh_quote((dir / "learned.json").string()) +
                          " --experience-learn --out " + sh_quote((dir / "v.jsonl").string()));
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(dir / "learned.json"));
    CHECK(read_file(dir / "learned.json").find("a rule.") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cli update replays the case study through config-selected doubles") {
    fs::path dir = fresh_dir("update_case");
    write_pairs_file(dir / "pairs.jsonl", {fixtures::case_study_pair()});
    write_transcript(dir / "transcript.jsonl", fixtures::case_study_replies());
    write_reports(dir / "reports.jsonl", fixtures::case_study_reports());

    // one positive pair in the store so retrieval has something to return
    ChangePair seed = fixtures::case_study_pair();
    write_pairs_file(dir / "seed.jsonl", {seed});
    REQUIRE(cli("build-kb --pairs " + sh_quote((dir / "seed.jsonl").string()) + " --out " +
                sh_quote((dir / "kb").string()))
                .exit_code == 0);

    write_file_atomic(dir / "run.conf",
                      "chat.provider = scripted:" + (dir / "transcript.jsonl").string() +
                          "\nadapter.kind = scripted\nadapter.script = " +
                          (dir / "reports.jsonl").string() + "\n");

    CommandResult r = cli("--config " + sh_quote((dir / "run.conf").string()) +
                          " update --pairs " + sh_quote((dir / "pairs.jsonl").string()) +
                          " --kb " + sh_quote((dir / "kb").string()) + " --out " +
                          sh_quote((dir / "sessions").string()) + " --force-all");
    REQUIRE(r.exit_code == 0);

    nlohmann::json session =
        nlohmann::json::parse(read_file(dir / "sessions/session_s000000.json"));
    CHECK(session.at("outcome") == "SUCCESS");
    REQUIRE(session.at("iterations").size() == 4);
    CHECK(session.at("iterations")[0].at("feedback_kind") == "COMPILE_ERROR");
    CHECK(session.at("iterations")[1].at("feedback_kind") == "COMPILE_ERROR");
    CHECK(session.at("iterations")[2].at("feedback_kind") == "TEST_FAILURE");
    CHECK(session.at("iterations")[3].at("feedback_kind") == "NONE");

    nlohmann::json summary = nlohmann::json::parse(read_file(dir / "sessions/update_metrics.json"));
    CHECK(summary.at("ucr") == 1.0);
    fs::remove_all(dir);
}

TEST_CASE("cli update with an always-failing provider reports zero UCR") {
    fs::path dir = fresh_dir("update_fail");
    write_pairs_file(dir / "pairs.jsonl", {fixtures::case_study_pair()});

    std::vector<std::string> replies;
    std::vector<ValidationReport> reports;
    for (int i = 0; i < 8; ++i) {
        replies.push_back(fixtures::fenced("void broken() { }\n"));
        ValidationReport bad;
        bad.level = QualityLevel::COMPILATION_FAILURE;
        bad.compile_diagnostics = {"cannot find symbol"};
        reports.push_back(bad);
    }
    write_transcript(dir / "transcript.jsonl", replies);
    write_reports(dir / "reports.jsonl", reports);
    write_file_atomic(dir / "run.conf",
                      "chat.provider = scripted:" + (dir / "transcript.jsonl").string() +
                          "\nadapter.kind = scripted\nadapter.script = " +
                          (dir / "reports.jsonl").string() + "\nupdate.zero_shot = true\n");

    CommandResult r = cli("--config " + sh_quote((dir / "run.conf").string()) +
                          " update --pairs " + sh_quote((dir / "pairs.jsonl").string()) +
                          " --out " + sh_quote((dir / "sessions").string()) + " --force-all");
    REQUIRE(r.exit_code == 0);
    nlohmann::json summary = nlohmann::json::parse(read_file(dir / "sessions/update_metrics.json"));
    CHECK(summary.at("ucr") == 0.0);
    CHECK(summary.at("csr") == 0.0);
    nlohmann::json session =
        nlohmann::json::parse(read_file(dir / "sessions/session_s000000.json"));
    CHECK(session.at("outcome") == "EXHAUSTED");
    CHECK(session.at("iterations").size() == 8);
    fs::remove_all(dir);
}

TEST_CASE("cli update drives a real workspace through command validation") {
    auto repo = fixtures::make_rename_repo("cli_ws");
    fs::path dir = fresh_dir("update_ws");

    CommandResult mined = cli("mine --repo " + sh_quote(repo.dir().string()) + " --from " +
                              repo.shas()[0] + " --to " + repo.shas()[1] + " --out " +
                              sh_quote((dir / "pairs.jsonl").string()));
    REQUIRE(mined.exit_code == 0);

    write_transcript(dir / "transcript.jsonl", {fixtures::fenced(fixtures::kTestNew)});

    // changed method-relative lines {1,2} sit at file lines {4,5} after the
    // checkout; the canned report marks exactly those as covered
    std::string report =
        "<report name=\"ws\"><package name=\"com/acme/stats\">"
        "<sourcefile name=\"ContinuousDistributions.java\">"
        "<line nr=\"4\" ci=\"2\"/><line nr=\"5\" ci=\"2\"/>"
        "</sourcefile></package></report>";
    write_file_atomic(dir / "canned_report.xml", report);

    write_file_atomic(dir / "run.conf",
                      "chat.provider = scripted:" + (dir / "transcript.jsonl").string() +
                          "\nadapter.kind = commands"
                          "\nadapter.compile_cmd = true"
                          "\nadapter.test_cmd = true"
                          "\nadapter.coverage_cmd = mkdir -p target && cp " +
                          (dir / "canned_report.xml").string() +
                          " target/report.xml"
                          "\nadapter.report_path = target/report.xml"
                          "\nadapter.coverage_format = xml"
                          "\nupdate.zero_shot = true"
                          "\nworkspace.repo = " + repo.dir().string() +
                          "\nworkspace.root = " + (dir / "ws").string() + "\n");

    CommandResult r = cli("--config " + sh_quote((dir / "run.conf").string()) +
                          " update --pairs " + sh_quote((dir / "pairs.jsonl").string()) +
                          " --out " + sh_quote((dir / "sessions").string()) + " --force-all");
    REQUIRE(r.exit_code == 0);

    nlohmann::json session =
        nlohmann::json::parse(read_file(dir / "sessions/session_s000000.json"));
    CHECK(session.at("outcome") == "SUCCESS");
    CHECK(session.at("iterations").size() == 1);

    // the scratch checkout holds the post-change tree with the spliced test
    fs::path ws = dir / "ws/s000000";
    std::string prod = read_file(ws / fixtures::kProdPath);
    CHECK(prod.find("uniformCdf(double x") != std::string::npos);
    std::string test = read_file(ws / fixtures::kTestPath);
    CHECK(test.find("uniformCdf(4.0, 2.0, 7.0, 1.0)") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("cli evaluate computes metrics from direct confusion counts") {
    fs::path dir = fresh_dir("eval_counts");
    CommandResult r = cli("evaluate --confusion 496,53,1658,24 --out " +
                          sh_quote((dir / "metrics.json").string()));
    REQUIRE(r.exit_code == 0);
    nlohmann::json metrics = nlohmann::json::parse(read_file(dir / "metrics.json"));
    CHECK(metrics.at("metrics").at("accuracy").get<double>() ==
          Catch::Approx(2154.0 / 2231.0).margin(1e-9));
    CHECK(metrics.at("metrics").at("precision_pos").get<double>() ==
          Catch::Approx(0.90346).margin(1e-5));
    CHECK(fs::exists(dir / "metrics.txt"));
    fs::remove_all(dir);
}

TEST_CASE("cli evaluate joins verdicts and sessions into two-phase accuracy") {
    fs::path dir = fresh_dir("eval_join");
    fs::create_directories(dir / "sessions");

    // 5 positives: 4 identified, 3 of those fully updated -> 0.6
    std::string verdicts;
    for (int i = 0; i < 5; ++i) {
        nlohmann::json j{{"sample_id", "s00000" + std::to_string(i)},
                         {"truth", "POSITIVE"},
                         {"decision", i < 4 ? "OBSOLETE" : "NOT_OBSOLETE"},
                         {"explanation", ""}};
        verdicts += j.dump() + "\n";
    }
    write_file_atomic(dir / "verdicts.jsonl", verdicts);

    for (int i = 0; i < 4; ++i) {
        UpdateSession s;
        s.sample_id = "s00000" + std::to_string(i);
        s.project = "fixture";
        IterationRecord it;
        it.iteration = 1;
        it.candidate_test = "void t() { }";
        it.validation.level =
            i < 3 ? QualityLevel::SATISFIES_ALL : QualityLevel::TEST_FAILURE;
        it.feedback_kind = i < 3 ? FeedbackKind::NONE : FeedbackKind::TEST_FAILURE;
        s.iterations.push_back(it);
        s.outcome = i < 3 ? UpdateOutcome::SUCCESS : UpdateOutcome::EXHAUSTED;
        write_file_atomic(dir / ("sessions/session_" + s.sample_id + ".json"),
                          session_to_json(s).dump(2) + "\n");
    }

    CommandResult r = cli("evaluate --verdicts " + sh_quote((dir / "verdicts.jsonl").string()) +
                          " --sessions " + sh_quote((dir / "sessions").string()) + " --out " +
                          sh_quote((dir / "metrics.json").string()));
    REQUIRE(r.exit_code == 0);
    nlohmann::json metrics = nlohmann::json::parse(read_file(dir / "metrics.json"));
    CHECK(metrics.at("metrics").at("two_phase_accuracy").get<double>() == Catch::Approx(0.6));
    fs::remove_all(dir);
}

TEST_CASE("cli evaluate exits 2 on empty input") {
    fs::path dir = fresh_dir("eval_empty");
    write_file_atomic(dir / "verdicts.jsonl", "");
    CommandResult r = cli("evaluate --verdicts " + sh_quote((dir / "verdicts.jsonl").string()) +
                          " --out " + sh_quote((dir / "m.json").string()));
    CHECK(r.exit_code == 2);
    fs::remove_all(dir);
}
