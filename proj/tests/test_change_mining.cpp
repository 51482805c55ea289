#include "ptco/change_mining.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "fixture_repo.hpp"

using namespace ptco;
namespace fs = std::filesystem;

TEST_CASE("rename commit yields one EDIT/EDIT positive pair") {
    auto repo = fixtures::make_rename_repo("rename");
    MiningResult mined =
        mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);

    REQUIRE(mined.pairs.size() == 1);
    const ChangePair& pair = mined.pairs[0];
    CHECK(pair.change_p.change_type == ChangeType::EDIT);
    CHECK(pair.change_t.change_type == ChangeType::EDIT);
    CHECK(pair.change_p.version == repo.shas()[1]);
    CHECK(pair.change_p.version.size() == 40);
    CHECK(pair.change_p.package == "com.acme.stats");
    CHECK(pair.change_p.class_name == "ContinuousDistributions");
    CHECK(pair.change_t.class_name == "ContinuousDistributionsTest");
    CHECK(pair.prod_old.find("UniformCdf") != std::string::npos);
    CHECK(pair.prod_new.find("uniformCdf") != std::string::npos);
    REQUIRE(pair.test_new.has_value());
    CHECK(pair.label == PairLabel::POSITIVE);
    CHECK(*pair.test_new != pair.test_old);
    CHECK(mined.warnings.empty());
}

TEST_CASE("empty commit range mines nothing") {
    auto repo = fixtures::make_rename_repo("emptyrange");
    MiningResult mined = mine_change_pairs(repo.dir(), repo.shas()[1], repo.shas()[1]);
    CHECK(mined.pairs.empty());
}

TEST_CASE("documentation-only commits contribute no pairs") {
    fixtures::GitFixture repo("docs");
    repo.write(fixtures::kProdPath, fixtures::kDistFileOld);
    repo.write(fixtures::kTestPath, fixtures::kDistTestOld);
    repo.commit("initial");
    repo.write(fixtures::kProdPath, fixtures::kDistFileNew);
    repo.write(fixtures::kTestPath, fixtures::kDistTestNew);
    repo.commit("code change");
    repo.write("README.md", "# readme\n");
    repo.commit("add readme");
    repo.write("docs/guide.md", "guide\n");
    repo.commit("add guide");

    MiningResult mined = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[3]);
    // hand enumeration: only the code commit pairs UniformCdf with its test
    REQUIRE(mined.pairs.size() == 1);
    CHECK(mined.pairs[0].change_p.version == repo.shas()[1]);
}

TEST_CASE("production edit without a test edit mines a negative pair") {
    fixtures::GitFixture repo("negative");
    repo.write(fixtures::kProdPath, fixtures::kDistFileOld);
    repo.write(fixtures::kTestPath, fixtures::kDistTestOld);
    repo.commit("initial");
    // change only the tested method's body; the test file is untouched
    std::string prod_edit = fixtures::kDistFileOld;
    std::size_t at = prod_edit.find("double probability = Uniform(x, a, b);");
    REQUIRE(at != std::string::npos);
    prod_edit.replace(at, std::string("double probability = Uniform(x, a, b);").size(),
                      "double probability = Uniform(x, a, b) * 1.0;");
    repo.write(fixtures::kProdPath, prod_edit);
    repo.commit("tweak UniformCdf");

    MiningResult mined = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);
    REQUIRE(mined.pairs.size() == 1);
    const ChangePair& pair = mined.pairs[0];
    CHECK(pair.label == PairLabel::NEGATIVE);
    CHECK_FALSE(pair.test_new.has_value());
    CHECK(pair.test_old.find("testUniformCdf") != std::string::npos);
}

TEST_CASE("mining is deterministic") {
    auto repo = fixtures::make_rename_repo("determinism");
    MiningResult a = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);
    MiningResult b = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);
    CHECK(pairs_to_jsonl(a.pairs) == pairs_to_jsonl(b.pairs));
}

TEST_CASE("no pair is labeled positive with unchanged test text") {
    auto repo = fixtures::make_rename_repo("soundness");
    MiningResult mined = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);
    for (const ChangePair& p : mined.pairs) {
        if (p.label == PairLabel::POSITIVE) {
            REQUIRE(p.test_new.has_value());
            CHECK(*p.test_new != p.test_old);
        }
    }
}

TEST_CASE("unreadable repo and unknown commits raise typed errors") {
    CHECK_THROWS_AS(mine_change_pairs("/nonexistent/repo", "a", "b"), RepoUnreadable);
    auto repo = fixtures::make_rename_repo("badcommit");
    CHECK_THROWS_AS(
        mine_change_pairs(repo.dir(), std::string(40, '1'), repo.shas()[1]),
        CommitNotFound);
}

TEST_CASE("malformed source files are skipped with a warning") {
    fixtures::GitFixture repo("malformed");
    repo.write(fixtures::kProdPath, fixtures::kDistFileOld);
    repo.write(fixtures::kTestPath, fixtures::kDistTestOld);
    repo.write("src/main/java/com/acme/stats/Broken.java",
               "public class Broken {\n    void f() {\n");
    repo.commit("initial");
    repo.write(fixtures::kProdPath, fixtures::kDistFileNew);
    repo.write(fixtures::kTestPath, fixtures::kDistTestNew);
    repo.write("src/main/java/com/acme/stats/Broken.java",
               "public class Broken {\n    void f() {\n        g(\n");
    repo.commit("still broken");

    MiningResult mined = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);
    REQUIRE(mined.pairs.size() == 1);  // the good pair still mines
    REQUIRE_FALSE(mined.warnings.empty());
    CHECK(mined.warnings[0].find("Broken.java") != std::string::npos);
}

TEST_CASE("pairs serialize to jsonl and back") {
    auto repo = fixtures::make_rename_repo("jsonl");
    MiningResult mined = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);
    std::string jsonl = pairs_to_jsonl(mined.pairs);

    // exact field names on the wire
    json first = json::parse(split_lines(jsonl)[0]);
    for (const char* field :
         {"group", "project", "change_p", "change_t", "prod_old", "prod_new", "test_old",
          "test_new", "label"})
        CHECK(first.contains(field));
    for (const char* field : {"version", "module", "package", "class", "type"})
        CHECK(first.at("change_p").contains(field));

    std::vector<ChangePair> back = pairs_from_jsonl(jsonl);
    CHECK(pairs_to_jsonl(back) == jsonl);
}

TEST_CASE("apply_labels joins ground truth by version and method names") {
    auto repo = fixtures::make_rename_repo("labels");
    MiningResult mined = mine_change_pairs(repo.dir(), repo.shas()[0], repo.shas()[1]);
    REQUIRE(mined.pairs.size() == 1);

    fs::path truth = fs::temp_directory_path() / "ptco_truth.jsonl";
    json line{{"version", repo.shas()[1]},
              {"prod_method", "uniformCdf"},
              {"test_method", "testUniformCdf"},
              {"label", "NEGATIVE"}};
    write_file_atomic(truth, line.dump() + "\n");

    std::size_t applied = apply_labels(mined.pairs, truth);
    CHECK(applied == 1);
    CHECK(mined.pairs[0].label == PairLabel::NEGATIVE);
    fs::remove(truth);
}
