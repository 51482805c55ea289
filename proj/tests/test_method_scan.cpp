#include "ptco/method_scan.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "fixture_repo.hpp"

using namespace ptco;

TEST_CASE("scan_methods finds names, arity and spans") {
    auto methods = scan_methods(fixtures::kDistFileOld);
    REQUIRE(methods.size() == 2);
    CHECK(methods[0].name == "UniformCdf");
    CHECK(methods[0].arity == 3);
    CHECK(methods[1].name == "Uniform");
    CHECK(methods[1].arity == 3);
    CHECK(methods[0].text.find("public static double UniformCdf") == 0);
    CHECK(methods[0].text.back() == '}');
}

TEST_CASE("scanner keeps annotations with the method") {
    auto methods = scan_methods(fixtures::kDistTestOld);
    REQUIRE(methods.size() == 1);
    CHECK(methods[0].name == "testUniformCdf");
    CHECK(methods[0].arity == 0);
    CHECK(methods[0].text.rfind("@Test", 0) == 0);
}

TEST_CASE("scanner ignores calls, control flow and literals") {
    const char* source =
        "class C {\n"
        "    // comment with if (x) { ... }\n"
        "    String s = \"if (fake) { }\";\n"
        "    int compute(int a, int b) {\n"
        "        if (a > b) { return helper(a, b); }\n"
        "        for (int i = 0; i < a; i++) { b += i; }\n"
        "        Runnable r = new Runnable() { };\n"
        "        return b;\n"
        "    }\n"
        "    Map<String, List<Integer>> lookup(Map<String, Integer> m) { return null; }\n"
        "}\n";
    auto methods = scan_methods(source);
    REQUIRE(methods.size() == 2);
    CHECK(methods[0].name == "compute");
    CHECK(methods[0].arity == 2);
    CHECK(methods[1].name == "lookup");
    CHECK(methods[1].arity == 1);  // generics commas do not count
}

TEST_CASE("scanner reports unbalanced braces") {
    CHECK_THROWS_AS(scan_methods("class C { void f() { }"), Error);
    CHECK_THROWS_AS(scan_methods("class C } {"), Error);
}

TEST_CASE("find_method and replace_method") {
    auto found = find_method(fixtures::kDistFileOld, "Uniform", 3);
    REQUIRE(found.has_value());
    CHECK(found->name == "Uniform");

    std::string replacement = "static double Uniform(int x) {\n        return x;\n    }";
    auto updated = replace_method(fixtures::kDistFileOld, "Uniform", replacement, 3);
    REQUIRE(updated.has_value());
    CHECK(updated->find("return x;") != std::string::npos);
    CHECK(updated->find("(b - a)") == std::string::npos);
    // the other method is untouched
    CHECK(updated->find("UniformCdf") != std::string::npos);

    CHECK_FALSE(replace_method(fixtures::kDistFileOld, "missing", "x", -1).has_value());
}

TEST_CASE("methods with throws clauses and constructors are found") {
    const char* source =
        "public class Widget {\n"
        "    public Widget(int size) { this.size = size; }\n"
        "    public void load(String path) throws IOException, FooException {\n"
        "        open(path);\n"
        "    }\n"
        "}\n";
    auto methods = scan_methods(source);
    REQUIRE(methods.size() == 2);
    CHECK(methods[0].name == "Widget");
    CHECK(methods[0].arity == 1);
    CHECK(methods[1].name == "load");
    CHECK(methods[1].arity == 1);
}
