#include <doctest.h>

#include "support.hpp"
#include "toolret/catalog.hpp"

using namespace toolret;
using test_support::make_tool;
using test_support::TempDir;

namespace {

std::string three_tools() {
    return R"({"id":"A","name":"Alpha","category":"x","description":"first tool"}
{"id":"B","name":"Beta","category":"x","description":"second tool"}
{"id":"C","name":"Gamma","category":"y","description":"third tool"}
)";
}

std::string hundred_queries() {
    std::string out;
    for (int i = 0; i < 100; ++i)
        out += R"({"id":"q)" + std::to_string(i) + R"(","query":"text )" + std::to_string(i) +
               R"(","relevant_tool_ids":["A"]})" + "\n";
    return out;
}

}  // namespace

TEST_SUITE("catalog") {
    TEST_CASE("load three tools") {
        TempDir dir("catalog");
        write_file(dir.file("tools.jsonl"), three_tools());
        auto c = load_catalog(dir.file("tools.jsonl"));
        CHECK(c.size() == 3);
        CHECK(c.version() == 0);
        CHECK(c.at("B").name == "Beta");
        CHECK(c.at("B").base_description == "second tool");
    }

    TEST_CASE("duplicate id names the id") {
        const std::string content = R"({"id":"X","name":"a","category":"c","description":"d1"}
{"id":"X","name":"b","category":"c","description":"d2"}
)";
        try {
            parse_catalog(content);
            FAIL("expected a duplicate-id error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("'X'") != std::string::npos);
        }
    }

    TEST_CASE("empty file is an empty catalog") {
        auto c = parse_catalog("");
        CHECK(c.size() == 0);
        CHECK(c.empty());
    }

    TEST_CASE("malformed records are rejected with the line number") {
        CHECK_THROWS_WITH_AS(parse_catalog("{\"id\":\"A\"}\n"), doctest::Contains("line 1"), ValidationError);
        CHECK_THROWS_AS(parse_catalog("not json\n"), ValidationError);
        CHECK_THROWS_AS(parse_catalog(R"({"id":"A","name":"a","category":"c","description":""})"), ValidationError);
    }

    TEST_CASE("at() on an unknown id throws NotFoundError") {
        auto c = parse_catalog(three_tools());
        CHECK_THROWS_AS(c.at("ghost"), NotFoundError);
        CHECK(c.find("ghost") == nullptr);
    }

    TEST_CASE("serialize round trip keeps history") {
        auto c = parse_catalog(three_tools());
        c = apply_description(c, "A", "better first tool", 1, 0.5);
        auto back = parse_catalog(serialize_catalog(c));
        CHECK(back.at("A").description == "better first tool");
        CHECK(back.at("A").base_description == "first tool");
        REQUIRE(back.at("A").history.size() == 1);
        CHECK(back.at("A").history[0].round == 1);
        CHECK(back.at("A").history[0].dev_recall == 0.5);
        CHECK(serialize_catalog(back) == serialize_catalog(c));
    }

    TEST_CASE("apply_description grows history and bumps the version") {
        auto c = parse_catalog(three_tools());
        auto once = apply_description(c, "A", "new text", 1, 0.3);
        CHECK(once.at("A").history.size() == 1);
        CHECK(once.version() == c.version() + 1);
        auto twice = apply_description(once, "A", "new text", 2, 0.3);
        CHECK(twice.at("A").history.size() == 2);
        CHECK(twice.version() == c.version() + 2);
        CHECK(c.at("A").description == "first tool");  // input untouched
        CHECK_THROWS_AS(apply_description(c, "ghost", "x", 1, 0.0), NotFoundError);
        CHECK_THROWS_AS(apply_description(c, "A", "", 1, 0.0), ValidationError);
    }

    TEST_CASE("fingerprint tracks descriptions") {
        auto c = parse_catalog(three_tools());
        auto edited = apply_description(c, "A", "other", 1, 0.0);
        CHECK(c.fingerprint() != edited.fingerprint());
        CHECK(c.fingerprint() == parse_catalog(three_tools()).fingerprint());
    }

    TEST_CASE("100 records split 70/15/15") {
        auto catalog = parse_catalog(three_tools());
        auto ds = parse_queries(hundred_queries(), catalog, 7);
        CHECK(ds.split(Split::train).size() == 70);
        CHECK(ds.split(Split::dev).size() == 15);
        CHECK(ds.split(Split::test).size() == 15);
    }

    TEST_CASE("splits are deterministic and depend on the seed") {
        auto catalog = parse_catalog(three_tools());
        auto a = parse_queries(hundred_queries(), catalog, 7);
        auto b = parse_queries(hundred_queries(), catalog, 7);
        auto c = parse_queries(hundred_queries(), catalog, 8);
        bool differs = false;
        for (std::size_t i = 0; i < a.records.size(); ++i) {
            CHECK(a.records[i].split == b.records[i].split);
            differs |= a.records[i].split != c.records[i].split;
        }
        CHECK(differs);
    }

    TEST_CASE("split assignment ignores file order") {
        auto catalog = parse_catalog(three_tools());
        auto lines = split_lines(hundred_queries());
        std::reverse(lines.begin(), lines.end());
        auto forward = parse_queries(hundred_queries(), catalog, 7);
        auto reversed = parse_queries(join(lines, "\n"), catalog, 7);
        for (const auto& r : forward.records) CHECK(reversed.find(r.id)->split == r.split);
    }

    TEST_CASE("split counts for 30 records are 21/4/5") {
        auto catalog = parse_catalog(three_tools());
        std::string content;
        for (int i = 0; i < 30; ++i)
            content += R"({"id":"q)" + std::to_string(i) + R"(","query":"t","relevant_tool_ids":["A"]})" "\n";
        auto ds = parse_queries(content, catalog, 42);
        CHECK(ds.split(Split::train).size() == 21);
        CHECK(ds.split(Split::dev).size() == 4);
        CHECK(ds.split(Split::test).size() == 5);
    }

    TEST_CASE("unknown tool reference cites the tool") {
        auto catalog = parse_catalog(three_tools());
        CHECK_THROWS_WITH_AS(parse_queries(R"({"id":"q1","query":"x","relevant_tool_ids":["ghost"]})", catalog, 1),
                             doctest::Contains("ghost"), ValidationError);
    }

    TEST_CASE("queries need a non-empty gold set and unique ids") {
        auto catalog = parse_catalog(three_tools());
        CHECK_THROWS_AS(parse_queries(R"({"id":"q1","query":"x","relevant_tool_ids":[]})", catalog, 1),
                        ValidationError);
        CHECK_THROWS_AS(parse_queries("{\"id\":\"q1\",\"query\":\"x\",\"relevant_tool_ids\":[\"A\"]}\n"
                                      "{\"id\":\"q1\",\"query\":\"y\",\"relevant_tool_ids\":[\"B\"]}\n",
                                      catalog, 1),
                        ValidationError);
    }

    TEST_CASE("graded labels round trip") {
        auto catalog = parse_catalog(three_tools());
        auto ds = parse_queries(R"({"id":"q1","query":"x","relevant_tool_ids":["A","B"],"graded":{"A":2,"B":1}})",
                                catalog, 1);
        REQUIRE(ds.records.size() == 1);
        CHECK(ds.records[0].graded.at("A") == 2);
        auto again = parse_queries(serialize_queries(ds.records), catalog, 1);
        CHECK(again.records[0] == ds.records[0]);
    }

    TEST_CASE("cache applies and reverts") {
        auto base = parse_catalog(three_tools());
        auto edited = apply_description(apply_description(base, "B", "b v1", 1, 0.2), "B", "b v2", 2, 0.4);
        auto cache = cache_from_catalog(edited);
        REQUIRE(cache.size() == 1);
        CHECK(cache.at("B").description == "b v2");
        CHECK(cache.at("B").round == 2);

        auto restored = apply_cache(base, parse_cache(serialize_cache(cache)));
        CHECK(restored.at("B").description == "b v2");
        CHECK(restored.at("A").description == "first tool");
        CHECK(apply_cache(base, {}).fingerprint() == base.fingerprint());

        TempDir dir("cache");
        save_cache(cache, dir.file("cache.json"));
        CHECK(load_cache(dir.file("cache.json")) == cache);
    }

    TEST_CASE("cache entry for an unknown tool is rejected") {
        auto base = parse_catalog(three_tools());
        DescriptionCache cache{{"ghost", {"text", 1, 0.1}}};
        CHECK_THROWS_AS(apply_cache(base, cache), NotFoundError);
    }

    TEST_CASE("from_tools validates") {
        CHECK_THROWS_AS(ToolCatalog::from_tools({make_tool("", "x")}), ValidationError);
        CHECK_THROWS_AS(ToolCatalog::from_tools({make_tool("a", "x"), make_tool("a", "y")}), ValidationError);
        auto c = ToolCatalog::from_tools({make_tool("b", "x"), make_tool("a", "y")});
        CHECK(c.ids() == std::vector<std::string>{"a", "b"});
    }
}
