#include <doctest.h>

#include <fstream>
#include <sstream>

#include "support.hpp"
#include "toolret/fixtures.hpp"

using namespace toolret;
namespace fs = std::filesystem;

namespace {

// Pinned when the suite was generated; any change to generation shows up here.
constexpr const char* kPinnedChecksum = "a1ac64aebc14775f";

const std::string kRoot = TOOLRET_FIXTURE_DIR;

std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path().string());
    return out;
}

std::string category_of(const ToolCatalog& c, const std::string& id) { return c.at(id).category; }

}  // namespace

TEST_SUITE("fixtures") {
    TEST_CASE("checked-in suite matches its pinned checksum") {
        CHECK(fixtures::suite_checksum(kRoot) == kPinnedChecksum);
        CHECK(trim(read_file(kRoot + "/CHECKSUM")) == kPinnedChecksum);
    }

    TEST_CASE("regeneration is byte-identical to the checked-in suite") {
        test_support::TempDir a("fx-a"), b("fx-b");
        auto ga = fixtures::generate_fixture(a.path().string());
        auto gb = fixtures::generate_fixture(b.path().string());
        CHECK(ga.checksum == kPinnedChecksum);
        CHECK(gb.checksum == ga.checksum);
        auto ta = read_tree(a.path()), tb = read_tree(b.path()), committed = read_tree(kRoot);
        CHECK(ta == tb);
        CHECK(ta == committed);
    }

    TEST_CASE("checksum reacts to any file change") {
        test_support::TempDir d("fx-edit");
        fs::copy(kRoot, d.path(), fs::copy_options::recursive);
        const auto before = fixtures::suite_checksum(d.path().string());
        std::ofstream(d.file("base/toolret.conf"), std::ios::app) << "# touched\n";
        CHECK(fixtures::suite_checksum(d.path().string()) != before);
    }

    TEST_CASE("catalog and query shape") {
        for (const char* sub : {"/base", "/eg_variant"}) {
            auto catalog = load_catalog(kRoot + sub + "/tools.jsonl");
            CHECK(catalog.size() == fixtures::kToolCount);
            auto data = load_queries(kRoot + sub + "/queries.jsonl", catalog, fixtures::kDefaultSeed);
            REQUIRE(data.records.size() == fixtures::kQueryCount);
            for (const auto& q : data.records) {
                CHECK(q.gold_tool_ids.size() >= 2);
                CHECK(q.gold_tool_ids.size() <= 4);
                std::set<std::string> cats;
                for (const auto& id : q.gold_tool_ids) cats.insert(category_of(catalog, id));
                CHECK(cats.size() >= 2);
            }
            CHECK(data.split(Split::train).size() == 21);
            CHECK(data.split(Split::dev).size() == 4);
            CHECK(data.split(Split::test).size() == 5);
        }
    }

    TEST_CASE("the variant differs only in the poor tools") {
        auto world = fixtures::build_world();
        std::set<std::string> changed;
        for (const auto& [id, t] : world.catalog.tools())
            if (t.description != world.variant_catalog.at(id).description) changed.insert(id);
        CHECK(changed == std::set<std::string>(world.poor_tool_ids.begin(), world.poor_tool_ids.end()));
        CHECK(changed.size() == fixtures::kPoorToolCount);
    }

    TEST_CASE("both scenarios replay from the transcripts without a miss") {
        fixtures::SuiteConfig cfg;
        auto world = fixtures::build_world();
        {
            const std::string dir = kRoot + "/base";
            auto catalog = load_catalog(dir + "/tools.jsonl");
            auto data = load_queries(dir + "/queries.jsonl", catalog, cfg.split_seed);
            auto llm = std::make_shared<llm::ScriptedProvider>(fixtures::load_transcript_dir(dir + "/transcripts"));
            auto out = fixtures::run_base_scenario(catalog, data.records, world, llm, cfg);
            auto expected = nlohmann::json::parse(read_file(dir + "/expected.json"));
            CHECK(out.pnr_recall == expected["pnr_recall"].get<double>());
            CHECK(out.one_shot_recall == expected["one_shot_recall"].get<double>());
            CHECK(llm->misses() == 0);
        }
        {
            const std::string dir = kRoot + "/eg_variant";
            auto catalog = load_catalog(dir + "/tools.jsonl");
            auto data = load_queries(dir + "/queries.jsonl", catalog, cfg.split_seed);
            auto llm = std::make_shared<llm::ScriptedProvider>(fixtures::load_transcript_dir(dir + "/transcripts"));
            auto out = fixtures::run_variant_scenario(catalog, data.records, llm, cfg);
            auto expected = nlohmann::json::parse(read_file(dir + "/expected.json"));
            CHECK(out.dev_before.mean_recall == expected["dev_before"]["mean_recall"].get<double>());
            CHECK(out.dev_after.mean_recall == expected["dev_after"]["mean_recall"].get<double>());
            CHECK(out.eg.report.rounds.size() == static_cast<std::size_t>(expected["rounds"].get<int>()));
        }
    }

    TEST_CASE("transcript directories round trip") {
        const std::string dir = kRoot + "/eg_variant/transcripts";
        auto t = fixtures::load_transcript_dir(dir);
        test_support::TempDir out("fx-tr");
        fixtures::save_transcript_dir(t, out.path().string());
        CHECK(read_tree(out.path()) == read_tree(dir));
    }

    TEST_CASE("conf lists the suite settings with dashed keys") {
        auto conf = read_file(kRoot + "/base/toolret.conf");
        CHECK(conf.find("plan-seed=42") != std::string::npos);
        CHECK(conf.find("max-rounds=5") != std::string::npos);
        CHECK(conf.find("plan_seed") == std::string::npos);
    }
}
