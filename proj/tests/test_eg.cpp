#include <doctest.h>

#include <functional>
#include <regex>

#include "support.hpp"
#include "toolret/eg_optimizer.hpp"
#include "toolret/fixtures.hpp"

using namespace toolret;
using namespace toolret::eg;
using test_support::make_query;
using test_support::make_tool;

namespace {

// Answers with fixed tool sets per query id; ids listed in `broken` fail.
class StubRetriever final : public pipeline::ToolRetriever {
public:
    StubRetriever(ToolCatalog c, std::map<std::string, std::set<std::string>> answers, std::set<std::string> broken = {})
        : catalog_(std::move(c)), answers_(std::move(answers)), broken_(std::move(broken)) {}
    pipeline::PnRResult retrieve(const QueryRecord& q) override {
        pipeline::PnRResult r;
        r.query_id = q.id;
        if (broken_.count(q.id)) {
            r.status = pipeline::RunStatus::failed;
            r.error = "stub failure";
            return r;
        }
        r.tools = answers_.at(q.id);
        r.ranking.assign(r.tools.begin(), r.tools.end());
        return r;
    }
    const ToolCatalog& catalog() const override { return catalog_; }

private:
    ToolCatalog catalog_;
    std::map<std::string, std::set<std::string>> answers_;
    std::set<std::string> broken_;
};

ToolCatalog abc() {
    return ToolCatalog::from_tools({make_tool("a", "alpha text"), make_tool("b", "beta text"), make_tool("c", "gamma text")});
}

// Tools whose description reads "<word> level N" are picked by the predictor for the
// sub-queries "q0" .. "q{N-1}". The planner answers with the query text and stops after one step.
struct LevelWorld {
    ToolCatalog catalog;
    std::shared_ptr<llm::FunctionProvider> llm;
    std::vector<QueryRecord> dev, train;
};

LevelWorld level_world(std::size_t n_dev, std::size_t n_train, int t1_level, int t2_level,
                       std::function<std::string(const llm::LlmRequest&)> optimizer) {
    LevelWorld w;
    w.catalog = ToolCatalog::from_tools({make_tool("t1", fmt::format("sky level {}", t1_level), "Sky"),
                                         make_tool("t2", fmt::format("sea level {}", t2_level), "Sea"),
                                         make_tool("t3", "filler tool three", "Three"),
                                         make_tool("t4", "filler tool four", "Four")});
    w.llm = std::make_shared<llm::FunctionProvider>([optimizer](const llm::LlmRequest& r) -> std::string {
        switch (r.template_id) {
            case llm::TemplateId::planner:
                if (r.variables.at("task") == plan::judge_task()) return "Yes";
                return r.variables.at("query");
            case llm::TemplateId::predictor: {
                const int q = std::stoi(r.variables.at("sub_query").substr(1));
                std::vector<std::string> names;
                static const std::regex line(R"(\d+\. (\w+): \w+ level (\d+)\b.*)");
                for (const auto& l : split_lines(r.variables.at("tools"))) {
                    std::smatch m;
                    if (std::regex_match(l, m, line) && q < std::stoi(m[2])) names.push_back(m[1]);
                }
                return names.empty() ? "none" : join(names, "\n");
            }
            default:
                return optimizer(r);
        }
    });
    for (std::size_t i = 0; i < n_dev; ++i) w.dev.push_back(make_query(fmt::format("d{:02}", i), fmt::format("q{}", i), {"t1"}, Split::dev));
    for (std::size_t i = 0; i < n_train; ++i)
        w.train.push_back(make_query(fmt::format("r{:02}", i), fmt::format("q{}", i), {"t1", "t2"}));
    return w;
}

std::string echo_optimizer(const llm::LlmRequest& r) {
    if (r.template_id == llm::TemplateId::entity_filter) return r.variables.at("query");
    if (r.template_id == llm::TemplateId::functionality_assessment) return "names no matching level";
    return r.variables.at("description");
}

}  // namespace

TEST_SUITE("eg_optimizer") {
    TEST_CASE("missed gold tool counts a failure and records the query") {
        auto c = abc();
        StubRetriever r(c, {{"q1", {"a"}}});
        auto s = phase1_evaluate({make_query("q1", "find alpha and beta", {"a", "b"})}, r, init_state(c));
        CHECK(s.tools["a"].trials == 1);
        CHECK(s.tools["a"].failure == 0);
        CHECK(s.tools["b"].trials == 1);
        CHECK(s.tools["b"].failure == 1);
        CHECK(s.tools["b"].failure_queries == std::vector<std::string>{"find alpha and beta"});
        CHECK(s.tools["c"].trials == 0);
    }

    TEST_CASE("full coverage gives zero failures and trials count queries") {
        auto c = abc();
        StubRetriever r(c, {{"q1", {"a", "b"}}, {"q2", {"a", "c"}}, {"q3", {"a"}}});
        auto s = phase1_evaluate({make_query("q1", "x", {"a", "b"}), make_query("q2", "y", {"a"}), make_query("q3", "z", {"a"})},
                                 r, init_state(c));
        CHECK(s.tools["a"].trials == 3);
        for (const auto& [_, st] : s.tools) {
            CHECK(st.failure == 0);
            CHECK(st.failure_queries.empty());
        }
    }

    TEST_CASE("a failing query is skipped without touching counters") {
        auto c = abc();
        StubRetriever r(c, {{"q1", {"a"}}}, {"q2"});
        auto s = phase1_evaluate({make_query("q1", "x", {"a"}), make_query("q2", "y", {"a", "b"})}, r, init_state(c));
        CHECK(s.tools["a"].trials == 1);
        CHECK(s.tools["b"].trials == 0);
    }

    TEST_CASE("selection by failure ratio") {
        EgState s;
        s.tools["p"] = {5, 3, {"x"}, 0};
        s.tools["q"] = {5, 1, {"x"}, 0};
        s.tools["r"] = {0, 0, {}, 0};
        s.tools["o"] = {2, 1, {"x"}, 0};  // exactly at the threshold
        s.tools["m"] = {1, 1, {"x"}, 0};
        CHECK(3.0 / 5.0 > 0.5);
        CHECK_FALSE(1.0 / 5.0 > 0.5);
        CHECK(select_underinformative(s, {}) == std::vector<std::string>{"m", "p"});
        EgConfig strict;
        strict.failure_threshold = 1.0;
        CHECK(select_underinformative(s, strict).empty());
        EgConfig bad;
        bad.failure_threshold = 0.0;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    }

    TEST_CASE("entity stripping") {
        llm::FunctionProvider filter([](const llm::LlmRequest& r) -> std::string {
            const auto& q = r.variables.at("query");
            if (q == "track ID '987654'") return "a specific track ID";
            if (q == "blank") return "  ";
            return "generic " + q;
        });
        CHECK(strip_entities({"track ID '987654'"}, filter).queries == std::vector<std::string>{"a specific track ID"});

        std::vector<std::string> twelve;
        for (int i = 0; i < 12; ++i) twelve.push_back("q" + std::to_string(i));
        auto capped = strip_entities(twelve, filter, 8);
        REQUIRE(capped.queries.size() == 8);
        CHECK(capped.queries.front() == "generic q11");  // most recent first
        CHECK(capped.queries.back() == "generic q4");

        auto kept = strip_entities({"blank", "other"}, filter);
        CHECK(kept.queries == std::vector<std::string>{"generic other", "blank"});
        CHECK(kept.warnings.size() == 1);
        CHECK_THROWS_AS(strip_entities({}, filter), ValidationError);
    }

    TEST_CASE("reasons parsing") {
        auto tool = make_tool("m", "music charts", "Charts");
        llm::FunctionProvider three([](const llm::LlmRequest&) { return std::string("first\nsecond\nthird"); });
        CHECK(generate_reasons(tool, {"u"}, three) == std::vector<std::string>{"first", "second", "third"});
        llm::FunctionProvider spaced([](const llm::LlmRequest&) { return std::string("  one \n   \n\ttwo\n"); });
        CHECK(generate_reasons(tool, {"u"}, spaced) == std::vector<std::string>{"one", "two"});
        llm::FunctionProvider empty([](const llm::LlmRequest&) { return std::string(); });
        CHECK_THROWS_WITH(generate_reasons(tool, {"u"}, empty), doctest::Contains("no reasons"));
    }

    TEST_CASE("rewrite returns the scripted text verbatim") {
        const std::string before = "Magically transform your videos.  Magisto turns your everyday videos into exciting, memorable movies you'll want to watch again and again.";
        const std::string enriched = "The Magisto API is a powerful tool that can transform user videos into exciting and memorable movies.";
        auto tool = make_tool("magisto", before, "Magisto");
        llm::FunctionProvider p([&](const llm::LlmRequest& r) {
            return r.variables.at("tool_name") == "Magisto" ? enriched : std::string("?");
        });
        CHECK(rewrite_description(tool, before, {"make a movie"}, {"it edits videos"}, p) == enriched);

        llm::FunctionProvider same([&](const llm::LlmRequest& r) { return r.variables.at("description"); });
        CHECK(rewrite_description(tool, before, {"u"}, {"r"}, same) == before);
        llm::FunctionProvider empty([](const llm::LlmRequest&) { return std::string("\n"); });
        CHECK_THROWS_AS(rewrite_description(tool, before, {"u"}, {"r"}, empty), ProviderError);
        CHECK_THROWS_AS(rewrite_description(tool, before, {}, {"r"}, same), ValidationError);
    }

    TEST_CASE("per-tool dev recall") {
        auto w = level_world(20, 0, 8, 0, echo_optimizer);
        auto pipe = pipeline::make_default_pipeline(w.catalog, std::make_shared<dense::HashEmbedder>(32), w.llm);
        CHECK(tool_dev_recall(w.dev, pipe, "t1") == doctest::Approx(0.40));
        CHECK(tool_dev_recall(w.dev, pipe, "t2") == 0.0);  // no dev query has it
        auto all = dev_recall_by_tool(w.dev, pipe);
        CHECK(all.size() == 4);
        CHECK(all["t1"] == doctest::Approx(0.40));
    }

    TEST_CASE("gate") {
        auto w = level_world(20, 0, 8, 0, echo_optimizer);
        auto pipe = pipeline::make_default_pipeline(w.catalog, std::make_shared<dense::HashEmbedder>(32), w.llm);
        auto state = init_state(w.catalog);
        state.tools["t1"].best_recall = 0.40;
        const auto before = serialize_catalog(pipe.catalog());
        const auto index_before = dense::serialize_index(pipe.index());

        SUBCASE("higher recall is accepted") {
            auto g = gate(w.dev, pipe, state, "t1", "sky level 11", 1);
            CHECK(g.dev_recall_new == doctest::Approx(0.55));
            CHECK(g.accepted);
            CHECK(pipe.catalog().at("t1").description == "sky level 11");
            CHECK(pipe.catalog().at("t1").history.size() == 1);
            CHECK(state.tools["t1"].best_recall == doctest::Approx(0.55));
            CHECK(pipe.index().fresh_for(pipe.catalog()));
        }
        SUBCASE("equal recall is rejected") {
            auto g = gate(w.dev, pipe, state, "t1", "sky level 8 again", 1);
            CHECK(g.dev_recall_new == doctest::Approx(0.40));
            CHECK_FALSE(g.accepted);
            CHECK(serialize_catalog(pipe.catalog()) == before);
        }
        SUBCASE("lower recall is rejected and everything is restored") {
            auto g = gate(w.dev, pipe, state, "t1", "sky level 6", 1);
            CHECK(g.dev_recall_new == doctest::Approx(0.30));
            CHECK_FALSE(g.accepted);
            CHECK(serialize_catalog(pipe.catalog()) == before);
            CHECK(dense::serialize_index(pipe.index()) == index_before);
            CHECK(state.tools["t1"].best_recall == doctest::Approx(0.40));
        }
        SUBCASE("full rebuild gives the same decision") {
            EgConfig cfg;
            cfg.full_rebuild = true;
            CHECK(gate(w.dev, pipe, state, "t1", "sky level 11", 1, cfg).accepted);
        }
        CHECK_THROWS_AS(gate(w.dev, pipe, state, "t1", "", 1), ValidationError);
    }

    TEST_CASE("a round that selects nothing ends the run") {
        auto w = level_world(20, 10, 0, 20, [](const llm::LlmRequest& r) -> std::string {
            if (r.template_id == llm::TemplateId::entity_filter) return r.variables.at("query");
            if (r.template_id == llm::TemplateId::functionality_assessment) return "the level is too low";
            return "sky level 20";
        });
        auto pipe = pipeline::make_default_pipeline(w.catalog, std::make_shared<dense::HashEmbedder>(32), w.llm);
        auto out = run_eg(w.train, w.dev, pipe, *w.llm);
        REQUIRE(out.report.rounds.size() == 2);
        CHECK(out.report.rounds[0].selected == std::vector<std::string>{"t1"});
        CHECK(out.report.rounds[0].accepted == 1);
        CHECK(out.report.rounds[1].selected.empty());
        REQUIRE(out.report.proposals.size() == 1);
        const auto& p = out.report.proposals[0];
        CHECK(p.accepted);
        CHECK(p.dev_recall_old == 0.0);
        CHECK(p.dev_recall_new == 1.0);
        CHECK(p.filtered_queries.size() == 8);
        CHECK(out.catalog.at("t1").description == "sky level 20");
        CHECK(out.catalog.at("t2").description == "sea level 20");
    }

    TEST_CASE("rewrites equal to the old text change nothing in five rounds") {
        auto w = level_world(20, 10, 0, 20, echo_optimizer);
        auto pipe = pipeline::make_default_pipeline(w.catalog, std::make_shared<dense::HashEmbedder>(32), w.llm);
        auto out = run_eg(w.train, w.dev, pipe, *w.llm);
        CHECK(out.report.rounds.size() == 5);
        CHECK(out.report.proposals.size() == 5);
        for (const auto& p : out.report.proposals) CHECK_FALSE(p.accepted);
        CHECK(serialize_catalog(out.catalog) == serialize_catalog(w.catalog));
    }

    TEST_CASE("one tool's failure does not abort the round") {
        auto w = level_world(20, 10, 0, 0, [](const llm::LlmRequest& r) -> std::string {
            if (r.template_id == llm::TemplateId::entity_filter) return r.variables.at("query");
            if (r.template_id == llm::TemplateId::functionality_assessment)
                return r.variables.at("tool_name") == "Sea" ? "" : "too low";
            return "sky level 20";
        });
        auto pipe = pipeline::make_default_pipeline(w.catalog, std::make_shared<dense::HashEmbedder>(32), w.llm);
        EgConfig cfg;
        cfg.max_rounds = 1;
        auto out = run_eg(w.train, w.dev, pipe, *w.llm, cfg);
        REQUIRE(out.report.proposals.size() == 2);
        CHECK(out.report.proposals[0].tool_id == "t1");
        CHECK(out.report.proposals[0].accepted);
        CHECK(out.report.proposals[1].tool_id == "t2");
        CHECK(out.report.proposals[1].error.find("no reasons") != std::string::npos);
        auto lines = split_lines(serialize_proposals(out.report));
        CHECK(nlohmann::json::parse(lines[1]).contains("error"));
    }

    TEST_CASE("keyword-poor tools gain dev recall from grounded rewrites") {
        auto world = fixtures::build_world(fixtures::kDefaultSeed);
        std::shared_ptr<llm::LlmProvider> policy = fixtures::make_policy(world);
        auto out = fixtures::run_variant_scenario(world.variant_catalog, world.queries, policy, fixtures::SuiteConfig{});
        CHECK(out.dev_after.mean_recall > out.dev_before.mean_recall);
        REQUIRE_FALSE(out.eg.report.rounds.empty());
        CHECK(out.eg.report.rounds[0].accepted > 0);
        for (const auto& [id, tool] : out.eg.catalog.tools()) {
            if (tool.description == world.variant_catalog.at(id).description) continue;
            CHECK(std::any_of(out.eg.report.proposals.begin(), out.eg.report.proposals.end(),
                              [&](const DescriptionProposal& p) { return p.tool_id == id && p.accepted; }));
        }
    }
}
