#include "toolret/fixtures.hpp"

#include <algorithm>
#include <filesystem>
#include <spdlog/spdlog.h>

#include "toolret/planner.hpp"
#include "toolret/text_analysis.hpp"
#include "toolret/util.hpp"

namespace toolret::fixtures {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Category {
    const char* theme;
    const char* entity_kind;
    std::vector<const char*> entity_names;
    // nine specialties, three keywords each; no keyword is shared across tools
    std::vector<std::array<const char*, 3>> specialties;
};

const std::vector<Category>& categories() {
    static const std::vector<Category> cats = {
        {"music", "band", {"Velvet Echo", "Northbound", "Paper Lanterns", "Static Bloom", "Tin Orchard"},
         {{"lyrics", "verses", "chorus"}, {"playlist", "shuffle", "queue"}, {"concert", "tickets", "venue"},
          {"album", "tracklist", "release"}, {"artist", "biography", "discography"},
          {"radio", "station", "broadcast"}, {"chords", "guitar", "tabs"}, {"podcast", "episodes", "transcript"},
          {"charts", "billboard", "ranking"}}},
        {"weather", "city", {"Oslo", "Lima", "Perth", "Denver", "Nairobi"},
         {{"forecast", "hourly", "temperature"}, {"rainfall", "precipitation", "radar"},
          {"hurricane", "storm", "warnings"}, {"pollen", "allergy", "index"}, {"sunrise", "sunset", "daylight"},
          {"humidity", "dewpoint", "moisture"}, {"snowfall", "avalanche", "ski"},
          {"ultraviolet", "sunburn", "exposure"}, {"tides", "surf", "swell"}}},
        {"finance", "company", {"Globex", "Initech", "Umbrella", "Hooli", "Vandelay"},
         {{"stock", "quotes", "ticker"}, {"currency", "exchange", "rates"}, {"mortgage", "loan", "amortization"},
          {"crypto", "bitcoin", "wallet"}, {"invoice", "billing", "receipts"}, {"dividends", "yield", "payout"},
          {"inflation", "consumer", "prices"}, {"credit", "score", "report"}, {"tax", "deductions", "refund"}}},
        {"travel", "destination", {"Lisbon", "Kyoto", "Cusco", "Reykjavik", "Marrakesh"},
         {{"flight", "booking", "airline"}, {"hotel", "rooms", "reservation"}, {"visa", "passport", "requirements"},
          {"train", "timetable", "railway"}, {"car", "rental", "pickup"}, {"luggage", "baggage", "allowance"},
          {"museum", "attractions", "sightseeing"}, {"cruise", "ship", "itinerary"},
          {"airport", "lounge", "terminal"}}},
        {"food", "chef", {"Marco", "Aiko", "Priya", "Tomas", "Lucia"},
         {{"recipe", "ingredients", "cooking"}, {"restaurant", "reviews", "dining"},
          {"calories", "nutrition", "macros"}, {"wine", "pairing", "vineyard"}, {"grocery", "delivery", "cart"},
          {"vegan", "substitutes", "plantbased"}, {"baking", "dough", "oven"}, {"coffee", "roast", "espresso"},
          {"allergens", "gluten", "labeling"}}},
        {"sports", "club", {"Rovers", "Harriers", "Comets", "Mariners", "Falcons"},
         {{"football", "scores", "fixtures"}, {"basketball", "standings", "playoffs"},
          {"tennis", "rankings", "tournament"}, {"marathon", "training", "pace"}, {"golf", "handicap", "course"},
          {"cricket", "innings", "wickets"}, {"olympics", "medals", "athletes"}, {"fantasy", "league", "draft"},
          {"cycling", "route", "elevation"}}},
    };
    return cats;
}

// three per keyword-poor description, so no two poor descriptions share a bigram
const std::vector<const char*> kGenericWords = {
    "useful",   "handy",   "simple",   "reliable", "modern",     "flexible", "fast",    "robust",   "smart",
    "clean",    "friendly", "solid",   "quick",    "easy",       "general",  "versatile", "basic",  "standard",
    "popular",  "trusted", "secure",   "stable",   "compact",    "neat",     "unified", "open",     "scalable",
    "lightweight", "practical", "dependable", "generic", "common", "plain"};

const std::vector<const char*> kOpeners = {"please help me find details about {k} for {e}",
                                           "help me find the details about {k} for {e}",
                                           "i need help to find details about {k} for {e}"};

std::string capitalized(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string two_digits(std::size_t n) { return (n < 10 ? "0" : "") + std::to_string(n); }

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
        s.replace(pos, from.size(), to);
    return s;
}

std::string rich_description(const Category& c, const std::array<const char*, 3>& kw) {
    return capitalized(c.theme) + " service offering " + kw[0] + " " + kw[1] + " and " + kw[2] +
           " data for developers";
}

std::string poor_description(const Category& c, std::size_t slot) {
    const auto n = kGenericWords.size();
    return capitalized(c.theme) + " service offering " + kGenericWords[(3 * slot) % n] + " " +
           kGenericWords[(3 * slot + 1) % n] + " and " + kGenericWords[(3 * slot + 2) % n] + " data for developers";
}

struct ToolInfo {
    std::size_t category = 0;
    std::array<const char*, 3> keywords{};
    bool hub = false;
};

}  // namespace

World build_world(std::uint64_t seed) {
    World w;
    w.seed = seed;
    const auto& cats = categories();

    std::vector<Tool> tools;
    std::map<std::string, ToolInfo> info;
    std::vector<std::vector<std::string>> normal_by_category(cats.size());
    for (std::size_t c = 0; c < cats.size(); ++c) {
        const auto& cat = cats[c];
        Tool hub;
        hub.id = std::string(cat.theme) + "-hub";
        hub.name = capitalized(cat.theme) + " Hub";
        hub.category = cat.theme;
        hub.description = capitalized(cat.theme) + " hub to help find get check details info and everything about " +
                          cat.theme + " quickly";
        info[hub.id] = {c, {}, true};
        tools.push_back(hub);
        for (std::size_t s = 0; s < cat.specialties.size(); ++s) {
            const auto& kw = cat.specialties[s];
            Tool t;
            t.id = std::string(cat.theme) + "-" + kw[0];
            t.name = capitalized(cat.theme) + " API " + two_digits(s + 1);
            t.category = cat.theme;
            t.description = rich_description(cat, kw);
            info[t.id] = {c, kw, false};
            normal_by_category[c].push_back(t.id);
            tools.push_back(t);
        }
    }
    w.catalog = ToolCatalog::from_tools(tools);

    auto aspect_for = [&](const std::string& id) {
        const auto& kw = info.at(id).keywords;
        const std::string words = std::string(kw[0]) + " " + kw[1] + " " + kw[2];
        return Aspect{id, "find " + words, "look up " + words + " records"};
    };

    Rng rng(derive_seed(seed, 0xf1c7));
    for (std::size_t i = 0; i < kQueryCount; ++i) {
        const std::size_t size = 2 + (i + 1) % 3;  // 3, 4, 2, ...; Q7 has three tools
        std::vector<std::size_t> order(cats.size());
        for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
        rng.shuffle(order);

        QueryRecord q;
        q.id = "Q" + std::to_string(i + 1);
        std::vector<std::string> clauses, generic;
        std::vector<Aspect> aspects;
        for (std::size_t a = 0; a < size; ++a) {
            const auto c = order[a];
            const auto& cat = cats[c];
            const auto& id = normal_by_category[c][rng.uniform_index(normal_by_category[c].size())];
            q.gold_tool_ids.insert(id);
            aspects.push_back(aspect_for(id));
            const std::string opener = kOpeners[rng.uniform_index(kOpeners.size())];
            const std::string name = cat.entity_names[rng.uniform_index(cat.entity_names.size())];
            const std::string with_k = replace_all(opener, "{k}", info.at(id).keywords[0]);
            clauses.push_back(replace_all(with_k, "{e}", "the " + std::string(cat.entity_kind) + " " + name));
            generic.push_back(replace_all(with_k, "{e}", "a specific " + std::string(cat.entity_kind)));
        }
        q.text = capitalized(join(clauses, ", and also ")) + ".";
        w.aspects[q.text] = aspects;
        w.generic_queries[q.text] = capitalized(join(generic, ", and also ")) + ".";
        w.queries.push_back(std::move(q));
    }
    assign_splits(w.queries, seed);

    // Poor tools: prefer tools needed by both train and dev queries, so that fixing
    // them is visible on dev; fill up with train-only tools, which keep failing.
    std::set<std::string> train_tools, dev_tools;
    for (const auto& q : w.queries) {
        if (q.split == Split::train) train_tools.insert(q.gold_tool_ids.begin(), q.gold_tool_ids.end());
        if (q.split == Split::dev) dev_tools.insert(q.gold_tool_ids.begin(), q.gold_tool_ids.end());
    }
    std::vector<std::string> both, train_only;
    for (const auto& id : train_tools) (dev_tools.count(id) ? both : train_only).push_back(id);
    // one healthy dev tool is kept aside for the rejected-rewrite scenario
    std::string healthy;
    for (const auto& q : w.queries) {
        if (q.split != Split::dev) continue;
        for (const auto& id : q.gold_tool_ids)
            if (healthy.empty() && !train_tools.count(id)) healthy = id;
    }
    if (healthy.empty()) {
        healthy = both.back();
        both.pop_back();
    }
    Rng pick(derive_seed(seed, 0x9007));
    pick.shuffle(train_only);
    for (const auto& id : both)
        if (w.poor_tool_ids.size() < kPoorToolCount) w.poor_tool_ids.push_back(id);
    for (const auto& id : train_only)
        if (w.poor_tool_ids.size() < kPoorToolCount) w.poor_tool_ids.push_back(id);
    std::sort(w.poor_tool_ids.begin(), w.poor_tool_ids.end());

    std::vector<Tool> variant;
    std::size_t slot = 0;
    for (const auto& [id, tool] : w.catalog.tools()) {
        Tool t = tool;
        t.base_description.clear();
        t.history.clear();
        if (std::binary_search(w.poor_tool_ids.begin(), w.poor_tool_ids.end(), id)) {
            const auto& ti = info.at(id);
            const auto& cat = cats[ti.category];
            t.description = poor_description(cat, slot++);
            w.enriched[t.name] = tool.description;  // the informative text the poor one replaced
        }
        variant.push_back(std::move(t));
    }
    w.variant_catalog = ToolCatalog::from_tools(variant);

    w.damaged_tool_id = healthy;
    w.damaging_text = poor_description(cats[info.at(healthy).category], kPoorToolCount);
    return w;
}

namespace {

std::vector<std::string> numbered_lines(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& line : split_lines(text)) {
        auto t = trim(line);
        auto dot = t.find(". ");
        if (dot != std::string::npos && dot > 0 &&
            std::all_of(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(dot), ::isdigit))
            t = t.substr(dot + 2);
        if (!t.empty() && t != "(none)") out.push_back(t);
    }
    return out;
}

class Policy final : public llm::LlmProvider {
public:
    explicit Policy(const World& world) : world_(world) {}

    std::string complete(const llm::LlmRequest& r) override {
        const auto& v = r.variables;
        switch (r.template_id) {
            case llm::TemplateId::planner: return planner(v.at("query"), v.at("history"), v.at("task"));
            case llm::TemplateId::predictor: return predictor(v.at("sub_query"), v.at("tools"));
            case llm::TemplateId::entity_filter: {
                auto it = world_.generic_queries.find(v.at("query"));
                return it == world_.generic_queries.end() ? v.at("query") : it->second;
            }
            case llm::TemplateId::functionality_assessment: {
                std::vector<std::string> reasons;
                for (const auto& q : split_lines(v.at("queries")))
                    if (!trim(q).empty()) reasons.push_back("The request needs data this tool should name: " + trim(q));
                return join(reasons, "\n");
            }
            case llm::TemplateId::edit_ground: {
                auto it = world_.enriched.find(v.at("tool_name"));
                return it == world_.enriched.end() ? v.at("description") : it->second;
            }
        }
        throw ValidationError("policy: unknown template");
    }

private:
    std::string planner(const std::string& query, const std::string& history, const std::string& task) {
        const auto it = world_.aspects.find(query);
        if (it == world_.aspects.end()) throw ValidationError("policy: unknown query '" + query + "'");
        const auto asked = numbered_lines(history);
        auto covered = [&](const Aspect& a) { return std::find(asked.begin(), asked.end(), a.sub_query) != asked.end(); };
        if (task == plan::judge_task()) {
            const bool all = std::all_of(it->second.begin(), it->second.end(), covered);
            return all ? "Yes, every part of the request has a sub-query." : "No, some parts are still open.";
        }
        std::vector<std::string> lines;
        for (const auto& a : it->second)
            if (!covered(a)) lines.push_back(a.sub_query);
        // a restatement of the latest need, which furthest planning should skip
        if (!asked.empty() && lines.size() < 4) {
            for (const auto& a : it->second)
                if (a.sub_query == asked.back()) lines.push_back(a.paraphrase);
        }
        if (lines.empty()) lines.push_back(it->second.front().paraphrase);
        return join(lines, "\n");
    }

    static std::string predictor(const std::string& sub_query, const std::string& tool_list) {
        static const std::set<std::string> filler = {"find", "look", "up", "records"};
        std::set<std::string> wanted;
        for (const auto& t : text::tokenize(sub_query))
            if (!filler.count(t)) wanted.insert(t);
        std::vector<std::string> names;
        for (const auto& line : numbered_lines(tool_list)) {
            const auto colon = line.find(": ");
            if (colon == std::string::npos) continue;
            std::size_t hits = 0;
            for (const auto& t : text::tokenize(line.substr(colon + 2))) hits += wanted.count(t);
            if (hits >= 2) names.push_back(line.substr(0, colon));
        }
        return names.empty() ? "none" : join(names, "\n");
    }

    const World& world_;
};

std::vector<QueryRecord> of_split(const std::vector<QueryRecord>& queries, Split s) {
    std::vector<QueryRecord> out;
    for (const auto& q : queries)
        if (q.split == s) out.push_back(q);
    return out;
}

double macro_recall(const std::vector<pipeline::PnRResult>& results, const std::vector<QueryRecord>& queries) {
    double sum = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i)
        sum += results[i].failed() ? 0.0 : eval::recall(results[i].tools, queries[i].gold_tool_ids);
    return results.empty() ? 0.0 : sum / static_cast<double>(results.size());
}

json ids_json(const std::set<std::string>& ids) { return json(std::vector<std::string>(ids.begin(), ids.end())); }

json report_json(const eval::MetricsReport& r) {
    json per = json::object();
    for (const auto& q : r.queries) per[q.query_id] = q.recall;
    return {{"mean_recall", r.mean_recall}, {"per_query_recall", per}, {"failed", r.failed.size()}};
}

}  // namespace

std::unique_ptr<llm::LlmProvider> make_policy(const World& world) { return std::make_unique<Policy>(world); }

pipeline::PipelineConfig SuiteConfig::pipeline_config() const {
    pipeline::PipelineConfig c;
    c.pool_size = pool_size;
    c.plan.max_steps = max_steps;
    c.plan.batch_size = batch_size;
    c.plan.seed = plan_seed;
    return c;
}

std::string SuiteConfig::to_conf() const {
    return fmt::format(
        "# fixture suite settings\n"
        "catalog=tools.jsonl\nqueries=queries.jsonl\ntranscripts=transcripts\n"
        "split-seed={}\nplan-seed={}\npool-size={}\nmax-steps={}\nbatch-size={}\n"
        "embedding-dim={}\nsample-size={}\neval-seed={}\nmax-rounds={}\n",
        split_seed, plan_seed, pool_size, max_steps, batch_size, embedding_dim, sample_size, eval_seed, max_rounds);
}

std::shared_ptr<const dense::EmbeddingProvider> make_embedder(const SuiteConfig& config) {
    return std::make_shared<dense::HashEmbedder>(config.embedding_dim);
}

pipeline::PnrPipeline make_pipeline(const ToolCatalog& catalog, std::shared_ptr<llm::LlmProvider> llm,
                                    const SuiteConfig& config) {
    return pipeline::make_default_pipeline(catalog, make_embedder(config), std::move(llm), config.pipeline_config());
}

BaseOutcome run_base_scenario(const ToolCatalog& catalog, const std::vector<QueryRecord>& queries,
                              const World& world, std::shared_ptr<llm::LlmProvider> llm,
                              const SuiteConfig& config) {
    BaseOutcome out;
    auto pipe = make_pipeline(catalog, llm, config);
    pipeline::DenseBaseline one_shot(catalog, make_embedder(config), 5);
    for (const auto& q : queries) {
        out.pnr.push_back(pipeline::run_pnr(q, pipe));
        out.one_shot.push_back(one_shot.retrieve(q));
    }
    out.pnr_recall = macro_recall(out.pnr, queries);
    out.one_shot_recall = macro_recall(out.one_shot, queries);

    const auto train = of_split(queries, Split::train);
    const auto dev = of_split(queries, Split::dev);
    eg::EgConfig eg_config;
    eg_config.max_rounds = config.max_rounds;
    auto eg_pipe = make_pipeline(catalog, llm, config);
    out.eg = eg::run_eg(train, dev, eg_pipe, *llm, eg_config);

    auto gate_pipe = make_pipeline(catalog, llm, config);
    eg::EgState state = eg::init_state(catalog);
    for (const auto& [id, r] : eg::dev_recall_by_tool(dev, gate_pipe)) state.tools[id].best_recall = r;
    out.damaged_tool_recall = state.tools[world.damaged_tool_id].best_recall;
    out.catalog_before = serialize_catalog(gate_pipe.catalog());
    out.index_before = dense::serialize_index(gate_pipe.index());
    out.damaging_gate = eg::gate(dev, gate_pipe, state, world.damaged_tool_id, world.damaging_text, 1, eg_config);
    out.catalog_after = serialize_catalog(gate_pipe.catalog());
    out.index_after = dense::serialize_index(gate_pipe.index());
    return out;
}

VariantOutcome run_variant_scenario(const ToolCatalog& variant, const std::vector<QueryRecord>& queries,
                                    std::shared_ptr<llm::LlmProvider> llm, const SuiteConfig& config) {
    VariantOutcome out;
    const auto train = of_split(queries, Split::train);
    const auto dev = of_split(queries, Split::dev);
    {
        auto pipe = make_pipeline(variant, llm, config);
        out.dev_before = eval::evaluate_system(dev, pipe, config.sample_size, config.eval_seed);
    }
    {
        eg::EgConfig eg_config;
        eg_config.max_rounds = config.max_rounds;
        auto pipe = make_pipeline(variant, llm, config);
        out.eg = eg::run_eg(train, dev, pipe, *llm, eg_config);
        out.cache = cache_from_catalog(out.eg.catalog);
    }
    {
        auto pipe = make_pipeline(apply_cache(variant, out.cache), llm, config);
        out.dev_after = eval::evaluate_system(dev, pipe, config.sample_size, config.eval_seed);
    }
    {
        auto pipe = make_pipeline(variant, llm, config);
        out.dev_reverted = eval::evaluate_system(dev, pipe, config.sample_size, config.eval_seed);
    }
    return out;
}

llm::Transcript load_transcript_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw NotFoundError("transcript directory '" + dir + "' not found");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    llm::Transcript all;
    for (const auto& f : files) all.merge(llm::load_transcript(f.string()));
    return all;
}

void save_transcript_dir(const llm::Transcript& transcript, const std::string& dir) {
    fs::create_directories(dir);
    std::map<llm::TemplateId, llm::Transcript> by_template;
    for (const auto& [key, e] : transcript.entries()) by_template[e.template_id].add(e.template_id, key, e.response);
    for (const auto& [id, t] : by_template) llm::save_transcript(t, (fs::path(dir) / (llm::to_string(id) + ".jsonl")).string());
}

std::string suite_checksum(const std::string& root) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), root).generic_string();
        if (rel != "CHECKSUM") files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::string blob;
    for (const auto& rel : files) {
        blob += rel;
        blob += '\0';
        blob += read_file((fs::path(root) / rel).string());
        blob += '\0';
    }
    return hex64(fnv1a64(blob));
}

GeneratedSuite generate_fixture(const std::string& root, std::uint64_t seed) {
    const World world = build_world(seed);
    SuiteConfig config;
    config.split_seed = seed;
    config.plan_seed = seed;
    config.eval_seed = seed;

    auto check = [](bool ok, const std::string& what) {
        if (!ok) throw Error("fixture generation: " + what);
    };

    auto policy = make_policy(world);
    auto base_rec = std::make_shared<llm::RecordingProvider>(*policy);
    const auto base = run_base_scenario(world.catalog, world.queries, world, base_rec, config);
    for (std::size_t i = 0; i < world.queries.size(); ++i) {
        const auto& q = world.queries[i];
        check(base.pnr[i].status == pipeline::RunStatus::completed, q.id + " plan did not complete");
        check(base.pnr[i].tools == q.gold_tool_ids, q.id + " plan-and-retrieve does not recover the gold set");
        check(eval::recall(base.one_shot[i].tools, q.gold_tool_ids) < 1.0, q.id + " one-shot already finds every tool");
    }
    check(base.eg.catalog == world.catalog, "E&G changed the well-described catalog");
    check(!base.damaging_gate.accepted && base.catalog_before == base.catalog_after,
          "damaging rewrite was not rejected");
    check(base.damaging_gate.dev_recall_new < base.damaged_tool_recall, "damaging rewrite did not lower recall");

    auto variant_rec = std::make_shared<llm::RecordingProvider>(*policy);
    const auto variant = run_variant_scenario(world.variant_catalog, world.queries, variant_rec, config);
    check(variant.eg.report.rounds.size() == static_cast<std::size_t>(config.max_rounds),
          "E&G variant did not run every round");
    check(!variant.cache.empty(), "E&G variant accepted nothing");
    check(variant.dev_after.mean_recall > variant.dev_before.mean_recall, "E&G variant did not improve dev recall");
    check(variant.dev_reverted.mean_recall == variant.dev_before.mean_recall, "reverting did not restore dev recall");

    json expected_base;
    expected_base["pnr_recall"] = base.pnr_recall;
    expected_base["one_shot_recall"] = base.one_shot_recall;
    for (std::size_t i = 0; i < world.queries.size(); ++i) {
        const auto& id = world.queries[i].id;
        expected_base["queries"][id] = {{"pnr", ids_json(base.pnr[i].tools)},
                                        {"one_shot", ids_json(base.one_shot[i].tools)},
                                        {"steps", base.pnr[i].steps.size()}};
    }
    expected_base["damaged_tool"] = world.damaged_tool_id;
    expected_base["damaging_text"] = world.damaging_text;

    json expected_variant;
    expected_variant["poor_tools"] = world.poor_tool_ids;
    expected_variant["dev_before"] = report_json(variant.dev_before);
    expected_variant["dev_after"] = report_json(variant.dev_after);
    std::vector<std::string> accepted;
    for (const auto& [id, _] : variant.cache) accepted.push_back(id);
    expected_variant["accepted"] = accepted;
    expected_variant["rounds"] = variant.eg.report.rounds.size();

    fs::create_directories(root);
    for (const auto& sub : {"base", "eg_variant"}) fs::remove_all(fs::path(root) / sub);
    auto write_suite = [&](const std::string& name, const ToolCatalog& catalog, const llm::Transcript& transcript,
                           const json& expected) {
        const fs::path dir = fs::path(root) / name;
        fs::create_directories(dir);
        write_file((dir / "tools.jsonl").string(), serialize_catalog(catalog));
        write_file((dir / "queries.jsonl").string(), serialize_queries(world.queries));
        write_file((dir / "toolret.conf").string(), config.to_conf());
        write_file((dir / "expected.json").string(), expected.dump(2) + "\n");
        save_transcript_dir(transcript, (dir / "transcripts").string());
    };
    write_suite("base", world.catalog, base_rec->transcript(), expected_base);
    write_suite("eg_variant", world.variant_catalog, variant_rec->transcript(), expected_variant);

    GeneratedSuite out;
    out.root = root;
    out.checksum = suite_checksum(root);
    write_file((fs::path(root) / "CHECKSUM").string(), out.checksum + "\n");
    out.expected = {{"base", expected_base}, {"eg_variant", expected_variant}};
    spdlog::info("fixture suite written to {} (checksum {})", root, out.checksum);
    return out;
}

}  // namespace toolret::fixtures
