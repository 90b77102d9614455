// toolret: operator CLI over a shared flat key=value config; flags override the file.
#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "toolret/catalog.hpp"
#include "toolret/dense_retriever.hpp"
#include "toolret/eg_optimizer.hpp"
#include "toolret/evaluator.hpp"
#include "toolret/fixtures.hpp"
#include "toolret/llm_gateway.hpp"
#include "toolret/retrieval_pipeline.hpp"
#include "toolret/trainer.hpp"
#include "toolret/util.hpp"

namespace fs = std::filesystem;
using namespace toolret;
using nlohmann::json;

namespace {

struct Options {
    std::string config_path;
    std::string data_dir;
    // inputs
    std::string catalog, queries, cache, transcripts, head, index;
    // providers
    std::string llm = "scripted";
    bool strict_transcripts = true;
    std::string llm_url, llm_model, llm_token_env = "TOOLRET_LLM_TOKEN";
    std::string embedder = "test";
    std::string embed_url, embed_model, embed_token_env = "TOOLRET_EMBED_TOKEN";
    std::size_t embedding_dim = 512;
    // knobs
    std::size_t pool_size = 20;
    std::size_t max_steps = 6;
    std::size_t batch_size = 4;
    double failure_threshold = 0.5;
    int max_rounds = 5;
    std::size_t query_cap = 8;
    std::uint64_t split_seed = 0;
    std::uint64_t plan_seed = 0;
    std::uint64_t eval_seed = 0;
    std::size_t sample_size = 500;
    std::string log_level = "warn";
};

// Exit codes by error family; the message line is "error: <kind>: <text>".
struct Failure {
    int code;
    const char* kind;
};

Failure classify(const std::exception& e) {
    if (dynamic_cast<const pipeline::StaleIndexError*>(&e)) return {5, "stale_index"};
    if (dynamic_cast<const llm::TranscriptMissError*>(&e)) return {6, "transcript_miss"};
    if (dynamic_cast<const ProviderError*>(&e)) return {4, "provider"};
    if (dynamic_cast<const NotFoundError*>(&e)) return {3, "not_found"};
    if (dynamic_cast<const ValidationError*>(&e)) return {2, "invalid"};
    return {1, "failed"};
}

// Surfaces the original exception so the exit code names its family.
[[noreturn]] void rethrow_failure(const pipeline::PnRResult& r, const std::string& what) {
    if (r.cause) std::rethrow_exception(r.cause);
    throw Error(what + " failed: " + r.error);
}

std::string one_line(std::string s) {
    for (auto& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

bool on_command_line(const std::vector<std::string>& args, const std::string& flag) {
    for (const auto& a : args)
        if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
}

class Context {
public:
    Context(Options opts, const std::vector<std::string>& args) : o_(std::move(opts)) {
        // paths taken from the config file are relative to the file, flags to the cwd
        fs::path base = o_.data_dir.empty() ? (o_.config_path.empty() ? fs::path(".")
                                                                       : fs::path(o_.config_path).parent_path())
                                            : fs::path(o_.data_dir);
        auto resolve = [&](std::string& p, const std::string& flag) {
            if (p.empty() || fs::path(p).is_absolute() || on_command_line(args, flag)) return;
            p = (base / p).lexically_normal().string();
        };
        resolve(o_.catalog, "--catalog");
        resolve(o_.queries, "--queries");
        resolve(o_.cache, "--cache");
        resolve(o_.transcripts, "--transcripts");
        resolve(o_.head, "--head");
        resolve(o_.index, "--index");
    }

    const Options& opts() const { return o_; }

    static void require(const std::string& value, const std::string& what) {
        if (value.empty()) throw ValidationError("missing required path '" + what + "' (set it in the config or pass --" + what + ")");
    }

    ToolCatalog catalog() const {
        require(o_.catalog, "catalog");
        auto c = load_catalog(o_.catalog);
        if (!o_.cache.empty() && fs::exists(o_.cache)) c = apply_cache(c, load_cache(o_.cache));
        return c;
    }

    // Descriptions as ingested, without the cache.
    ToolCatalog raw_catalog() const {
        require(o_.catalog, "catalog");
        return load_catalog(o_.catalog);
    }

    QueryDataset queries(const ToolCatalog& catalog) const {
        require(o_.queries, "queries");
        return load_queries(o_.queries, catalog, o_.split_seed);
    }

    std::shared_ptr<const dense::EmbeddingProvider> embedder() const {
        if (o_.embedder == "test") return std::make_shared<dense::HashEmbedder>(o_.embedding_dim);
        dense::RemoteEmbeddingConfig rc;
        rc.url = o_.embed_url;
        rc.model = o_.embed_model;
        rc.dimension = o_.embedding_dim;
        rc.token_env = o_.embed_token_env;
        if (rc.url.empty()) throw ValidationError("remote embedder needs --embed-url");
        return std::make_shared<dense::RemoteEmbeddingProvider>(rc);
    }

    std::shared_ptr<llm::LlmProvider> llm() const {
        if (o_.llm == "scripted") {
            require(o_.transcripts, "transcripts");
            llm::Transcript t = fs::is_directory(o_.transcripts) ? fixtures::load_transcript_dir(o_.transcripts)
                                                                 : llm::load_transcript(o_.transcripts);
            return std::make_shared<llm::ScriptedProvider>(std::move(t), o_.strict_transcripts);
        }
        llm::RemoteChatConfig rc;
        rc.url = o_.llm_url;
        rc.model = o_.llm_model;
        rc.token_env = o_.llm_token_env;
        if (rc.url.empty()) throw ValidationError("remote LLM needs --llm-url");
        return std::make_shared<llm::RemoteChatProvider>(rc);
    }

    std::optional<train::ProjectionHead> head() const {
        if (o_.head.empty()) return std::nullopt;
        return train::load_head(o_.head);
    }

    pipeline::PipelineConfig pipeline_config() const {
        pipeline::PipelineConfig c;
        c.pool_size = o_.pool_size;
        c.plan.max_steps = o_.max_steps;
        c.plan.batch_size = o_.batch_size;
        c.plan.seed = o_.plan_seed;
        return c;
    }

    pipeline::PnrPipeline pipeline(const ToolCatalog& catalog) const {
        return pipeline::make_default_pipeline(catalog, embedder(), llm(), pipeline_config(), head());
    }

private:
    Options o_;
};

const QueryRecord& find_query(const QueryDataset& ds, const std::string& id) {
    const auto* q = ds.find(id);
    if (!q) throw NotFoundError("no query with id '" + id + "'");
    return *q;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) return;
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    write_file(path, content);
}

void print_steps(const pipeline::PnRResult& r) {
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
        const auto& s = r.steps[i];
        std::cout << "step " << (i + 1) << "\t" << s.sub_query.text << "\t" << join(s.shortlist.tool_ids, ",") << "\n";
    }
}

// ---- subcommands ----

void cmd_ingest(const Context& ctx, const std::string& out_catalog, const std::string& out_queries) {
    auto catalog = ctx.raw_catalog();
    std::cout << "catalog\t" << catalog.size() << " tools\n";
    write_output(out_catalog, serialize_catalog(catalog));
    if (!ctx.opts().queries.empty()) {
        auto ds = ctx.queries(catalog);
        std::map<Split, std::size_t> counts;
        for (const auto& q : ds.records) ++counts[q.split];
        std::cout << "queries\t" << ds.records.size() << " (train " << counts[Split::train] << ", dev "
                  << counts[Split::dev] << ", test " << counts[Split::test] << ")\n";
        write_output(out_queries, serialize_queries(ds.records));
    }
}

void cmd_index(const Context& ctx, const std::string& out) {
    Context::require(out, "out");
    auto catalog = ctx.catalog();
    auto index = dense::build_index(catalog, *ctx.embedder(), ctx.head());
    write_output(out, dense::serialize_index(index));
    std::cout << "index\t" << index.entries.size() << " tools\tcatalog version " << index.catalog_version << "\n";
}

void cmd_plan(const Context& ctx, const std::string& query_id, const std::string& out) {
    auto catalog = ctx.catalog();
    auto ds = ctx.queries(catalog);
    const auto& q = find_query(ds, query_id);
    auto pipe = ctx.pipeline(catalog);
    auto r = pipeline::run_pnr(q, pipe);
    for (std::size_t i = 0; i < r.steps.size(); ++i)
        std::cout << (i + 1) << ". " << r.steps[i].sub_query.text << "\n";
    std::cout << "status\t" << pipeline::to_string(r.status) << "\n";
    write_output(out, pipeline::serialize_trace(r));
    if (r.failed()) rethrow_failure(r, "plan for '" + query_id + "'");
}

void cmd_retrieve(const Context& ctx, const std::string& query_id, const std::string& out) {
    Context::require(ctx.opts().index, "index");
    auto catalog = ctx.catalog();
    auto index = dense::load_index(ctx.opts().index);
    if (!index.fresh_for(catalog))
        throw pipeline::StaleIndexError("index stamped with catalog version " + std::to_string(index.catalog_version) +
                                        " but the catalog is at version " + std::to_string(catalog.version()) +
                                        "; run 'toolret index' first");
    auto ds = ctx.queries(catalog);
    const auto& q = find_query(ds, query_id);
    pipeline::PnrPipeline pipe(catalog, std::move(index), ctx.embedder(), ctx.llm(), pipeline::default_scorer(catalog),
                               ctx.pipeline_config());
    auto r = pipeline::run_pnr(q, pipe);
    write_output(out, pipeline::serialize_trace(r));
    if (r.failed()) rethrow_failure(r, "retrieval for '" + query_id + "'");
    print_steps(r);
    std::cout << "tools\t" << join(std::vector<std::string>(r.tools.begin(), r.tools.end()), ",") << "\n";
}

void cmd_optimize(const Context& ctx, const std::string& out_cache, const std::string& report) {
    Context::require(out_cache, "out-cache");
    auto catalog = ctx.catalog();
    auto ds = ctx.queries(catalog);
    auto pipe = ctx.pipeline(catalog);
    eg::EgConfig cfg;
    cfg.failure_threshold = ctx.opts().failure_threshold;
    cfg.max_rounds = ctx.opts().max_rounds;
    cfg.query_cap = ctx.opts().query_cap;
    auto llm = ctx.llm();
    auto result = eg::run_eg(ds.split(Split::train), ds.split(Split::dev), pipe, *llm, cfg);
    // merge onto any existing cache so earlier accepted edits survive
    DescriptionCache cache;
    if (!ctx.opts().cache.empty() && fs::exists(ctx.opts().cache)) cache = load_cache(ctx.opts().cache);
    for (auto& [id, e] : cache_from_catalog(result.catalog)) cache[id] = e;
    write_output(out_cache, serialize_cache(cache));
    write_output(report, eg::serialize_proposals(result.report));
    std::size_t accepted = 0;
    for (const auto& p : result.report.proposals) accepted += p.accepted;
    std::cout << "rounds\t" << result.report.rounds.size() << "\nproposals\t" << result.report.proposals.size()
              << "\naccepted\t" << accepted << "\n";
}

void cmd_train(const Context& ctx, const std::string& out, std::size_t steps, double lr, std::size_t negatives,
               std::size_t batch, std::uint64_t seed) {
    Context::require(out, "out");
    auto catalog = ctx.catalog();
    auto ds = ctx.queries(catalog);
    auto embedder = ctx.embedder();
    std::map<std::string, Eigen::VectorXd> tool_vecs;
    for (const auto& [id, tool] : catalog.tools()) tool_vecs[id] = embedder->embed(tool.description).values();
    const auto ids = catalog.ids();

    Rng rng(derive_seed(seed, 0x7a1));
    std::vector<train::TrainItem> items;
    for (const auto& q : ds.split(Split::train)) {
        const Eigen::VectorXd qv = embedder->embed(q.text).values();
        for (const auto& gold : q.gold_tool_ids) {
            train::TrainItem item{qv, tool_vecs.at(gold), {}};
            std::vector<std::string> pool;
            for (const auto& id : ids)
                if (!q.gold_tool_ids.count(id)) pool.push_back(id);
            rng.shuffle(pool);
            for (std::size_t k = 0; k < std::min(negatives, pool.size()); ++k) item.negatives.push_back(tool_vecs.at(pool[k]));
            items.push_back(std::move(item));
        }
    }
    if (items.empty()) throw ValidationError("no training pairs: the train split has no queries");
    std::vector<train::TrainBatch> batches;
    for (std::size_t i = 0; i < items.size(); i += batch) {
        train::TrainBatch b;
        for (std::size_t j = i; j < std::min(items.size(), i + batch); ++j) b.items.push_back(items[j]);
        batches.push_back(std::move(b));
    }
    train::TrainConfig cfg;
    cfg.steps = steps;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    auto result = train::train(train::ProjectionHead::identity(embedder->dimension()), batches, cfg);
    write_output(out, train::serialize_head(result.head));
    std::cout << "pairs\t" << items.size() << "\nloss\t" << fmt::format("{:.6f} -> {:.6f}", result.loss_trace.front(),
                                                                          result.loss_trace.back())
              << "\n";
}

void cmd_eval(const Context& ctx, const std::string& split_name, std::size_t sample, const std::string& system,
              const std::string& report) {
    auto catalog = ctx.catalog();
    auto ds = ctx.queries(catalog);
    const auto split = ds.split(parse_split(split_name));
    std::unique_ptr<pipeline::ToolRetriever> owned;
    std::optional<pipeline::PnrPipeline> pnr;
    pipeline::ToolRetriever* retriever = nullptr;
    if (system == "pnr") {
        pnr.emplace(ctx.pipeline(catalog));
        retriever = &*pnr;
    } else if (system == "dense") {
        owned = std::make_unique<pipeline::DenseBaseline>(catalog, ctx.embedder(), 5);
        retriever = owned.get();
    } else {
        owned = std::make_unique<pipeline::Bm25Baseline>(catalog, 5);
        retriever = owned.get();
    }
    json config = {{"system", system}, {"split", split_name}, {"embedder", ctx.embedder()->provider_id()},
                   {"fine_tuned", !ctx.opts().head.empty()}};
    auto r = eval::evaluate_system(split, *retriever, sample, ctx.opts().eval_seed, config);
    write_output(report, eval::serialize_report(r));
    std::cout << eval::summary_table(r);
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("toolret");
    spdlog::set_default_logger(logger);

    CLI::App app{"Tool retrieval: plan-and-retrieve with description editing"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.set_config("--config", "", "flat key=value config file; flags override it");
    app.add_option("--data-dir", o.data_dir, "base for relative input paths from the config (default: its directory)");
    app.add_option("--catalog", o.catalog, "tools JSONL");
    app.add_option("--queries", o.queries, "queries JSONL");
    app.add_option("--cache", o.cache, "description cache JSON (applied when present)");
    app.add_option("--transcripts", o.transcripts, "transcript JSONL file or directory for the scripted LLM");
    app.add_option("--head", o.head, "projection head file");
    app.add_option("--index", o.index, "dense index file read by retrieve");
    app.add_option("--llm", o.llm, "LLM provider")->check(CLI::IsMember({"scripted", "remote"}));
    app.add_option("--strict-transcripts", o.strict_transcripts, "fail on a transcript miss");
    app.add_option("--llm-url", o.llm_url);
    app.add_option("--llm-model", o.llm_model);
    app.add_option("--llm-token-env", o.llm_token_env, "environment variable holding the LLM token");
    app.add_option("--embedder", o.embedder, "embedding provider")->check(CLI::IsMember({"test", "remote"}));
    app.add_option("--embed-url", o.embed_url);
    app.add_option("--embed-model", o.embed_model);
    app.add_option("--embed-token-env", o.embed_token_env, "environment variable holding the embedding token");
    app.add_option("--embedding-dim", o.embedding_dim)->check(CLI::Range(1, 65536));
    app.add_option("--pool-size", o.pool_size, "dense candidates per sub-query")->check(CLI::Range(5, 1000));
    app.add_option("--max-steps", o.max_steps)->check(CLI::Range(1, 50));
    app.add_option("--batch-size", o.batch_size, "planner hypotheses per step")->check(CLI::Range(1, 32));
    app.add_option("--failure-threshold", o.failure_threshold)->check(CLI::Range(0.0, 1.0));
    app.add_option("--max-rounds", o.max_rounds)->check(CLI::Range(1, 100));
    app.add_option("--query-cap", o.query_cap)->check(CLI::Range(1, 100));
    app.add_option("--split-seed", o.split_seed);
    app.add_option("--plan-seed", o.plan_seed);
    app.add_option("--eval-seed", o.eval_seed);
    app.add_option("--sample-size", o.sample_size)->check(CLI::Range(1, 1000000));
    app.add_option("--log-level", o.log_level)->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    std::string out, out_queries, report, query_id, split = "test", system = "pnr";
    std::size_t sample = 0, train_steps = 100, negatives = 4, train_batch = 8;
    double lr = 0.05;
    std::uint64_t train_seed = 0;

    auto* ingest = app.add_subcommand("ingest", "validate and normalize the data files");
    ingest->add_option("--out", out, "normalized tools file");
    ingest->add_option("--out-queries", out_queries, "normalized queries file");

    auto* index = app.add_subcommand("index", "build and save the dense index");
    index->add_option("--out", out, "index file")->required();

    auto* plan = app.add_subcommand("plan", "print a query's sub-query decomposition");
    plan->add_option("--query-id", query_id)->required();
    plan->add_option("--out", out, "trace JSONL");

    auto* retrieve = app.add_subcommand("retrieve", "plan-and-retrieve one query against a saved index");
    retrieve->add_option("--query-id", query_id)->required();
    retrieve->add_option("--out", out, "trace JSONL");

    auto* optimize = app.add_subcommand("optimize", "run description editing and write the cache");
    optimize->add_option("--out-cache", out, "description cache to write")->required();
    optimize->add_option("--report", report, "proposal report JSONL");

    auto* train_cmd = app.add_subcommand("train", "fit the projection head on the train split");
    train_cmd->add_option("--out", out, "head file")->required();
    train_cmd->add_option("--steps", train_steps)->check(CLI::Range(1, 100000));
    train_cmd->add_option("--lr", lr)->check(CLI::PositiveNumber);
    train_cmd->add_option("--negatives", negatives)->check(CLI::Range(1, 1000));
    train_cmd->add_option("--batch", train_batch)->check(CLI::Range(1, 10000));
    train_cmd->add_option("--seed", train_seed);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a retriever on a split");
    eval_cmd->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
    eval_cmd->add_option("--sample", sample, "queries to sample (default: sample_size)");
    eval_cmd->add_option("--system", system)->check(CLI::IsMember({"pnr", "dense", "bm25"}));
    eval_cmd->add_option("--report", report, "metrics report JSONL");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << one_line(e.what()) << "\n";
        return 2;
    }
    spdlog::set_level(spdlog::level::from_str(o.log_level));
    o.config_path = app.get_config_ptr()->as<std::string>();

    try {
        Context ctx(o, std::vector<std::string>(argv + 1, argv + argc));
        if (*ingest) cmd_ingest(ctx, out, out_queries);
        else if (*index) cmd_index(ctx, out);
        else if (*plan) cmd_plan(ctx, query_id, out);
        else if (*retrieve) cmd_retrieve(ctx, query_id, out);
        else if (*optimize) cmd_optimize(ctx, out, report);
        else if (*train_cmd) cmd_train(ctx, out, train_steps, lr, negatives, train_batch, train_seed);
        else if (*eval_cmd) cmd_eval(ctx, split, sample ? sample : o.sample_size, system, report);
    } catch (const std::exception& e) {
        const auto f = classify(e);
        std::cerr << "error: " << f.kind << ": " << one_line(e.what()) << "\n";
        return f.code;
    }
    return 0;
}
