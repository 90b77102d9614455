#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "toolret/dense_retriever.hpp"

using namespace toolret;
using namespace toolret::dense;
using test_support::make_tool;

namespace {

class PickyEmbedder final : public EmbeddingProvider {
public:
    std::string provider_id() const override { return "picky"; }
    std::size_t dimension() const override { return 8; }
    EmbeddingVector embed(std::string_view text) const override {
        if (text.find("poison") != std::string_view::npos) throw ProviderError("rejected text");
        return inner_.embed(text);
    }

private:
    HashEmbedder inner_{8};
};

ToolCatalog small_catalog() {
    return ToolCatalog::from_tools({make_tool("A", "weather forecast for cities"), make_tool("B", "stock market prices"),
                                    make_tool("C", "music playlist shuffle")});
}

EmbeddingVector random_unit(Rng& rng, std::size_t dim) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (auto& x : v) x = rng.normal();
    return EmbeddingVector::normalized(v);
}

}  // namespace

TEST_SUITE("dense_retriever") {
    TEST_CASE("hash embedder is deterministic, unit norm and rejects empty text") {
        HashEmbedder e(64);
        auto a = e.embed("Weather forecast"), b = e.embed("weather FORECAST!");
        CHECK(a == b);
        CHECK(a.values().norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(a.dim() == 64);
        CHECK_THROWS_AS(e.embed("  !! "), ProviderError);
        CHECK(e.provider_id() == "hash-bow-64");
    }

    TEST_CASE("hash embedder buckets tokens by fnv1a64") {
        HashEmbedder e(16);
        auto v = e.embed("x x y").values();
        Eigen::VectorXd expect = Eigen::VectorXd::Zero(16);
        expect[static_cast<Eigen::Index>(fnv1a64("x") % 16)] += 2;
        expect[static_cast<Eigen::Index>(fnv1a64("y") % 16)] += 1;
        expect.normalize();
        CHECK((v - expect).norm() < 1e-12);
    }

    TEST_CASE("normalizing the zero vector fails") {
        CHECK_THROWS_AS(EmbeddingVector::normalized(Eigen::VectorXd::Zero(4)), ProviderError);
    }

    TEST_CASE("index of three tools carries the catalog stamp") {
        auto c = small_catalog();
        HashEmbedder e(32);
        auto idx = build_index(c, e);
        CHECK(idx.entries.size() == 3);
        CHECK(idx.catalog_version == c.version());
        CHECK(idx.fresh_for(c));
        CHECK(idx.provider_id == e.provider_id());
    }

    TEST_CASE("editing one description changes only that vector") {
        auto c = small_catalog();
        HashEmbedder e(32);
        auto before = build_index(c, e);
        auto edited = c.with_description("B", "bond yields and rates", 1, 0.0);
        auto after = build_index(edited, e);
        CHECK_FALSE(before.fresh_for(edited));
        for (std::size_t i = 0; i < before.entries.size(); ++i) {
            const bool same = before.entries[i].vector == after.entries[i].vector;
            CHECK(same == (before.entries[i].tool_id != "B"));
        }
        auto updated = update_entry(before, edited, "B", e);
        CHECK(updated.fresh_for(edited));
        for (std::size_t i = 0; i < after.entries.size(); ++i) CHECK(updated.entries[i].vector == after.entries[i].vector);
    }

    TEST_CASE("a rejected text fails the build naming the tool") {
        auto c = ToolCatalog::from_tools({make_tool("ok", "fine text"), make_tool("bad", "poison text")});
        PickyEmbedder e;
        try {
            build_index(c, e);
            FAIL("expected an index build error");
        } catch (const IndexBuildError& err) {
            CHECK(err.tool_id() == "bad");
            CHECK(std::string(err.what()).find("'bad'") != std::string::npos);
        }
    }

    TEST_CASE("self-similarity ranks the tool first with cosine 1") {
        auto c = small_catalog();
        HashEmbedder e(64);
        auto idx = build_index(c, e);
        auto r = dense_topk(idx, e.embed("stock market prices"), 3);
        CHECK(r.front().id == "B");
        CHECK(r.front().score == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("k at least N returns the full ranking") {
        auto c = small_catalog();
        HashEmbedder e(64);
        auto idx = build_index(c, e);
        CHECK(dense_topk(idx, e.embed("music"), 3).size() == 3);
        CHECK(dense_topk(idx, e.embed("music"), 50).size() == 3);
        CHECK(dense_topk(idx, e.embed("music"), 0).empty());
    }

    TEST_CASE("random unit vectors match the brute-force cosine sort") {
        Rng rng(77);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 1 + rng.uniform_index(100), dim = 8;
            DenseIndex idx;
            idx.dim = dim;
            for (std::size_t i = 0; i < n; ++i) {
                Eigen::VectorXd v = random_unit(rng, dim).values();
                // exact duplicates exercise the tie rule
                if (i > 0 && rng.uniform_index(5) == 0) v = idx.entries[rng.uniform_index(i)].vector;
                idx.entries.push_back({fmt::format("t{:03}", n - i), v});
            }
            std::sort(idx.entries.begin(), idx.entries.end(),
                      [](const IndexEntry& a, const IndexEntry& b) { return a.tool_id < b.tool_id; });
            auto q = random_unit(rng, dim);
            const std::size_t k = 1 + rng.uniform_index(n + 3);

            std::vector<std::pair<double, std::string>> oracle;
            for (const auto& e : idx.entries) {
                double dot = 0;
                for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(dim); ++j) dot += e.vector[j] * q.values()[j];
                oracle.push_back({dot, e.tool_id});
            }
            std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first > b.first : a.second < b.second;
            });
            auto got = dense_topk(idx, q, k);
            REQUIRE(got.size() == std::min(k, n));
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].id == oracle[i].second);
                CHECK(got[i].score == doctest::Approx(oracle[i].first).epsilon(1e-12));
            }
        }
    }

    TEST_CASE("head projects both sides") {
        auto c = small_catalog();
        HashEmbedder e(16);
        train::ProjectionHead head{Eigen::MatrixXd::Identity(16, 16) * 2.0};
        auto idx = build_index(c, e, head);
        auto plain = build_index(c, e);
        CHECK((idx.entries[0].vector - 2.0 * plain.entries[0].vector).norm() < 1e-12);
        auto r = dense_topk(idx, e.embed("weather forecast for cities"), 1);
        CHECK(r[0].id == "A");
        CHECK(r[0].score == doctest::Approx(4.0).epsilon(1e-12));
    }

    TEST_CASE("index file round trip") {
        auto c = small_catalog();
        HashEmbedder e(16);
        train::ProjectionHead head{Eigen::MatrixXd::Identity(16, 16) * 0.5};
        for (auto h : {std::optional<train::ProjectionHead>{}, std::optional<train::ProjectionHead>{head}}) {
            auto idx = build_index(c, e, h);
            auto text = serialize_index(idx);
            auto back = parse_index(text);
            CHECK(serialize_index(back) == text);
            CHECK(back.fresh_for(c));
            CHECK(back.head.has_value() == h.has_value());
            for (std::size_t i = 0; i < idx.entries.size(); ++i) CHECK(back.entries[i].vector == idx.entries[i].vector);
        }
        CHECK_THROWS_AS(parse_index("{}"), ValidationError);
    }
}
