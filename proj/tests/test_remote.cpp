#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "support.hpp"
#include "toolret/dense_retriever.hpp"
#include "toolret/llm_gateway.hpp"

// after the project headers: httplib pulls in system macros Eigen trips over
#include <httplib.h>

using namespace toolret;
using namespace std::chrono_literals;

namespace {

// Local HTTP server answering POST /api with `handler`, on an ephemeral port.
class LocalServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
    explicit LocalServer(Handler handler) {
        server_.Post("/api", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            last_auth = req.get_header_value("Authorization");
            last_body = req.body;
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api"; }

    std::atomic<int> hits{0};
    std::string last_auth;
    std::string last_body;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

void reply_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

dense::RemoteEmbeddingConfig embed_config(const LocalServer& s, std::size_t dim = 3) {
    dense::RemoteEmbeddingConfig c;
    c.url = s.url();
    c.model = "embed-test";
    c.dimension = dim;
    c.backoff = 1ms;
    c.timeout = 2000ms;
    return c;
}

llm::RemoteChatConfig chat_config(const LocalServer& s) {
    llm::RemoteChatConfig c;
    c.url = s.url();
    c.model = "chat-test";
    c.backoff = 1ms;
    c.timeout = 2000ms;
    return c;
}

const llm::Variables kFilterVars{{"query", "find track 42"}};

}  // namespace

TEST_SUITE("remote") {
    TEST_CASE("embedding reply shapes") {
        for (const auto& shape : {nlohmann::json{{"data", {{{"embedding", {3.0, 0.0, 4.0}}}}}},
                                  nlohmann::json{{"embeddings", {{3.0, 0.0, 4.0}}}},
                                  nlohmann::json{{"embedding", {3.0, 0.0, 4.0}}}}) {
            LocalServer s([&](const httplib::Request&, httplib::Response& res) { reply_json(res, shape); });
            dense::RemoteEmbeddingProvider p(embed_config(s));
            auto v = p.embed("hello");
            CHECK(v.values()[0] == doctest::Approx(0.6));
            CHECK(v.values()[2] == doctest::Approx(0.8));
            auto body = nlohmann::json::parse(s.last_body);
            CHECK(body["model"] == "embed-test");
            CHECK(body["input"] == nlohmann::json::array({"hello"}));
        }
    }

    TEST_CASE("embedding of the wrong dimension is rejected") {
        LocalServer s([](const httplib::Request&, httplib::Response& res) { reply_json(res, {{"embedding", {1.0, 2.0}}}); });
        dense::RemoteEmbeddingProvider p(embed_config(s));
        CHECK_THROWS_WITH_AS(p.embed("x"), doctest::Contains("dimension"), ProviderError);
        CHECK_THROWS_AS(dense::RemoteEmbeddingProvider(dense::RemoteEmbeddingConfig{}), ValidationError);
    }

    TEST_CASE("server errors and rate limits are retried") {
        for (int status : {500, 429}) {
            LocalServer* self = nullptr;
            LocalServer s([&](const httplib::Request&, httplib::Response& res) {
                if (self->hits < 3) return reply_json(res, {{"error", "busy"}}, status);
                reply_json(res, {{"embedding", {1.0, 0.0, 0.0}}});
            });
            self = &s;
            dense::RemoteEmbeddingProvider p(embed_config(s));
            CHECK(p.embed("x").values()[0] == doctest::Approx(1.0));
            CHECK(s.hits == 3);
        }
    }

    TEST_CASE("client errors fail at once") {
        LocalServer s([](const httplib::Request&, httplib::Response& res) { reply_json(res, {{"error", "bad"}}, 400); });
        dense::RemoteEmbeddingProvider p(embed_config(s));
        CHECK_THROWS_AS(p.embed("x"), ProviderError);
        CHECK(s.hits == 1);
    }

    TEST_CASE("retries run out into a provider error") {
        LocalServer s([](const httplib::Request&, httplib::Response& res) { reply_json(res, {{"error", "down"}}, 503); });
        auto cfg = chat_config(s);
        cfg.attempts = 2;
        llm::RemoteChatProvider p(cfg);
        CHECK_THROWS_AS(llm::complete(p, llm::TemplateId::entity_filter, kFilterVars), ProviderError);
        CHECK(s.hits == 2);
    }

    TEST_CASE("unreachable server is a provider error") {
        dense::RemoteEmbeddingConfig c;
        c.url = "http://127.0.0.1:1/api";
        c.dimension = 3;
        c.attempts = 1;
        c.timeout = 500ms;
        CHECK_THROWS_AS(dense::RemoteEmbeddingProvider(c).embed("x"), ProviderError);
    }

    TEST_CASE("chat reply shapes and request body") {
        for (const auto& shape : {nlohmann::json{{"choices", {{{"message", {{"content", "generic query"}}}}}}},
                                  nlohmann::json{{"choices", {{{"text", "generic query"}}}}},
                                  nlohmann::json{{"text", "generic query"}}}) {
            LocalServer s([&](const httplib::Request&, httplib::Response& res) { reply_json(res, shape); });
            llm::RemoteChatProvider p(chat_config(s));
            CHECK(llm::complete(p, llm::TemplateId::entity_filter, kFilterVars) == "generic query");
            auto body = nlohmann::json::parse(s.last_body);
            CHECK(body["model"] == "chat-test");
            CHECK(body["temperature"] == 0.0);
            CHECK(body["messages"][0]["role"] == "user");
            CHECK(body["messages"][0]["content"] == llm::render(llm::TemplateId::entity_filter, kFilterVars));
        }
        LocalServer empty([](const httplib::Request&, httplib::Response& res) { reply_json(res, nlohmann::json::object()); });
        llm::RemoteChatProvider p(chat_config(empty));
        CHECK_THROWS_WITH_AS(llm::complete(p, llm::TemplateId::entity_filter, kFilterVars), doctest::Contains("no text"),
                             ProviderError);
    }

    TEST_CASE("bearer token comes from the named environment variable") {
        LocalServer s([](const httplib::Request&, httplib::Response& res) { reply_json(res, {{"text", "ok"}}); });
        auto cfg = chat_config(s);
        cfg.token_env = "TOOLRET_TEST_TOKEN_VAR";
        ::unsetenv("TOOLRET_TEST_TOKEN_VAR");
        llm::RemoteChatProvider p(cfg);
        llm::complete(p, llm::TemplateId::entity_filter, kFilterVars);
        CHECK(s.last_auth.empty());
        ::setenv("TOOLRET_TEST_TOKEN_VAR", "sekrit", 1);
        llm::complete(p, llm::TemplateId::entity_filter, kFilterVars);
        CHECK(s.last_auth == "Bearer sekrit");
        ::unsetenv("TOOLRET_TEST_TOKEN_VAR");
    }
}
