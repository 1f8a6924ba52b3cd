#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include "api_schemas.hpp"
#include "support.hpp"

#include <httplib.h>
#include "tracealign/json_schema.hpp"
#include "tracealign/service.hpp"

using namespace testsupport;

namespace {

std::string enc(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.') out += static_cast<char>(c);
    else {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02X", c);
      out += buf;
    }
  }
  return out;
}

struct Fixture {
  Engine engine = Engine::local(portfolio_gateway());
  std::shared_ptr<SessionService> svc;
  std::unique_ptr<HttpServer> server;
  std::unique_ptr<httplib::Client> client;

  explicit Fixture(Session s) {
    svc = std::make_shared<SessionService>(std::move(s), engine);
    server = std::make_unique<HttpServer>(svc);
    const int port = server->bind("127.0.0.1", 0);
    server->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(60, 0);
  }
  ~Fixture() { server->stop(); }

  json call(const std::string& method, const std::string& path, const json& body, int expect_status,
            const std::string& contract = "") {
    httplib::Result r;
    const std::string b = body.is_null() ? "" : body.dump();
    if (method == "GET") r = client->Get(path);
    else if (method == "POST") r = client->Post(path, b, "application/json");
    else if (method == "PUT") r = client->Put(path, b, "application/json");
    else if (method == "PATCH") r = client->Patch(path, b, "application/json");
    else r = client->Delete(path, b, "application/json");
    REQUIRE_MESSAGE(r, method << " " << path << " failed to connect");
    INFO(method << " " << path << " -> " << r->body);
    CHECK(r->status == expect_status);
    CHECK(r->get_header_value("Content-Type") == "application/json");
    auto j = json::parse(r->body);
    const json* schema = nullptr;
    if (expect_status == 409) schema = &api_schemas::conflict();
    else if (expect_status >= 400) schema = &api_schemas::error();
    else schema = &api_schemas::endpoints().at(contract.empty() ? method + " " + path : contract);
    auto err = schema::validate(*schema, j);
    CHECK_MESSAGE(!err, (err ? *err : ""));
    return j;
  }
};

// Replays the fixture refinement script through the node endpoints.
void refine_over_http(Fixture& f) {
  for (const auto& a : read_jsonl(fixture("portfolio/actions.jsonl"))) {
    const auto type = a.at("type").get<std::string>();
    if (type == "rename") {
      json body = json::object();
      if (a.contains("title")) body["title"] = a["title"];
      if (a.contains("description")) body["description"] = a["description"];
      f.call("PATCH", "/nodes/" + a["id"].get<std::string>(), body, 200, "PATCH /nodes/{id}");
    } else if (type == "merge") {
      auto r = f.call("POST", "/nodes/merge", {{"ids", a["ids"]}, {"title", a["title"]}}, 200);
      CHECK(r.at("created").size() == 1);
    } else if (type == "confirm") {
      auto r = f.call("PATCH", "/nodes/" + a["id"].get<std::string>(), {{"state", "confirmed"}}, 200, "PATCH /nodes/{id}");
      CHECK(r.at("node").at("state") == "confirmed");
    }
  }
}

}  // namespace

TEST_CASE("full workflow over HTTP matches the library pipeline") {
  Fixture f(portfolio_ingested());
  auto summary = f.call("GET", "/summary", nullptr, 200);
  CHECK(summary.at("runs").size() == 5);
  CHECK(summary.at("evaluated") == false);
  f.call("GET", "/runs", nullptr, 200);
  auto log = f.call("GET", "/runs/r1/log?from=2&to=4", nullptr, 200, "GET /runs/{id}/log");
  for (const auto& e : log.at("entries")) CHECK((e.at("step_index") >= 2 && e.at("step_index") <= 4));
  f.call("GET", "/runs/r1/log?from=5&to=1", nullptr, 400);
  f.call("GET", "/runs/zz/log", nullptr, 404);
  f.call("GET", "/flow", nullptr, 404);
  f.call("GET", "/matrix", nullptr, 404);

  auto extracted = f.call("POST", "/nodes/extract", json::object(), 200);
  CHECK(!extracted.at("nodes").empty());
  f.call("GET", "/nodes", nullptr, 200);
  f.call("POST", "/evaluate?wait=true", json::object(), 400);
  refine_over_http(f);
  f.call("PATCH", "/nodes/n99", {{"title", "x"}}, 404);
  f.call("PATCH", "/nodes/n1", json::object(), 400);
  f.call("POST", "/nodes/merge", {{"ids", {"n1"}}}, 400);
  f.call("POST", "/nodes/merge", "not an object", 400);

  auto deps = f.call("POST", "/dependencies/infer", json::object(), 200);
  CHECK(!deps.at("edges").empty());
  f.call("GET", "/dependencies", nullptr, 200);
  auto put = f.call("PUT", "/dependencies", {{"edges", deps.at("edges")}}, 200);
  CHECK(put.at("edges").size() == deps.at("edges").size());
  f.call("PUT", "/dependencies", {{"edges", {{{"from", "n1"}, {"to", "n2"}}, {{"from", "n2"}, {"to", "n1"}}}}}, 400);
  CHECK(f.call("GET", "/dependencies", nullptr, 200).at("edges") == put.at("edges"));

  auto started = f.call("POST", "/evaluate", json::object(), 202);
  CHECK(started.at("status").at("state") == "running");
  json st;
  for (int i = 0; i < 600; ++i) {
    st = f.call("GET", "/evaluate/status", nullptr, 200);
    if (st.at("status").at("state") != "running") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  REQUIRE(st.at("status").at("state") == "done");
  CHECK(st.at("status").at("done") == st.at("status").at("total"));
  CHECK(st.at("status").at("result_revision") == st.at("revision"));

  auto matrix = f.call("GET", "/matrix", nullptr, 200);
  auto flow = f.call("GET", "/flow", nullptr, 200);
  for (const auto& n : flow.at("nodes"))
    if (n.at("id") != "START" && n.at("id") != "END") CHECK(n.contains("tally"));
  f.call("GET", "/flow/paths", nullptr, 200);

  Session lib = portfolio_evaluated(f.engine);
  json expect_matrix = lib.matrix;
  matrix.erase("revision");
  CHECK(matrix == expect_matrix);

  const long rev = flow.at("revision").get<long>();
  for (const auto& l : flow.at("links")) {
    for (const auto& id : {l.at("id").get<std::string>(), l.at("transition_id").get<std::string>()}) {
      auto a = f.call("GET", "/flow/links/" + enc(id) + "/actions?revision=" + std::to_string(rev), nullptr, 200,
                      "GET /flow/links/{id}/actions");
      auto e = f.call("GET", "/flow/links/" + enc(id) + "/errors", nullptr, 200, "GET /flow/links/{id}/errors");
      CHECK(a.at("link") == id);
      for (const auto& r : e.at("reports"))
        for (const auto& ref : r.at("failed_examples")) {
          const auto run = ref.get<std::string>().substr(0, ref.get<std::string>().rfind(':'));
          REQUIRE(a.at("segments").contains(run));
        }
    }
  }
  const auto first_link = flow.at("links").at(0).at("id").get<std::string>();
  f.call("GET", "/flow/links/" + enc(first_link) + "/actions?revision=" + std::to_string(rev - 1), nullptr, 409);
  f.call("GET", "/flow/links/" + enc("n1->n99#success") + "/errors", nullptr, 404);
  f.call("POST", "/evaluate?wait=true", {{"base_revision", rev - 1}}, 409);
  auto again = f.call("POST", "/evaluate?wait=true", {{"base_revision", rev}}, 200, "POST /evaluate");
  CHECK(again.at("status").at("state") == "done");
}

TEST_CASE("split and delete") {
  Engine engine = Engine::local(portfolio_gateway());
  Session s = portfolio_ingested();
  apply_mutation(s, {{"kind", "extract"}}, engine);
  Fixture f(std::move(s));
  auto nodes = f.call("GET", "/nodes", nullptr, 200).at("nodes");
  const json* big = nullptr;
  for (const auto& n : nodes)
    if (n.at("members").size() >= 2) big = &n;
  REQUIRE(big);
  const auto id = big->at("id").get<std::string>();
  const auto& m = big->at("members");
  json partition = {json::array({m[0]}), json::array()};
  for (std::size_t i = 1; i < m.size(); ++i) partition[1].push_back(m[i]);
  f.call("POST", "/nodes/" + id + "/split", {{"partition", {json::array({m[0]})}}}, 400);
  auto split = f.call("POST", "/nodes/" + id + "/split", {{"partition", partition}}, 200, "POST /nodes/{id}/split");
  REQUIRE(split.at("created").size() == 2);
  const auto part = split.at("created").at(0).get<std::string>();
  f.call("DELETE", "/nodes/" + part, nullptr, 200, "DELETE /nodes/{id}");
  f.call("DELETE", "/nodes/" + part, nullptr, 404);
  auto after = f.call("GET", "/nodes", nullptr, 200);
  CHECK(!after.at("uncovered").empty());
}

TEST_CASE("concurrent edits from the same base revision: exactly one wins") {
  Engine engine = Engine::local(portfolio_gateway());
  Session s = portfolio_ingested();
  apply_mutation(s, {{"kind", "extract"}}, engine);
  const long base = s.revision;
  Fixture f(std::move(s));
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i)
    threads.emplace_back([&, i] {
      httplib::Client c(f.client->host(), f.client->port());
      json body = {{"title", "Title " + std::to_string(i)}, {"base_revision", base}};
      auto r = c.Patch("/nodes/n1", body.dump(), "application/json");
      if (r && r->status == 200) ++ok;
      if (r && r->status == 409 && json::parse(r->body).at("current_revision") == base + 1) ++conflict;
    });
  for (auto& t : threads) t.join();
  CHECK(ok == 1);
  CHECK(conflict == 3);
  CHECK(f.svc->snapshot()->revision == base + 1);
}

TEST_CASE("bind failure is reported") {
  Engine engine = Engine::local(portfolio_gateway());
  auto svc = std::make_shared<SessionService>(portfolio_ingested(), engine);
  HttpServer a(svc);
  const int port = a.bind("127.0.0.1", 0);
  HttpServer b(svc);
  CHECK_THROWS_AS(b.bind("127.0.0.1", port), DataError);
}
