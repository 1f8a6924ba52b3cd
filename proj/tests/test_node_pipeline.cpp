#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "tracealign/node_pipeline.hpp"
#include "tracealign/text.hpp"

using namespace testsupport;

namespace {

Segment make_segment(const std::string& run, std::size_t idx, const std::string& text, const EmbeddingProvider& e,
                     std::int64_t step = 0) {
  Segment s;
  s.run_id = run;
  s.index = idx;
  s.message_range = {0, 0};
  s.step_range = {step, step};
  s.text = text;
  s.centroid = e.embed(text);
  return s;
}

CandidateNode cand(const std::string& id, const std::string& summary, const EmbeddingProvider& e,
                   std::vector<SegmentRef> members, std::int64_t earliest = 0) {
  return {id, summary, e.embed(summary), std::move(members), earliest};
}

// Independent replay of the greedy rule over a similarity matrix.
std::vector<std::vector<std::size_t>> replay(const std::vector<std::size_t>& order, const std::vector<std::vector<double>>& sim,
                                             double t) {
  std::vector<std::vector<std::size_t>> groups;
  for (auto i : order) {
    bool placed = false;
    for (auto& g : groups)
      if (sim[i][g[0]] >= t) {
        g.push_back(i);
        placed = true;
        break;
      }
    if (!placed) groups.push_back({i});
  }
  return groups;
}

}  // namespace

TEST_CASE("extractive summary") {
  HashingEmbedder e(256);
  auto one = make_segment("r", 0, "Holdings loaded from holdings.csv.", e);
  CHECK(extractive_summary(one, e) == "Holdings loaded from holdings.csv.");

  auto three = make_segment("r", 0, "Open the file. Market prices retrieved for every ticker. Done.", e);
  three.centroid = e.embed("market prices retrieved ticker");
  std::vector<double> sims;
  for (const auto& s : text::split_sentences(three.text)) sims.push_back(cosine(e.embed(s), three.centroid));
  REQUIRE(sims[1] > sims[0]);
  REQUIRE(sims[1] > sims[2]);
  CHECK(extractive_summary(three, e) == "Open the file. Market prices retrieved for every ticker.");

  auto dup = make_segment("r", 0, "Same. Same.", e);
  CHECK(extractive_summary(dup, e) == "Same.");

  auto empty = make_segment("r", 0, "  ", e);
  CHECK_THROWS_AS(summarize_segment(empty, e, nullptr), DataError);
}

TEST_CASE("stub gateway summary passes through unchanged") {
  HashingEmbedder e(256);
  auto seg = make_segment("r", 0, "Ask FileSurfer to open holdings.csv. Holdings listed.", e);
  auto gw = Gateway::stub({{Gateway::stub_key("segment_summary", {{"segment_text", seg.text}}), {{"summary", "Holdings are known."}}}});
  CHECK(summarize_segment(seg, e, gw.get()) == "Holdings are known.");
  auto missing = Gateway::stub();
  CHECK(summarize_segment(seg, e, missing.get()) == extractive_summary(seg, e));
}

TEST_CASE("consolidate: identical summaries merge, dissimilar stay apart") {
  HashingEmbedder e(256);
  AnalysisConfig c;
  auto out = consolidate({cand("r1#0", "read portfolio file", e, {{"r1", 0}}), cand("r2#0", "read portfolio file", e, {{"r2", 0}})}, c);
  REQUIRE(out.size() == 1);
  CHECK(out[0].support() == 2);
  CHECK(out[0].id == "r1#0");

  auto apart = consolidate({cand("a", "alpha beta", e, {{"r1", 0}}), cand("b", "gamma delta", e, {{"r1", 1}}),
                            cand("c", "epsilon zeta", e, {{"r2", 0}})},
                           c);
  CHECK(apart.size() == 3);
}

TEST_CASE("greedy grouping equals a matrix replay") {
  const std::vector<std::vector<double>> sim = {{1.0, 0.85, 0.10, 0.81, 0.20},
                                                {0.85, 1.0, 0.30, 0.95, 0.79},
                                                {0.10, 0.30, 1.0, 0.05, 0.90},
                                                {0.81, 0.95, 0.05, 1.0, 0.40},
                                                {0.20, 0.79, 0.90, 0.40, 1.0}};
  const std::vector<std::size_t> order = {1, 0, 4, 2, 3};
  auto g = greedy_groups(order, [&](std::size_t i, std::size_t j) { return sim[i][j]; }, 0.80);
  CHECK(g.groups == replay(order, sim, 0.80));
  CHECK(g.groups == std::vector<std::vector<std::size_t>>{{1, 0, 3}, {4, 2}});
  for (const auto& a : g.attaches) CHECK(a.similarity >= 0.80);
}

TEST_CASE("extract_candidates") {
  HashingEmbedder e(256);
  AnalysisConfig c;
  SegmentsByRun one{{"r1", {make_segment("r1", 0, "Read the portfolio file.", e)}}};
  auto single = extract_candidates(one, c, e, nullptr);
  REQUIRE(single.size() == 1);
  CHECK(single[0].support() == 1);

  SegmentsByRun three;
  json fixtures = json::object();
  const std::vector<std::string> texts = {"Ask FileSurfer to read the portfolio file holdings.csv.",
                                          "Ask FileSurfer to read portfolio file holdings.csv now.",
                                          "FileSurfer: read the portfolio file holdings.csv please."};
  for (int r = 0; r < 3; ++r) {
    const std::string run = "r" + std::to_string(r + 1);
    three[run] = {make_segment(run, 0, texts[r], e, 1), make_segment(run, 1, "unrelated step " + std::to_string(r) + " xyz", e, 5)};
    fixtures[Gateway::stub_key("segment_summary", {{"segment_text", texts[r]}})] = {{"summary", "Read the portfolio file."}};
  }
  auto gw = Gateway::stub(fixtures);
  auto out = extract_candidates(three, c, e, gw.get());
  REQUIRE(!out.empty());
  CHECK(out[0].support() == 3);
  CHECK(out[0].summary == "Read the portfolio file.");
  for (std::size_t i = 1; i < out.size(); ++i) {
    CHECK(out[i - 1].support() >= out[i].support());
    if (out[i - 1].support() == out[i].support()) CHECK(out[i - 1].id < out[i].id);
  }
  auto again = extract_candidates(three, c, e, gw.get());
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(again[i].id == out[i].id);
    CHECK(again[i].members == out[i].members);
  }
}

TEST_CASE("refinement actions") {
  HashingEmbedder e(256);
  AnalysisConfig c;
  SegmentsByRun segs;
  for (int r = 0; r < 3; ++r)
    for (int i = 0; i < 3; ++i) {
      const std::string run = "r" + std::to_string(r);
      segs[run].push_back(make_segment(run, static_cast<std::size_t>(i), "topic" + std::to_string(i) + " words here", e, i * 3));
    }
  NodeSet set;
  set.adopt(extract_candidates(segs, c, e, nullptr));
  REQUIRE(set.live().size() == 3);
  RefineContext ctx{&segs, &c, &e, nullptr};

  SUBCASE("merge unions members") {
    const auto a = set.live()[0]->id, b = set.live()[1]->id;
    const auto na = set.find(a)->members.size(), nb = set.find(b)->members.size();
    auto created = set.apply(RefineAction::merge({a, b}), ctx);
    REQUIRE(created.size() == 1);
    CHECK(set.find(created[0])->members.size() == na + nb);
    CHECK(set.find(created[0])->parent_ids == std::vector<std::string>{a, b});
    CHECK(set.find(created[0])->origin == NodeOrigin::Merge);
    CHECK_FALSE(set.find(a)->live());
  }
  SUBCASE("merge arity and unknown ids") {
    const auto a = set.live()[0]->id;
    CHECK_THROWS_AS(set.apply(RefineAction::merge({a}), ctx), DataError);
    CHECK_THROWS_AS(set.apply(RefineAction::merge({a, a}), ctx), DataError);
    CHECK_THROWS_AS(set.apply(RefineAction::merge({a, "n99"}), ctx), DataError);
    CHECK_THROWS_AS(set.apply(RefineAction::confirm("n99"), ctx), DataError);
  }
  SUBCASE("split law") {
    const auto* n = set.live()[0];
    const auto id = n->id;
    const auto m = n->members;
    REQUIRE(m.size() == 3);
    CHECK_THROWS_AS(set.apply(RefineAction::split(id, {{m[0]}, {m[0], m[1], m[2]}}), ctx), DataError);
    CHECK_THROWS_AS(set.apply(RefineAction::split(id, {{m[0], m[1], m[2]}}), ctx), DataError);
    CHECK_THROWS_AS(set.apply(RefineAction::split(id, {{m[0]}, {m[1]}}), ctx), DataError);
    CHECK_THROWS_AS(set.apply(RefineAction::split(id, {{m[0]}, {}, {m[1], m[2]}}), ctx), DataError);
    CHECK(set.find(id)->live());
    auto created = set.apply(RefineAction::split(id, {{m[0]}, {m[1], m[2]}}), ctx);
    REQUIRE(created.size() == 2);
    CHECK(set.find(created[0])->members == std::vector<SegmentRef>{m[0]});
    CHECK(set.find(created[1])->members == std::vector<SegmentRef>{m[1], m[2]});
  }
  SUBCASE("confirm, rename and remove") {
    const auto id = set.live()[0]->id;
    set.apply(RefineAction::confirm(id), ctx);
    set.apply(RefineAction::rename(id, "Holdings"), ctx);
    CHECK(set.confirmed().size() == 1);
    CHECK(set.find(id)->title == "Holdings");
    CHECK_THROWS_AS(set.apply(RefineAction::rename(id, " "), ctx), DataError);
    set.apply(RefineAction::remove(id), ctx);
    CHECK(set.confirmed().empty());
    CHECK(set.uncovered(segs).size() == 3);
  }
  SUBCASE("add rejects claimed segments") {
    const auto owned = set.live()[0]->members[0];
    CHECK_THROWS_AS(set.apply(RefineAction::add("x", "y", {owned}), ctx), DataError);
    set.apply(RefineAction::remove(set.live()[0]->id), ctx);
    CHECK_NOTHROW(set.apply(RefineAction::add("x", "y", {owned}), ctx));
    CHECK_THROWS_AS(set.apply(RefineAction::add("z", "w", {{"r0", 42}}), ctx), DataError);
  }
  SUBCASE("refresh keeps confirmed nodes and re-extracts the rest") {
    const auto keep = set.live()[0]->id;
    set.apply(RefineAction::rename(keep, "Kept"), ctx);
    set.apply(RefineAction::confirm(keep), ctx);
    const auto kept_members = set.find(keep)->members;
    auto created = set.apply(RefineAction::refresh(), ctx);
    CHECK(created.size() == 2);
    CHECK(set.find(keep)->title == "Kept");
    CHECK(set.find(keep)->members == kept_members);
    for (const auto& id : created)
      for (const auto& m : set.find(id)->members) CHECK(std::find(kept_members.begin(), kept_members.end(), m) == kept_members.end());
    CHECK(set.uncovered(segs).empty());
  }
  SUBCASE("json round trip") {
    set.apply(RefineAction::confirm(set.live()[0]->id), ctx);
    json j = set;
    CHECK(j.get<NodeSet>() == set);
    json a = RefineAction::split("n1", {{{"r0", 0}}, {{"r1", 0}}});
    CHECK(a.get<RefineAction>() == RefineAction::split("n1", {{{"r0", 0}}, {{"r1", 0}}}));
    CHECK_THROWS_AS(json({{"type", "explode"}}).get<RefineAction>(), DataError);
  }
}

TEST_CASE("random merge/split sequences conserve the live segment multiset") {
  HashingEmbedder e(64);
  AnalysisConfig c;
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    SegmentsByRun segs;
    for (int r = 0; r < 3; ++r)
      for (int i = 0; i < 4; ++i) {
        const std::string run = "r" + std::to_string(r);
        segs[run].push_back(make_segment(run, static_cast<std::size_t>(i), "w" + std::to_string(rng() % 6), e, i));
      }
    NodeSet set;
    set.adopt(extract_candidates(segs, c, e, nullptr));
    RefineContext ctx{&segs, &c, &e, nullptr};
    auto live_multiset = [&] {
      std::multiset<SegmentRef> m;
      for (const auto* n : set.live()) m.insert(n->members.begin(), n->members.end());
      return m;
    };
    const auto before = live_multiset();
    for (int step = 0; step < 10; ++step) {
      auto live = set.live();
      if (rng() % 2 && live.size() >= 2) {
        set.apply(RefineAction::merge({live[0]->id, live[1 + rng() % (live.size() - 1)]->id}), ctx);
      } else {
        const auto* n = live[rng() % live.size()];
        if (n->members.size() < 2) continue;
        std::vector<std::vector<SegmentRef>> parts(2);
        for (std::size_t k = 0; k < n->members.size(); ++k) parts[k == 0 ? 0 : (k == 1 ? 1 : rng() % 2)].push_back(n->members[k]);
        set.apply(RefineAction::split(n->id, parts), ctx);
      }
      REQUIRE(live_multiset() == before);
    }
  }
}
