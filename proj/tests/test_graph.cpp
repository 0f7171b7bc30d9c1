// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "apthunt/graph.hpp"
#include "apthunt/pipeline.hpp"
#include "apthunt/random.hpp"

using namespace apthunt;
using namespace apthunt::graph;

namespace {

using EdgeSet = std::set<std::pair<std::size_t, std::size_t>>;

std::vector<std::vector<bool>> closure(std::size_t n, const EdgeSet& edges) {
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (auto [a, b] : edges) r[a][b] = true;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (r[i][k] && r[k][j]) r[i][j] = true;
  return r;
}

ingest::CanonicalEvent ev(std::uint64_t seq, std::int64_t pid, std::string object = "obj") {
  ingest::CanonicalEvent e;
  e.seq_id = seq;
  e.timestamp = static_cast<std::int64_t>(seq) * 10;
  e.subject = "x.exe";
  e.subject_pid = pid;
  e.action = "op";
  e.object = std::move(object);
  return e;
}

AbilityInstance inst(std::string ability, std::int64_t t0, std::int64_t t1, std::set<std::string> ents) {
  AbilityInstance a;
  a.ability = std::move(ability);
  a.first_seq = static_cast<std::uint64_t>(t0);
  a.last_seq = static_cast<std::uint64_t>(t1);
  a.t_start = t0;
  a.t_end = t1;
  a.entities = std::move(ents);
  return a;
}

}  // namespace

TEST(Graph, SpansFromTags) {
  tagger::LabelSet l({"PA", "RK"});
  std::vector<ingest::CanonicalEvent> events{ev(1, 1), ev(2, 1), ev(3, 1), ev(4, 1)};
  auto s = spans_from_tags({1, 2, 0, 3}, events, l);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].ability, "PA");
  EXPECT_EQ(s[0].first_seq, 1u);
  EXPECT_EQ(s[0].last_seq, 2u);
  EXPECT_EQ(s[1].ability, "RK");
  EXPECT_EQ(s[1].first_seq, 4u);
  EXPECT_TRUE(spans_from_tags({0, 0, 0, 0}, events, l).empty());
  auto orphan = spans_from_tags({2, 2}, {ev(1, 1), ev(2, 1)}, l);
  ASSERT_EQ(orphan.size(), 1u);
  EXPECT_EQ(orphan[0].last_seq, 2u);
  // B directly after B starts a new instance.
  EXPECT_EQ(spans_from_tags({1, 1}, {ev(1, 1), ev(2, 1)}, l).size(), 2u);
  EXPECT_THROW(spans_from_tags({0}, events, l), Error);
}

TEST(Graph, EdgeRules) {
  auto g = build_ability_graph({inst("PA", 0, 5, {"pid:5216"}), inst("RK", 6, 9, {"pid:5216", "a"})});
  EXPECT_EQ(g.edges, (EdgeSet{{0, 1}}));
  auto overlap = build_ability_graph({inst("PA", 0, 7, {"pid:5216"}), inst("RK", 6, 9, {"pid:5216"})});
  EXPECT_TRUE(overlap.edges.empty());
  auto disjoint = build_ability_graph({inst("PA", 0, 5, {"a"}), inst("RK", 6, 9, {"b"})});
  EXPECT_TRUE(disjoint.edges.empty());
  auto one = build_ability_graph({inst("PA", 0, 5, {"a"})});
  EXPECT_EQ(one.node_count(), 1u);
  EXPECT_TRUE(one.edges.empty());
}

TEST(Graph, ReductionPreservesClosureAndIsMinimal) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    std::vector<AbilityInstance> v;
    for (std::size_t i = 0; i < n; ++i) {
      const auto t0 = static_cast<std::int64_t>(rng.below(30));
      std::set<std::string> ents;
      for (int e = 0; e < 2; ++e) ents.insert("e" + std::to_string(rng.below(3)));
      v.push_back(inst("A" + std::to_string(i), t0, t0 + static_cast<std::int64_t>(rng.below(5)), ents));
    }
    const auto full = build_ability_graph(v, false), reduced = build_ability_graph(v, true);
    EXPECT_EQ(full.labels, reduced.labels);
    for (auto [a, b] : full.edges) {
      EXPECT_LE(full.instances[a].t_end, full.instances[b].t_start);
    }
    const auto want = closure(n, full.edges);
    EXPECT_EQ(closure(n, reduced.edges), want);
    for (const auto& e : reduced.edges) {
      auto fewer = reduced.edges;
      fewer.erase(e);
      EXPECT_NE(closure(n, fewer), want);
    }
  }
}

TEST(Graph, CampaignLoadAndErrors) {
  auto g = graph_from_json(pipeline::read_json(APTHUNT_DATA_DIR "/campaigns/higaisa.json"));
  EXPECT_EQ(g.labels, (std::vector<std::string>{"PA", "MFE", "RK", "SID", "SNCD", "MTOS", "ST"}));
  std::vector<int> stages;
  for (auto s : g.stages) stages.push_back(s.value_or(0));
  EXPECT_EQ(stages, (std::vector<int>{1, 2, 6, 4, 4, 6, 6}));
  EXPECT_EQ(g.kind, GraphKind::Campaign);
  EXPECT_EQ(graph_from_json(nlohmann::json::parse(to_json(g).dump())), g);

  nlohmann::json bad = {{"name", "x"}, {"nodes", nlohmann::json::array()}, {"edges", nlohmann::json::array()}};
  EXPECT_THROW(graph_from_json(bad), SchemaError);
  bad["nodes"] = {{{"ability", "PA"}}};
  bad["edges"] = nlohmann::json::array({nlohmann::json::array({0, 3})});
  try {
    graph_from_json(bad);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.path(), "/edges/0/1");
  }
  bad["edges"] = nlohmann::json::array();
  tagger::LabelSet only_rk({"RK"});
  try {
    graph_from_json(bad, &only_rk);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownAbility);
  }
}

TEST(Graph, DetectedRoundTrip) {
  tagger::LabelSet l({"PA", "RK"});
  std::vector<ingest::CanonicalEvent> events{ev(1, 5), ev(2, 5), ev(3, 5), ev(4, 5)};
  auto g = build_ability_graph(spans_from_tags({1, 2, 3, 4}, events, l));
  EXPECT_EQ(g.edges, (EdgeSet{{0, 1}}));
  EXPECT_EQ(graph_from_json(nlohmann::json::parse(to_json(g).dump())), g);
}

TEST(Graph, AllShippedCampaignsLoad) {
  auto all = pipeline::load_campaigns(APTHUNT_DATA_DIR "/campaigns");
  ASSERT_EQ(all.size(), 5u);
  for (const auto& g : all) {
    EXPECT_GE(g.node_count(), 1u);
    EXPECT_EQ(g.edges.size(), g.node_count() - 1);
  }
}
