// SPDX-License-Identifier: Apache-2.0
//
// Ability graphs. Detected graphs come from BIO2 tag spans; campaign graphs
// are curated JSON documents:
//
//   {"name": str, "nodes": [{"ability": str, "stage": 1-7}], "edges": [[i, j], ...]}

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "apthunt/crf.hpp"
#include "apthunt/error.hpp"
#include "apthunt/ingest.hpp"
#include "apthunt/tagger.hpp"

namespace apthunt::graph {

struct AbilityInstance {
  std::string ability;
  std::uint64_t first_seq = 0;
  std::uint64_t last_seq = 0;
  std::set<std::string> entities;
  std::int64_t t_start = 0;
  std::int64_t t_end = 0;

  friend bool operator==(const AbilityInstance&, const AbilityInstance&) = default;
};

enum class GraphKind { Detected, Campaign };

struct AbilityGraph {
  std::string name;
  GraphKind kind = GraphKind::Campaign;
  std::vector<std::string> labels;       // ability per node
  std::vector<std::optional<int>> stages;  // lifecycle stage 1-7 per node
  std::vector<AbilityInstance> instances;  // detected graphs only, aligned with labels
  std::set<std::pair<std::size_t, std::size_t>> edges;

  std::size_t node_count() const { return labels.size(); }
  std::size_t node_edge_count() const { return labels.size() + edges.size(); }

  friend bool operator==(const AbilityGraph&, const AbilityGraph&) = default;
};

/// Entity keys of one event: lowercase subject, "pid:<n>", lowercase object.
inline std::vector<std::string> entity_keys(const ingest::CanonicalEvent& e) {
  std::vector<std::string> keys;
  keys.push_back(ingest::detail::lower(e.subject));
  keys.push_back("pid:" + std::to_string(e.subject_pid));
  if (!e.object.empty()) keys.push_back(ingest::detail::lower(e.object));
  return keys;
}

/// Maximal runs B-a (I-a)* become one instance. An I-a that does not
/// continue an a-run opens a new instance.
inline std::vector<AbilityInstance> spans_from_tags(const std::vector<std::size_t>& tags,
                                                    const std::vector<ingest::CanonicalEvent>& events,
                                                    const tagger::LabelSet& labels) {
  if (tags.size() != events.size())
    throw Error(ErrorKind::AlignmentMismatch,
                std::to_string(tags.size()) + " tags for " + std::to_string(events.size()) + " events");
  std::vector<AbilityInstance> out;
  std::optional<std::size_t> open;  // ability index of the run in progress
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const auto ability = tagger::LabelSet::ability_of(tags[t]);
    if (!ability) {
      open.reset();
      continue;
    }
    const auto& e = events[t];
    const bool extend = open && *open == *ability && !tagger::LabelSet::is_begin(tags[t]);
    if (!extend) {
      AbilityInstance inst;
      inst.ability = labels.abilities().at(*ability);
      inst.first_seq = e.seq_id;
      inst.t_start = e.timestamp;
      out.push_back(std::move(inst));
      open = ability;
    }
    auto& inst = out.back();
    inst.last_seq = e.seq_id;
    inst.t_start = std::min(inst.t_start, e.timestamp);
    inst.t_end = std::max(inst.t_end, e.timestamp);
    for (auto& k : entity_keys(e)) inst.entities.insert(std::move(k));
  }
  return out;
}

/// Same as above for events whose `label` field carries the BIO2 tag.
inline std::vector<AbilityInstance> spans_from_labeled_events(const std::vector<ingest::CanonicalEvent>& events,
                                                              const tagger::LabelSet& labels) {
  std::vector<std::size_t> tags;
  tags.reserve(events.size());
  for (const auto& e : events) tags.push_back(labels.tag_index(e.label.value_or("O")));
  return spans_from_tags(tags, events, labels);
}

namespace detail {

/// i precedes j when i ends no later than j starts, with seq_id breaking
/// timestamp ties, so precedence is acyclic.
inline bool precedes(const AbilityInstance& a, const AbilityInstance& b) {
  return a.t_end <= b.t_start && std::pair(a.t_end, a.last_seq) < std::pair(b.t_start, b.first_seq);
}

inline bool share_entity(const AbilityInstance& a, const AbilityInstance& b) {
  auto ia = a.entities.begin();
  auto ib = b.entities.begin();
  while (ia != a.entities.end() && ib != b.entities.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) ++ia; else ++ib;
  }
  return false;
}

}  // namespace detail

/// Removes every edge implied by a longer path. The graph must be acyclic.
inline std::set<std::pair<std::size_t, std::size_t>> transitive_reduction(
    std::size_t n, const std::set<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> succ(n);
  for (auto [i, j] : edges) succ[i].push_back(j);
  // reach[i][j]: j reachable from i by a path of length >= 1
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> stack(succ[s].begin(), succ[s].end());
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      if (reach[s][v]) continue;
      reach[s][v] = true;
      for (std::size_t w : succ[v]) stack.push_back(w);
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (auto [i, j] : edges) {
    bool implied = false;
    for (std::size_t m : succ[i]) {
      if (m != j && reach[m][j]) {
        implied = true;
        break;
      }
    }
    if (!implied) out.emplace(i, j);
  }
  return out;
}

/// Nodes are ordered by (t_start, first_seq). Edge i -> j when i precedes
/// j in time and the two share at least one entity key.
inline AbilityGraph build_ability_graph(std::vector<AbilityInstance> instances, bool reduce = true) {
  std::sort(instances.begin(), instances.end(), [](const AbilityInstance& a, const AbilityInstance& b) {
    return std::tie(a.t_start, a.first_seq, a.last_seq, a.ability) <
           std::tie(b.t_start, b.first_seq, b.last_seq, b.ability);
  });
  AbilityGraph g;
  g.name = "detected";
  g.kind = GraphKind::Detected;
  for (const auto& inst : instances) {
    g.labels.push_back(inst.ability);
    g.stages.emplace_back();
  }
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (std::size_t j = 0; j < instances.size(); ++j)
      if (i != j && detail::precedes(instances[i], instances[j]) && detail::share_entity(instances[i], instances[j]))
        g.edges.emplace(i, j);
  g.instances = std::move(instances);
  if (reduce) g.edges = transitive_reduction(g.node_count(), g.edges);
  return g;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const AbilityGraph& g) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    nlohmann::json node{{"ability", g.labels[i]}};
    if (g.stages[i]) node["stage"] = *g.stages[i];
    if (g.kind == GraphKind::Detected && i < g.instances.size()) {
      const auto& inst = g.instances[i];
      node["span"] = {inst.first_seq, inst.last_seq};
      node["t_start"] = inst.t_start;
      node["t_end"] = inst.t_end;
      node["entities"] = std::vector<std::string>(inst.entities.begin(), inst.entities.end());
    }
    nodes.push_back(std::move(node));
  }
  nlohmann::json edges = nlohmann::json::array();
  for (auto [i, j] : g.edges) edges.push_back({i, j});
  return {{"name", g.name},
          {"kind", g.kind == GraphKind::Detected ? "detected" : "campaign"},
          {"nodes", std::move(nodes)},
          {"edges", std::move(edges)}};
}

/// Loads either kind of graph. Detected graphs may have zero nodes;
/// campaign graphs must have at least one. When `labels` is given every
/// ability must belong to it.
inline AbilityGraph graph_from_json(const nlohmann::json& j, const tagger::LabelSet* labels = nullptr) {
  if (!j.is_object()) throw SchemaError("/", "expected object");
  AbilityGraph g;
  const auto& name = require_field(j, "name", "");
  if (!name.is_string()) throw SchemaError("/name", "expected string");
  g.name = name.get<std::string>();
  g.kind = GraphKind::Campaign;
  if (auto it = j.find("kind"); it != j.end()) {
    if (*it == "detected") g.kind = GraphKind::Detected;
    else if (*it != "campaign") throw SchemaError("/kind", "expected \"campaign\" or \"detected\"");
  }

  const auto& nodes = require_field(j, "nodes", "");
  if (!nodes.is_array()) throw SchemaError("/nodes", "expected array");
  if (nodes.empty() && g.kind == GraphKind::Campaign) throw SchemaError("/nodes", "campaign graph has no nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "/nodes/" + std::to_string(i);
    const auto& node = nodes[i];
    const auto& ability = require_field(node, "ability", path);
    if (!ability.is_string() || ability.get<std::string>().empty())
      throw SchemaError(path + "/ability", "expected nonempty string");
    const std::string label = ability.get<std::string>();
    if (labels && !labels->ability_index(label))
      throw Error(ErrorKind::UnknownAbility, path + "/ability: '" + label + "' not in label set");
    g.labels.push_back(label);
    std::optional<int> stage;
    if (auto it = node.find("stage"); it != node.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<int>() < 1 || it->get<int>() > 7)
        throw SchemaError(path + "/stage", "expected integer 1-7");
      stage = it->get<int>();
    }
    g.stages.push_back(stage);
    if (g.kind == GraphKind::Detected && node.contains("span")) {
      AbilityInstance inst;
      inst.ability = label;
      const auto& span = node["span"];
      if (!span.is_array() || span.size() != 2) throw SchemaError(path + "/span", "expected [first, last]");
      inst.first_seq = span[0].get<std::uint64_t>();
      inst.last_seq = span[1].get<std::uint64_t>();
      inst.t_start = node.value("t_start", std::int64_t{0});
      inst.t_end = node.value("t_end", std::int64_t{0});
      for (const auto& e : node.value("entities", nlohmann::json::array())) inst.entities.insert(e.get<std::string>());
      g.instances.push_back(std::move(inst));
    }
  }
  if (!g.instances.empty() && g.instances.size() != g.labels.size())
    throw SchemaError("/nodes", "span metadata present on some detected nodes but not all");

  const auto& edges = require_field(j, "edges", "");
  if (!edges.is_array()) throw SchemaError("/edges", "expected array");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string path = "/edges/" + std::to_string(e);
    const auto& pair = edges[e];
    if (!pair.is_array() || pair.size() != 2) throw SchemaError(path, "expected [i, j]");
    for (int s = 0; s < 2; ++s) {
      if (!pair[s].is_number_integer() || pair[s].get<std::int64_t>() < 0 ||
          pair[s].get<std::size_t>() >= g.node_count())
        throw SchemaError(path + "/" + std::to_string(s), "node index out of range");
    }
    const auto i = pair[0].get<std::size_t>(), k = pair[1].get<std::size_t>();
    if (i == k) throw SchemaError(path, "self-loop");
    g.edges.emplace(i, k);
  }
  return g;
}

}  // namespace apthunt::graph
