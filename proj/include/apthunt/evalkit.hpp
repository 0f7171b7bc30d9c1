// SPDX-License-Identifier: Apache-2.0
//
// Event-level macro metrics and the synthetic scenario generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "apthunt/error.hpp"
#include "apthunt/graph.hpp"
#include "apthunt/ingest.hpp"
#include "apthunt/random.hpp"
#include "apthunt/tagger.hpp"
#include "apthunt/templates.hpp"

namespace apthunt::evalkit {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold events
  std::size_t predicted = 0;  // predicted events

  friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricReport {
  std::map<std::string, ClassMetrics> per_class;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Core: one optional class name per event (nullopt is O).
inline MetricReport macro_prf(const std::vector<std::optional<std::string>>& pred,
                              const std::vector<std::optional<std::string>>& gold) {
  if (pred.size() != gold.size())
    throw Error(ErrorKind::AlignmentMismatch,
                std::to_string(pred.size()) + " predictions for " + std::to_string(gold.size()) + " gold labels");
  struct Counts {
    std::size_t tp = 0, gold = 0, pred = 0;
  };
  std::map<std::string, Counts> counts;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i]) ++counts[*gold[i]].gold;
    if (pred[i]) ++counts[*pred[i]].pred;
    if (gold[i] && pred[i] && *gold[i] == *pred[i]) ++counts[*gold[i]].tp;
  }
  MetricReport r;
  for (const auto& [name, c] : counts) {
    ClassMetrics m;
    m.support = c.gold;
    m.predicted = c.pred;
    m.precision = c.pred ? static_cast<double>(c.tp) / static_cast<double>(c.pred) : 0.0;
    m.recall = c.gold ? static_cast<double>(c.tp) / static_cast<double>(c.gold) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.precision += m.precision;
    r.recall += m.recall;
    r.f1 += m.f1;
    r.per_class.emplace(name, m);
  }
  if (!r.per_class.empty()) {
    const auto n = static_cast<double>(r.per_class.size());
    r.precision /= n;
    r.recall /= n;
    r.f1 /= n;
  }
  return r;
}

/// Tag indices under `labels`; B-a and I-a fold to a.
inline MetricReport macro_prf(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& gold,
                              const tagger::LabelSet& labels) {
  auto fold = [&](const std::vector<std::size_t>& tags) {
    std::vector<std::optional<std::string>> out;
    out.reserve(tags.size());
    for (std::size_t t : tags) {
      if (t >= labels.tag_count()) throw Error(ErrorKind::UnknownAbility, "tag index " + std::to_string(t));
      auto a = tagger::LabelSet::ability_of(t);
      out.push_back(a ? std::optional<std::string>(labels.abilities()[*a]) : std::nullopt);
    }
    return out;
  };
  return macro_prf(fold(pred), fold(gold));
}

/// BIO2 strings; no label set needed.
inline std::optional<std::string> fold_tag(std::string_view tag) {
  if (tag == "O" || tag.empty()) return std::nullopt;
  if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') return std::string(tag.substr(2));
  throw Error(ErrorKind::UnknownAbility, "malformed tag '" + std::string(tag) + "'");
}

inline MetricReport macro_prf(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  std::vector<std::optional<std::string>> p, g;
  for (const auto& t : pred) p.push_back(fold_tag(t));
  for (const auto& t : gold) g.push_back(fold_tag(t));
  return macro_prf(p, g);
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, m] : r.per_class)
    per[name] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                 {"support", m.support}, {"predicted", m.predicted}};
  return {{"per_class", std::move(per)},
          {"macro", {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}}}};
}

/// Aligned plain-text table: one row per named report plus an Avg. row.
inline std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t width = 8;  // "Campaign"
  for (const auto& [name, r] : rows) width = std::max(width, name.size());
  auto line = [&](const std::string& name, double p, double rc, double f) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "  %6.2f  %6.2f  %6.2f\n", 100.0 * p, 100.0 * rc, 100.0 * f);
    return name + std::string(width - name.size(), ' ') + buf;
  };
  std::string out = "Campaign" + std::string(width - 8, ' ') + "       P       R      F1\n";
  double p = 0, rc = 0, f = 0;
  for (const auto& [name, r] : rows) {
    out += line(name, r.precision, r.recall, r.f1);
    p += r.precision;
    rc += r.recall;
    f += r.f1;
  }
  if (!rows.empty()) {
    const auto n = static_cast<double>(rows.size());
    out += line("Avg.", p / n, rc / n, f / n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario generator

struct ScenarioSpec {
  graph::AbilityGraph campaign;
  std::size_t benign_event_count = 10000;
  double malicious_rate = 0.01;
  std::uint64_t seed = 0;
  templates::TemplateLibrary templates = templates::builtin();
};

struct Scenario {
  std::vector<ingest::CanonicalEvent> events;  // gold BIO2 tags in `label`
  graph::AbilityGraph ground_truth;
};

/// Abilities of a campaign in first-appearance order, without repeats.
inline tagger::LabelSet campaign_labels(const graph::AbilityGraph& g) {
  std::vector<std::string> out;
  for (const auto& a : g.labels)
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return tagger::LabelSet(std::move(out));
}

namespace detail {

inline const std::vector<std::string>& words() {
  static const std::vector<std::string> w{"budget", "minutes", "roadmap", "invoice", "draft",  "summary",
                                          "review", "project", "payroll", "notes",   "design", "plan",
                                          "report", "meeting", "contract", "travel", "sales",  "audit"};
  return w;
}

struct ScenarioVars {
  std::string user, drop, c2, task, lan, sid;
};

inline std::string hex(Rng& rng, int digits) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string s;
  for (int i = 0; i < digits; ++i) s += kHex[rng.below(16)];
  return s;
}

inline ScenarioVars draw_vars(Rng& rng) {
  static const std::vector<std::string> users{"alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi"};
  static const std::vector<std::string> drops{"officeupdate", "msupdater", "igfxtray32", "wincheck",
                                              "adobearm64", "javaupd",  "onedrivesync", "svcmon"};
  static const std::vector<std::string> c2s{"cdn-static-update.com", "mail-verify.net", "api-telemetry.org",
                                            "docs-share.info", "cloud-sync-svc.com"};
  ScenarioVars v;
  v.user = users[rng.below(users.size())];
  v.drop = drops[rng.below(drops.size())];
  v.c2 = c2s[rng.below(c2s.size())];
  v.task = "Microsoft\\Windows\\" + words()[rng.below(words().size())] + "Sync";
  v.lan = "ws-" + hex(rng, 4) + ".corp.local";
  v.sid = "S-1-5-21-" + std::to_string(1000000 + rng.below(9000000)) + "-" + std::to_string(1000 + rng.below(9000));
  return v;
}

inline std::string expand(const std::string& pattern, const ScenarioVars& v, Rng& rng) {
  static const std::vector<std::string> avs{"Windows Defender", "ESET", "Kaspersky Lab", "Symantec", "McAfee"};
  std::string out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    const auto close = pattern.find('}', i);
    if (pattern[i] != '{' || close == std::string::npos) {
      out += pattern[i++];
      continue;
    }
    const std::string key = pattern.substr(i + 1, close - i - 1);
    if (key == "user") out += v.user;
    else if (key == "drop") out += v.drop;
    else if (key == "c2") out += v.c2;
    else if (key == "task") out += v.task;
    else if (key == "sid") out += v.sid;
    else if (key == "lan") out += v.lan + ":" + std::to_string(49152 + rng.below(16000));
    else if (key == "hex") out += hex(rng, 8);
    else if (key == "num") out += std::to_string(1 + rng.below(9999));
    else if (key == "word") out += words()[rng.below(words().size())];
    else if (key == "o") out += std::to_string(1 + rng.below(254));
    else if (key == "av") out += avs[rng.below(avs.size())];
    else if (key == "ip")
      out += std::to_string(20 + rng.below(200)) + "." + std::to_string(rng.below(256)) + "." +
             std::to_string(rng.below(256)) + "." + std::to_string(1 + rng.below(254));
    else {
      out += pattern.substr(i, close - i + 1);  // unknown placeholders stay literal
    }
    i = close + 1;
  }
  return out;
}

/// Kahn's algorithm, smallest index first.
inline std::vector<std::size_t> topological_order(const graph::AbilityGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::size_t> indeg(n, 0);
  for (auto [i, j] : g.edges) ++indeg[j];
  std::set<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.insert(v);
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (auto [i, j] : g.edges)
      if (i == v && --indeg[j] == 0) ready.insert(j);
  }
  if (order.size() != n) throw Error(ErrorKind::InvalidArgument, "campaign graph '" + g.name + "' has a cycle");
  return order;
}

}  // namespace detail

/// All malicious events run under one implant PID, so consecutive ability
/// blocks share an entity and the ground-truth graph reduces to the chain of
/// blocks in topological order. Campaign graphs that are not chains are
/// rejected after generation.
inline Scenario generate_scenario(const ScenarioSpec& spec) {
  const auto& campaign = spec.campaign;
  if (!(spec.malicious_rate > 0.0 && spec.malicious_rate < 1.0))
    throw Error(ErrorKind::InvalidArgument, "malicious_rate must lie in (0, 1)");
  if (campaign.node_count() == 0) throw Error(ErrorKind::InvalidArgument, "campaign graph has no nodes");
  if (spec.templates.benign.empty()) throw Error(ErrorKind::TemplateMissing, "no benign templates");
  for (const auto& a : campaign.labels) {
    auto it = spec.templates.abilities.find(a);
    if (it == spec.templates.abilities.end() || it->second.empty())
      throw Error(ErrorKind::TemplateMissing, "no templates for ability '" + a + "'");
  }
  const auto order = detail::topological_order(campaign);
  const std::size_t blocks = order.size();
  const double benign = static_cast<double>(spec.benign_event_count);
  const auto malicious = std::max<std::size_t>(
      blocks, static_cast<std::size_t>(std::llround(spec.malicious_rate * benign / (1.0 - spec.malicious_rate))));
  const double realized = static_cast<double>(malicious) / (benign + static_cast<double>(malicious));
  if (std::abs(realized - spec.malicious_rate) > 0.2 * spec.malicious_rate)
    throw Error(ErrorKind::InvalidArgument, "cannot realize malicious_rate " + std::to_string(spec.malicious_rate) +
                                                " with " + std::to_string(blocks) + " ability blocks and " +
                                                std::to_string(spec.benign_event_count) + " benign events");

  Rng rng(spec.seed);
  const auto vars = detail::draw_vars(rng);

  // Block b is inserted before benign event at[b]; positions ascend.
  std::vector<std::size_t> at(blocks);
  for (auto& p : at) p = static_cast<std::size_t>(rng.below(spec.benign_event_count + 1));
  std::sort(at.begin(), at.end());

  std::map<std::string, std::int64_t> pids;  // benign PID per image name
  std::set<std::int64_t> used;
  auto fresh_pid = [&] {
    for (;;) {
      const auto pid = static_cast<std::int64_t>(4 * (100 + rng.below(15000)));
      if (used.insert(pid).second) return pid;
    }
  };
  const std::int64_t implant = fresh_pid();

  Scenario s;
  s.events.reserve(spec.benign_event_count + malicious);
  std::int64_t clock = 9LL * 3600 * 1000000 + static_cast<std::int64_t>(rng.below(1000000));
  auto emit = [&](const templates::EventTemplate& t, std::int64_t pid, std::optional<std::string> label) {
    ingest::CanonicalEvent e;
    e.seq_id = s.events.size() + 1;
    clock += 1 + static_cast<std::int64_t>(rng.below(50000));
    e.timestamp = clock;
    e.subject = detail::expand(t.subject, vars, rng);
    e.subject_pid = pid;
    e.action = t.action;
    e.object = detail::expand(t.object, vars, rng);
    e.result = "SUCCESS";
    e.label = std::move(label);
    s.events.push_back(std::move(e));
  };
  auto emit_block = [&](std::size_t b) {
    const std::string& ability = campaign.labels[order[b]];
    const auto& list = spec.templates.abilities.at(ability);
    const std::size_t len = malicious / blocks + (b < malicious % blocks ? 1 : 0);
    for (std::size_t i = 0; i < len; ++i) {
      const auto& t = (i == 0 || list.size() == 1) ? list[0] : list[1 + (i - 1) % (list.size() - 1)];
      emit(t, implant, (i == 0 ? "B-" : "I-") + ability);
    }
  };
  std::size_t next = 0;
  for (std::size_t k = 0; k <= spec.benign_event_count; ++k) {
    while (next < blocks && at[next] == k) emit_block(next++);
    if (k == spec.benign_event_count) break;
    const auto& t = spec.templates.benign[rng.below(spec.templates.benign.size())];
    auto it = pids.find(t.subject);
    if (it == pids.end()) it = pids.emplace(t.subject, fresh_pid()).first;
    emit(t, it->second, "O");
  }

  const auto labels = campaign_labels(campaign);
  auto gt = graph::build_ability_graph(graph::spans_from_labeled_events(s.events, labels));
  // Detected node b corresponds to campaign node order[b].
  std::set<std::pair<std::size_t, std::size_t>> mapped;
  for (auto [i, j] : gt.edges) mapped.emplace(order.at(i), order.at(j));
  if (gt.node_count() != blocks || mapped != campaign.edges)
    throw Error(ErrorKind::InvalidArgument,
                "campaign graph '" + campaign.name + "' is not a chain; the generator cannot realize its edges");
  s.ground_truth.name = campaign.name;
  s.ground_truth.kind = graph::GraphKind::Campaign;
  s.ground_truth.labels = gt.labels;
  for (std::size_t b = 0; b < blocks; ++b) s.ground_truth.stages.push_back(campaign.stages[order[b]]);
  s.ground_truth.edges = gt.edges;
  return s;
}

}  // namespace apthunt::evalkit
