// SPDX-License-Identifier: Apache-2.0
//
// Exact graph edit distance between ability graphs by A* over partial node
// assignments, its node+edge normalization, and campaign ranking.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "apthunt/error.hpp"
#include "apthunt/graph.hpp"

namespace apthunt::matcher {

/// Edit costs. Nodes substitute at node_sub unless labels match (then 0).
/// Edges carry no labels, so an edge mapped onto an edge never pays
/// edge_sub; the field exists for labeled-edge schemes.
struct CostScheme {
  double node_sub = 1.0;
  double node_ins = 1.0;
  double node_del = 1.0;
  double edge_sub = 1.0;
  double edge_ins = 1.0;
  double edge_del = 1.0;

  void validate() const {
    for (double c : {node_sub, node_ins, node_del, edge_sub, edge_ins, edge_del})
      if (!(c >= 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "edit costs must be finite and >= 0");
  }

  double substitute(const std::string& a, const std::string& b) const { return a == b ? 0.0 : node_sub; }
};

struct GedResult {
  double raw = 0.0;
  double normalized = 0.0;
  std::vector<std::optional<std::size_t>> mapping;  // query node -> campaign node, nullopt = deleted
  std::size_t expanded_states = 0;
  std::vector<std::string> warnings;
};

/// Thrown when A* exhausts its expansion budget; carries an upper bound
/// obtained from a greedy completion.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(double upper_bound, std::size_t expanded)
      : Error(ErrorKind::BudgetExceeded, "GED search exceeded " + std::to_string(expanded) +
                                             " expansions; best upper bound " + std::to_string(upper_bound)),
        upper_bound_(upper_bound), expanded_(expanded) {}

  double upper_bound() const noexcept { return upper_bound_; }
  std::size_t expanded() const noexcept { return expanded_; }

 private:
  double upper_bound_;
  std::size_t expanded_;
};

/// raw / max(|V|+|E|) over the two graphs; 0 when both are empty.
inline double ged_normalized(double raw, const graph::AbilityGraph& gq, const graph::AbilityGraph& gc) {
  const std::size_t denom = std::max(gq.node_edge_count(), gc.node_edge_count());
  return denom == 0 ? 0.0 : raw / static_cast<double>(denom);
}

namespace detail {

constexpr int kDeleted = -1;

class GedSearch {
 public:
  GedSearch(const graph::AbilityGraph& gq, const graph::AbilityGraph& gc, const CostScheme& costs)
      : gq_(gq), gc_(gc), costs_(costs), nq_(gq.node_count()), nc_(gc.node_count()),
        adj_q_(nq_ * nq_, 0), adj_c_(nc_ * nc_, 0) {
    for (auto [i, j] : gq.edges) adj_q_[i * nq_ + j] = 1;
    for (auto [i, j] : gc.edges) adj_c_[i * nc_ + j] = 1;

    // Intern labels so the multiset bound works on small integer ids.
    std::map<std::string, int> ids;
    auto intern = [&](const std::string& s) { return ids.emplace(s, static_cast<int>(ids.size())).first->second; };
    for (const auto& l : gq.labels) label_q_.push_back(intern(l));
    for (const auto& l : gc.labels) label_c_.push_back(intern(l));
    label_count_ = ids.size();

    // Query nodes in decreasing degree so edge costs surface early.
    std::vector<std::size_t> degree(nq_, 0);
    for (auto [i, j] : gq.edges) {
      ++degree[i];
      ++degree[j];
    }
    order_.resize(nq_);
    for (std::size_t i = 0; i < nq_; ++i) order_[i] = i;
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return degree[a] > degree[b]; });

    // Query edges whose endpoints are both among the first d ordered nodes.
    std::vector<std::size_t> position(nq_);
    for (std::size_t d = 0; d < nq_; ++d) position[order_[d]] = d;
    q_decided_.assign(nq_ + 1, 0);
    for (auto [i, j] : gq.edges) ++q_decided_[std::max(position[i], position[j]) + 1];
    for (std::size_t d = 1; d <= nq_; ++d) q_decided_[d] += q_decided_[d - 1];
  }

  GedResult run(std::size_t budget) {
    nodes_.clear();
    nodes_.push_back({kNoParent, kDeleted, 0, 0, 0.0, 0.0});
    load(0);
    nodes_[0].h = heuristic(0, 0);

    const double upper = greedy_upper_bound();
    constexpr double kSlack = 1e-9;

    std::priority_queue<QueueItem, std::vector<QueueItem>, std::greater<>> open;
    open.push({nodes_[0].g + nodes_[0].h, 0L, std::size_t{0}});
    std::size_t expanded = 0;

    while (!open.empty()) {
      const auto [f, neg_depth, id] = open.top();
      open.pop();
      if (nodes_[id].depth == nq_) return finish(id, expanded);
      if (expanded >= budget) throw BudgetExceeded(upper, expanded);
      ++expanded;

      load(id);
      const Node parent = nodes_[id];
      for (int t = 0; t <= static_cast<int>(nc_); ++t) {
        const int target = t == static_cast<int>(nc_) ? kDeleted : t;
        if (target != kDeleted && used_[static_cast<std::size_t>(target)]) continue;
        Node child = extend(parent, id, target);
        const double cf = child.g + child.h;
        if (cf > upper + kSlack) continue;
        nodes_.push_back(child);
        open.push({cf, -static_cast<long>(child.depth), nodes_.size() - 1});
      }
    }
    // Unreachable: the greedy completion itself is always within the bound.
    throw BudgetExceeded(upper, expanded);
  }

 private:
  static constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

  // Search node: the assignment of query node order_[depth - 1] plus a
  // parent link. Full assignments are rebuilt on demand by load().
  struct Node {
    std::size_t parent;
    int target;
    std::size_t depth;
    std::size_t c_decided;  // campaign edges with both endpoints used
    double g;
    double h;
  };
  using QueueItem = std::tuple<double, long, std::size_t>;

  bool q_edge(std::size_t a, std::size_t b) const { return adj_q_[a * nq_ + b] != 0; }
  bool c_edge(int a, int b) const {
    return a >= 0 && b >= 0 && adj_c_[static_cast<std::size_t>(a) * nc_ + static_cast<std::size_t>(b)] != 0;
  }

  double edge_pair_cost(bool in_q, bool in_c) const {
    if (in_q && !in_c) return costs_.edge_del;
    if (!in_q && in_c) return costs_.edge_ins;
    return 0.0;
  }

  /// Fills assign_ (by query node) and used_ from the path to `id`.
  void load(std::size_t id) {
    assign_.assign(nq_, kDeleted);
    used_.assign(nc_, 0);
    for (std::size_t n = id; nodes_[n].parent != kNoParent; n = nodes_[n].parent) {
      const Node& node = nodes_[n];
      assign_[order_[node.depth - 1]] = node.target;
      if (node.target != kDeleted) used_[static_cast<std::size_t>(node.target)] = 1;
    }
  }

  /// Child of the loaded node `parent` placing the next query node on `target`.
  Node extend(const Node& parent, std::size_t parent_id, int target) const {
    Node s{parent_id, target, parent.depth + 1, parent.c_decided, parent.g, 0.0};
    const std::size_t u = order_[parent.depth];
    if (target == kDeleted)
      s.g += costs_.node_del;
    else
      s.g += costs_.substitute(gq_.labels[u], gc_.labels[static_cast<std::size_t>(target)]);
    for (std::size_t d = 0; d < parent.depth; ++d) {
      const std::size_t v = order_[d];
      const int tv = assign_[v];
      s.g += edge_pair_cost(q_edge(u, v), c_edge(target, tv));
      s.g += edge_pair_cost(q_edge(v, u), c_edge(tv, target));
      if (target != kDeleted && tv != kDeleted) s.c_decided += c_edge(target, tv) + c_edge(tv, target);
    }
    s.h = heuristic(s.depth, s.c_decided, target);
    return s;
  }

  /// Admissible bound: optimal label-multiset node assignment plus the
  /// surplus of undecided edges on either side. `extra` is a campaign node
  /// taken by the state beyond those marked in used_.
  double heuristic(std::size_t depth, std::size_t c_decided, int extra = kDeleted) const {
    std::vector<int> count_q(label_count_, 0), count_c(label_count_, 0);
    for (std::size_t d = depth; d < nq_; ++d) ++count_q[static_cast<std::size_t>(label_q_[order_[d]])];
    std::size_t rem_c = 0;
    for (std::size_t c = 0; c < nc_; ++c) {
      if (used_[c] || static_cast<int>(c) == extra) continue;
      ++count_c[static_cast<std::size_t>(label_c_[c])];
      ++rem_c;
    }
    std::size_t same = 0;
    for (std::size_t l = 0; l < label_count_; ++l) same += static_cast<std::size_t>(std::min(count_q[l], count_c[l]));
    const std::size_t a = (nq_ - depth) - same;
    const std::size_t b = rem_c - same;
    const std::size_t paired = std::min(a, b);
    const double sub = std::min(costs_.node_sub, costs_.node_del + costs_.node_ins);
    double h = static_cast<double>(paired) * sub + static_cast<double>(a - paired) * costs_.node_del +
               static_cast<double>(b - paired) * costs_.node_ins;

    const std::size_t eq = gq_.edges.size() - q_decided_[depth];
    const std::size_t ec = gc_.edges.size() - c_decided;
    h += eq > ec ? static_cast<double>(eq - ec) * costs_.edge_del : static_cast<double>(ec - eq) * costs_.edge_ins;
    return h;
  }

  /// Dives from the root always taking the cheapest child; the result is a
  /// complete assignment whose exact cost bounds the optimum from above.
  /// Leaves assign_/used_ in an unspecified state.
  double greedy_upper_bound() {
    Node s = nodes_[0];
    load(0);
    while (s.depth < nq_) {
      std::optional<Node> best;
      for (int t = 0; t <= static_cast<int>(nc_); ++t) {
        const int target = t == static_cast<int>(nc_) ? kDeleted : t;
        if (target != kDeleted && used_[static_cast<std::size_t>(target)]) continue;
        Node child = extend(s, kNoParent, target);
        if (!best || child.g + child.h < best->g + best->h) best = child;
      }
      assign_[order_[s.depth]] = best->target;
      if (best->target != kDeleted) used_[static_cast<std::size_t>(best->target)] = 1;
      s = *best;
    }
    return s.g + s.h;
  }

  GedResult finish(std::size_t id, std::size_t expanded) {
    load(id);
    GedResult r;
    r.raw = nodes_[id].g + nodes_[id].h;  // h is exact once every query node is placed
    r.normalized = ged_normalized(r.raw, gq_, gc_);
    r.expanded_states = expanded;
    r.mapping.resize(nq_);
    for (std::size_t u = 0; u < nq_; ++u)
      if (assign_[u] >= 0) r.mapping[u] = static_cast<std::size_t>(assign_[u]);
    return r;
  }

  const graph::AbilityGraph& gq_;
  const graph::AbilityGraph& gc_;
  CostScheme costs_;
  std::size_t nq_, nc_;
  std::vector<std::uint8_t> adj_q_, adj_c_;
  std::vector<int> label_q_, label_c_;
  std::size_t label_count_ = 0;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> q_decided_;
  std::vector<Node> nodes_;
  std::vector<int> assign_;
  std::vector<std::uint8_t> used_;
};

}  // namespace detail

/// Minimum-cost edit path from gq to gc. Edge (i, j) of gq matches only
/// edge (phi(i), phi(j)) of gc.
inline GedResult ged_exact(const graph::AbilityGraph& gq, const graph::AbilityGraph& gc,
                           const CostScheme& costs = {}, std::size_t budget = 1'000'000) {
  costs.validate();
  if (budget == 0) throw Error(ErrorKind::InvalidArgument, "GED budget must be >= 1");
  detail::GedSearch search(gq, gc, costs);
  GedResult r = search.run(budget);
  if (gq.node_count() > 0 && gc.node_count() > 0) {
    bool shared = false;
    for (const auto& l : gq.labels)
      if (std::find(gc.labels.begin(), gc.labels.end(), l) != gc.labels.end()) shared = true;
    if (!shared) r.warnings.push_back("IncompatibleLabelSets: graphs share no ability label");
  }
  return r;
}

struct RankEntry {
  std::string campaign;
  double raw = 0.0;
  double normalized = 0.0;
  std::size_t expanded_states = 0;
  bool exact = true;
};

/// Scores every campaign (concurrently) and orders ascending by normalized
/// GED, ties broken by campaign name. Campaigns whose search runs out of
/// budget are ranked by their upper bound and marked inexact.
inline std::vector<RankEntry> rank_campaigns(const graph::AbilityGraph& gq,
                                             const std::vector<graph::AbilityGraph>& campaigns,
                                             const CostScheme& costs = {}, std::size_t budget = 1'000'000) {
  if (campaigns.empty()) throw Error(ErrorKind::InvalidArgument, "campaign corpus is empty");
  costs.validate();
  std::vector<std::future<RankEntry>> jobs;
  jobs.reserve(campaigns.size());
  for (const auto& gc : campaigns) {
    jobs.push_back(std::async(std::launch::async, [&gq, &gc, &costs, budget] {
      RankEntry e;
      e.campaign = gc.name;
      try {
        auto r = ged_exact(gq, gc, costs, budget);
        e.raw = r.raw;
        e.expanded_states = r.expanded_states;
      } catch (const BudgetExceeded& ex) {
        e.raw = ex.upper_bound();
        e.expanded_states = ex.expanded();
        e.exact = false;
      }
      e.normalized = ged_normalized(e.raw, gq, gc);
      return e;
    }));
  }
  std::vector<RankEntry> out;
  for (auto& j : jobs) out.push_back(j.get());
  std::stable_sort(out.begin(), out.end(), [](const RankEntry& a, const RankEntry& b) {
    return std::tie(a.normalized, a.campaign) < std::tie(b.normalized, b.campaign);
  });
  return out;
}

inline nlohmann::json to_json(const std::vector<RankEntry>& ranking) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : ranking)
    out.push_back({{"campaign", e.campaign},
                   {"raw", e.raw},
                   {"normalized", e.normalized},
                   {"expanded_states", e.expanded_states},
                   {"exact", e.exact}});
  return out;
}

struct TopkCase {
  std::string truth;
  std::vector<std::string> ranked;
};

/// Fraction of cases whose true campaign appears among the first k names.
inline double topk_score(const std::vector<TopkCase>& cases, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (cases.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& c : cases) {
    const auto limit = std::min(k, c.ranked.size());
    if (std::find(c.ranked.begin(), c.ranked.begin() + static_cast<std::ptrdiff_t>(limit), c.truth) !=
        c.ranked.begin() + static_cast<std::ptrdiff_t>(limit))
      ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases.size());
}

}  // namespace apthunt::matcher
