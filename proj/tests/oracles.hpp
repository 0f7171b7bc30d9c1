// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used by unit and acceptance tests.
// None of these call into the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "apthunt/graph.hpp"
#include "apthunt/linalg.hpp"
#include "apthunt/matcher.hpp"
#include "apthunt/random.hpp"
#include "apthunt/tagger.hpp"

namespace oracle {

using apthunt::Matrix;
using apthunt::Vector;

// ---------------------------------------------------------------------------
// CRF by enumerating all K^T paths

struct CrfBrute {
  double log_z = 0.0;
  std::vector<std::size_t> best;
  double best_score = -std::numeric_limits<double>::infinity();
  Matrix unary;  // T x K marginals
};

inline double score(const Matrix& em, const Matrix& tr, std::span<const double> start, std::span<const double> end,
                    const std::vector<std::size_t>& y) {
  double s = start[y[0]] + end[y.back()];
  for (std::size_t t = 0; t < y.size(); ++t) {
    s += em(t, y[t]);
    if (t) s += tr(y[t - 1], y[t]);
  }
  return s;
}

inline CrfBrute crf_brute(const Matrix& em, const Matrix& tr, std::span<const double> start,
                          std::span<const double> end) {
  const std::size_t steps = em.rows(), k = em.cols();
  CrfBrute out;
  out.unary = Matrix(steps, k);
  std::vector<std::size_t> y(steps, 0);
  std::vector<double> scores;
  std::vector<std::vector<std::size_t>> paths;
  for (;;) {
    const double s = score(em, tr, start, end, y);
    scores.push_back(s);
    paths.push_back(y);
    if (s > out.best_score) {
      out.best_score = s;
      out.best = y;
    }
    std::size_t t = 0;
    while (t < steps && ++y[t] == k) y[t++] = 0;
    if (t == steps) break;
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - m);
  out.log_z = m + std::log(sum);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const double w = std::exp(scores[p] - out.log_z);
    for (std::size_t t = 0; t < steps; ++t) out.unary(t, paths[p][t]) += w;
  }
  return out;
}

inline Matrix random_matrix(apthunt::Rng& rng, std::size_t r, std::size_t c, double scale) {
  Matrix m(r, c);
  for (double& x : m.flat()) x = rng.uniform(-scale, scale);
  return m;
}

inline Vector random_vector(apthunt::Rng& rng, std::size_t n, double scale) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// ---------------------------------------------------------------------------
// GED by enumerating all injective partial node maps

inline double ged_brute(const apthunt::graph::AbilityGraph& q, const apthunt::graph::AbilityGraph& c,
                        const apthunt::matcher::CostScheme& cost = {}) {
  const std::size_t nq = q.node_count(), nc = c.node_count();
  std::vector<int> phi(nq, -1);
  std::vector<bool> used(nc, false);
  double best = std::numeric_limits<double>::infinity();

  auto evaluate = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < nq; ++i) {
      if (phi[i] < 0) s += cost.node_del;
      else if (q.labels[i] != c.labels[static_cast<std::size_t>(phi[i])]) s += cost.node_sub;
    }
    for (std::size_t j = 0; j < nc; ++j)
      if (!used[j]) s += cost.node_ins;
    std::set<std::pair<std::size_t, std::size_t>> hit;
    for (auto [a, b] : q.edges) {
      if (phi[a] >= 0 && phi[b] >= 0) {
        std::pair<std::size_t, std::size_t> img{static_cast<std::size_t>(phi[a]), static_cast<std::size_t>(phi[b])};
        if (c.edges.count(img)) {
          hit.insert(img);
          continue;
        }
      }
      s += cost.edge_del;
    }
    s += cost.edge_ins * static_cast<double>(c.edges.size() - hit.size());
    return s;
  };

  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == nq) {
      best = std::min(best, evaluate());
      return;
    }
    phi[i] = -1;
    rec(i + 1);
    for (std::size_t j = 0; j < nc; ++j) {
      if (used[j]) continue;
      used[j] = true;
      phi[i] = static_cast<int>(j);
      rec(i + 1);
      used[j] = false;
    }
    phi[i] = -1;
  };
  rec(0);
  return best;
}

/// Random directed graph over a small alphabet so that labels collide.
inline apthunt::graph::AbilityGraph random_graph(apthunt::Rng& rng, std::size_t max_nodes, const std::string& name,
                                                 std::size_t min_nodes = 0) {
  static const std::vector<std::string> alphabet{"PA", "RK", "SID", "MFE", "ST"};
  apthunt::graph::AbilityGraph g;
  g.name = name;
  const std::size_t n = min_nodes + rng.below(max_nodes - min_nodes + 1);
  for (std::size_t i = 0; i < n; ++i) {
    g.labels.push_back(alphabet[rng.below(alphabet.size())]);
    g.stages.emplace_back();
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && rng.uniform() < 0.3) g.edges.emplace(i, j);
  return g;
}

// ---------------------------------------------------------------------------
// Central finite differences over every tagger parameter tensor

struct TensorCheck {
  std::string name;
  double rel_error = 0.0;  // |analytic - numeric| / max(|analytic| + |numeric|, tiny), L2 over the tensor
};

inline std::vector<TensorCheck> gradient_check(const apthunt::tagger::BiGruCrfModel& model,
                                               const std::vector<Vector>& inputs,
                                               const std::vector<std::size_t>& gold, double eps = 1e-5) {
  const auto analytic = apthunt::tagger::nll_and_gradients(model, inputs, gold).gradients;
  std::vector<std::span<const double>> grads;
  apthunt::tagger::for_each_tensor(analytic, [&](const std::string&, std::span<const double> t) { grads.push_back(t); });

  auto work = model;
  std::vector<TensorCheck> out;
  std::size_t idx = 0;
  apthunt::tagger::for_each_tensor(work.params, [&](const std::string& name, std::span<double> t) {
    const auto g = grads[idx++];
    double diff = 0.0, mag = 0.0;
    for (std::size_t q = 0; q < t.size(); ++q) {
      const double keep = t[q];
      t[q] = keep + eps;
      const double up = apthunt::tagger::nll(work, inputs, gold);
      t[q] = keep - eps;
      const double down = apthunt::tagger::nll(work, inputs, gold);
      t[q] = keep;
      const double num = (up - down) / (2.0 * eps);
      diff += (num - g[q]) * (num - g[q]);
      mag += num * num + g[q] * g[q];
    }
    out.push_back({name, std::sqrt(diff) / std::max(std::sqrt(mag), 1e-12)});
  });
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form eigen pair of a symmetric 2x2 covariance

struct Pca2 {
  double lambda1, lambda2;
  double v1x, v1y;  // unit, first nonzero coordinate positive
};

inline Pca2 pca2(const std::vector<std::pair<double, double>>& pts) {
  const double n = static_cast<double>(pts.size());
  double mx = 0, my = 0;
  for (auto [x, y] : pts) mx += x, my += y;
  mx /= n, my /= n;
  double a = 0, b = 0, c = 0;
  for (auto [x, y] : pts) {
    a += (x - mx) * (x - mx);
    b += (x - mx) * (y - my);
    c += (y - my) * (y - my);
  }
  a /= n - 1, b /= n - 1, c /= n - 1;
  const double mid = (a + c) / 2, rad = std::sqrt((a - c) * (a - c) / 4 + b * b);
  Pca2 r{mid + rad, mid - rad, 1.0, 0.0};
  if (std::abs(b) > 1e-300) {
    double vx = b, vy = r.lambda1 - a;
    const double len = std::hypot(vx, vy);
    vx /= len, vy /= len;
    if (vx < 0 || (vx == 0 && vy < 0)) vx = -vx, vy = -vy;
    r.v1x = vx, r.v1y = vy;
  } else if (c > a) {
    r.v1x = 0.0, r.v1y = 1.0;
  }
  return r;
}

}  // namespace oracle
