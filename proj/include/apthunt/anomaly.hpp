// SPDX-License-Identifier: Apache-2.0
//
// One-class SVM (RBF kernel) trained with pairwise SMO on the dual
//
//   min  1/2 a^T K a   s.t.  0 <= a_i <= 1/(nu n),  sum a_i = 1
//
// Events whose decision value is <= threshold are kept as suspicious.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "apthunt/embed.hpp"
#include "apthunt/error.hpp"
#include "apthunt/ingest.hpp"
#include "apthunt/linalg.hpp"
#include "apthunt/random.hpp"

namespace apthunt::anomaly {

struct OcSvmModel {
  Matrix support_vectors;  // m x k
  Vector alphas;           // m, each in (0, 1/(nu n_train)]
  double rho = 0.0;
  double gamma = 1.0;
  double nu = 0.5;
  std::size_t n_train = 0;
  bool converged = true;
  std::size_t iterations = 0;

  std::size_t dim() const { return support_vectors.cols(); }
  double upper_bound() const { return 1.0 / (nu * static_cast<double>(n_train)); }

  friend bool operator==(const OcSvmModel&, const OcSvmModel&) = default;
};

struct OcSvmParams {
  double nu = 0.5;
  double gamma = 0.0;  // <= 0 selects 1/k
  double tol = 1e-6;
  std::size_t max_iter = 1000;  // sweeps of n pair updates
  std::size_t cache_bytes = std::size_t{256} << 20;
};

namespace detail {

/// LRU cache of RBF kernel rows.
class KernelRows {
 public:
  KernelRows(const std::vector<Vector>& x, double gamma, std::size_t budget_bytes)
      : x_(x), gamma_(gamma), slot_of_(x.size(), kNone) {
    const std::size_t row_bytes = std::max<std::size_t>(1, x.size() * sizeof(double));
    capacity_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
  }

  std::span<const double> row(std::size_t i) {
    if (slot_of_[i] != kNone) {
      lru_.splice(lru_.begin(), lru_, positions_[slot_of_[i]]);
      return rows_[slot_of_[i]];
    }
    std::size_t slot;
    if (rows_.size() < capacity_) {
      slot = rows_.size();
      rows_.emplace_back(x_.size());
      owners_.push_back(i);
      lru_.push_front(slot);
      positions_.push_back(lru_.begin());
    } else {
      slot = lru_.back();
      slot_of_[owners_[slot]] = kNone;
      owners_[slot] = i;
      lru_.splice(lru_.begin(), lru_, positions_[slot]);
    }
    slot_of_[i] = slot;
    auto& r = rows_[slot];
    for (std::size_t j = 0; j < x_.size(); ++j) r[j] = std::exp(-gamma_ * squared_distance(x_[i], x_[j]));
    return r;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  const std::vector<Vector>& x_;
  double gamma_;
  std::size_t capacity_;
  std::vector<Vector> rows_;
  std::vector<std::size_t> owners_;
  std::vector<std::size_t> slot_of_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> positions_;
};

}  // namespace detail

/// gamma = 1 / median pairwise squared distance over (up to) 2000 seeded
/// random pairs.
inline double median_gamma(const std::vector<Vector>& x, std::uint64_t seed = 0) {
  if (x.size() < 2) throw Error(ErrorKind::DegenerateInput, "median heuristic needs >= 2 vectors");
  Rng rng(seed);
  std::vector<double> d2;
  for (int t = 0; t < 2000; ++t) {
    const std::size_t i = rng.below(x.size());
    std::size_t j = rng.below(x.size() - 1);
    if (j >= i) ++j;
    d2.push_back(squared_distance(x[i], x[j]));
  }
  std::nth_element(d2.begin(), d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2), d2.end());
  const double med = d2[d2.size() / 2];
  return med > 0.0 ? 1.0 / med : 1.0;
}

inline OcSvmModel ocsvm_fit(const std::vector<Vector>& x, const OcSvmParams& params) {
  const std::size_t n = x.size();
  if (n < 2) throw Error(ErrorKind::DegenerateInput, "one-class SVM needs n >= 2, got " + std::to_string(n));
  if (!(params.nu > 0.0 && params.nu <= 1.0)) throw Error(ErrorKind::InvalidArgument, "nu must lie in (0, 1]");
  if (!(params.tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
  const std::size_t k = x.front().size();
  for (const auto& v : x) {
    if (v.size() != k) throw Error(ErrorKind::DimMismatch, "training vectors differ in length");
    if (!all_finite(v)) throw Error(ErrorKind::NonFinite, "training vectors contain non-finite values");
  }
  const double gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(k);
  const double c = 1.0 / (params.nu * static_cast<double>(n));

  // Feasible start: fill alphas at the bound until the mass reaches 1.
  Vector alpha(n, 0.0);
  const auto full = static_cast<std::size_t>(std::floor(params.nu * static_cast<double>(n)));
  for (std::size_t i = 0; i < std::min(full, n); ++i) alpha[i] = c;
  if (full < n) alpha[full] = std::max(0.0, 1.0 - static_cast<double>(full) * c);

  detail::KernelRows kernel(x, gamma, params.cache_bytes);
  Vector grad(n, 0.0);  // grad = K alpha
  for (std::size_t j = 0; j < n; ++j) {
    if (alpha[j] == 0.0) continue;
    auto kj = kernel.row(j);
    for (std::size_t t = 0; t < n; ++t) grad[t] += alpha[j] * kj[t];
  }

  OcSvmModel model;
  model.gamma = gamma;
  model.nu = params.nu;
  model.n_train = n;
  model.converged = false;

  const std::size_t max_updates = params.max_iter * n;
  std::size_t updates = 0;
  for (; updates < max_updates; ++updates) {
    // Maximal violating pair: i can grow and has the smallest gradient,
    // j can shrink and has the largest.
    std::size_t i = n, j = n;
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      if (alpha[t] < c && grad[t] < g_min) {
        g_min = grad[t];
        i = t;
      }
      if (alpha[t] > 0.0 && grad[t] > g_max) {
        g_max = grad[t];
        j = t;
      }
    }
    if (i == n || j == n || g_max - g_min < params.tol) {
      model.converged = true;
      break;
    }

    auto ki = kernel.row(i);
    auto kj = kernel.row(j);
    const double eta = std::max(ki[i] + kj[j] - 2.0 * ki[j], 1e-12);
    double delta = (g_max - g_min) / eta;
    const double pair_sum = alpha[i] + alpha[j];
    double ai, aj;
    if (delta >= c - alpha[i] && c - alpha[i] <= alpha[j]) {
      ai = c;
      aj = std::max(0.0, pair_sum - c);
    } else if (delta >= alpha[j]) {
      aj = 0.0;
      ai = std::min(c, pair_sum);
    } else {
      ai = alpha[i] + delta;
      aj = std::max(0.0, pair_sum - ai);
    }
    const double di = ai - alpha[i];
    const double dj = aj - alpha[j];
    alpha[i] = ai;
    alpha[j] = aj;
    for (std::size_t t = 0; t < n; ++t) grad[t] += di * ki[t] + dj * kj[t];
  }
  model.iterations = updates;

  // rho from free vectors, else the midpoint of the KKT interval.
  double free_sum = 0.0;
  std::size_t free_count = 0;
  double lower = -std::numeric_limits<double>::infinity();  // max grad over alpha == c
  double upper = std::numeric_limits<double>::infinity();   // min grad over alpha == 0
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < c) {
      free_sum += grad[t];
      ++free_count;
    } else if (alpha[t] >= c) {
      lower = std::max(lower, grad[t]);
    } else {
      upper = std::min(upper, grad[t]);
    }
  }
  if (free_count > 0) {
    model.rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    model.rho = 0.5 * (lower + upper);
  } else {
    model.rho = std::isfinite(lower) ? lower : upper;
  }

  std::size_t m = 0;
  for (double a : alpha) m += a > 0.0 ? 1 : 0;
  model.support_vectors = Matrix(m, k);
  model.alphas.reserve(m);
  std::size_t r = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] <= 0.0) continue;
    std::copy(x[t].begin(), x[t].end(), model.support_vectors.row(r++).begin());
    model.alphas.push_back(alpha[t]);
  }
  return model;
}

/// sum_i alpha_i exp(-gamma |v - sv_i|^2) - rho; positive means benign-like.
inline double ocsvm_decision(const OcSvmModel& model, std::span<const double> v) {
  if (v.size() != model.dim())
    throw Error(ErrorKind::DimMismatch,
                "query length " + std::to_string(v.size()) + " != model dim " + std::to_string(model.dim()));
  double s = 0.0;
  for (std::size_t i = 0; i < model.alphas.size(); ++i)
    s += model.alphas[i] * std::exp(-model.gamma * squared_distance(v, model.support_vectors.row(i)));
  return s - model.rho;
}

/// Keeps the events whose decision value is <= threshold, in order.
inline ingest::EventSequence filter_events(const OcSvmModel& model, const ingest::EventSequence& seq,
                                           const std::vector<embed::EventVector>& vectors,
                                           double threshold = 0.0) {
  if (vectors.size() != seq.events.size())
    throw Error(ErrorKind::AlignmentMismatch, std::to_string(vectors.size()) + " vectors for " +
                                                  std::to_string(seq.events.size()) + " events");
  ingest::EventSequence out;
  out.origin = seq.origin;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].event_ref != seq.events[i].seq_id)
      throw Error(ErrorKind::AlignmentMismatch, "vector " + std::to_string(i) + " refers to event " +
                                                    std::to_string(vectors[i].event_ref));
    if (ocsvm_decision(model, vectors[i].values) <= threshold) out.events.push_back(seq.events[i]);
  }
  return out;
}

inline nlohmann::json to_json(const OcSvmModel& m) {
  return {{"version", 1},
          {"gamma", m.gamma},
          {"nu", m.nu},
          {"rho", m.rho},
          {"n_train", m.n_train},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"alphas", m.alphas},
          {"support_vectors", to_json_matrix(m.support_vectors)}};
}

inline OcSvmModel ocsvm_from_json(const nlohmann::json& j) {
  require_version(j, 1);
  OcSvmModel m;
  m.gamma = require_field(j, "gamma", "").get<double>();
  m.nu = require_field(j, "nu", "").get<double>();
  m.rho = require_field(j, "rho", "").get<double>();
  m.n_train = require_field(j, "n_train", "").get<std::size_t>();
  m.converged = j.value("converged", true);
  m.iterations = j.value("iterations", std::size_t{0});
  m.alphas = vector_from_json(require_field(j, "alphas", ""), "/alphas");
  m.support_vectors = matrix_from_json(require_field(j, "support_vectors", ""), "/support_vectors");
  if (m.alphas.empty()) throw SchemaError("/alphas", "model has no support vectors");
  if (m.alphas.size() != m.support_vectors.rows())
    throw SchemaError("/support_vectors", "row count must equal number of alphas");
  return m;
}

}  // namespace apthunt::anomaly
