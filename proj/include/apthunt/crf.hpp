// SPDX-License-Identifier: Apache-2.0
//
// Linear-chain CRF over T steps and K tags. A path y scores
//   start[y_1] + sum_t emissions[t][y_t] + sum_t trans[y_{t-1}][y_t] + end[y_T].

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "apthunt/error.hpp"
#include "apthunt/linalg.hpp"

namespace apthunt::crf {

struct TagSequence {
  std::vector<std::size_t> tags;
  double score = 0.0;
};

inline double log_sum_exp(std::span<const double> xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

namespace detail {

inline void check_shapes(const Matrix& emissions, const Matrix& transitions, std::span<const double> start,
                         std::span<const double> end) {
  const std::size_t k = emissions.cols();
  if (emissions.rows() == 0 || k == 0) throw Error(ErrorKind::InvalidArgument, "CRF needs T >= 1 and K >= 1");
  if (transitions.rows() != k || transitions.cols() != k || start.size() != k || end.size() != k)
    throw Error(ErrorKind::DimMismatch, "CRF parameter shapes disagree with emission width");
}

}  // namespace detail

inline double path_score(const Matrix& emissions, const Matrix& transitions, std::span<const double> start,
                         std::span<const double> end, std::span<const std::size_t> path) {
  double s = start[path[0]] + end[path.back()];
  for (std::size_t t = 0; t < path.size(); ++t) {
    s += emissions(t, path[t]);
    if (t > 0) s += transitions(path[t - 1], path[t]);
  }
  return s;
}

/// Forward log-space messages; alpha(t, j) = log-sum over prefixes ending in j.
inline Matrix forward_messages(const Matrix& emissions, const Matrix& transitions, std::span<const double> start) {
  const std::size_t steps = emissions.rows(), k = emissions.cols();
  Matrix alpha(steps, k);
  for (std::size_t j = 0; j < k; ++j) alpha(0, j) = start[j] + emissions(0, j);
  Vector scratch(k);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < k; ++i) scratch[i] = alpha(t - 1, i) + transitions(i, j);
      alpha(t, j) = emissions(t, j) + log_sum_exp(scratch);
    }
  }
  return alpha;
}

/// Backward messages; beta(t, i) = log-sum over suffixes after step t given y_t = i.
inline Matrix backward_messages(const Matrix& emissions, const Matrix& transitions, std::span<const double> end) {
  const std::size_t steps = emissions.rows(), k = emissions.cols();
  Matrix beta(steps, k);
  for (std::size_t i = 0; i < k; ++i) beta(steps - 1, i) = end[i];
  Vector scratch(k);
  for (std::size_t t = steps - 1; t-- > 0;) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) scratch[j] = transitions(i, j) + emissions(t + 1, j) + beta(t + 1, j);
      beta(t, i) = log_sum_exp(scratch);
    }
  }
  return beta;
}

inline double crf_log_partition(const Matrix& emissions, const Matrix& transitions, std::span<const double> start,
                                std::span<const double> end) {
  detail::check_shapes(emissions, transitions, start, end);
  const Matrix alpha = forward_messages(emissions, transitions, start);
  const std::size_t last = emissions.rows() - 1;
  Vector final(emissions.cols());
  for (std::size_t j = 0; j < final.size(); ++j) final[j] = alpha(last, j) + end[j];
  return log_sum_exp(final);
}

/// Max-score path. Ties go to the lowest tag index at every step.
inline TagSequence crf_viterbi(const Matrix& emissions, const Matrix& transitions, std::span<const double> start,
                               std::span<const double> end) {
  detail::check_shapes(emissions, transitions, start, end);
  const std::size_t steps = emissions.rows(), k = emissions.cols();
  Matrix best(steps, k);
  std::vector<std::size_t> back(steps * k, 0);
  for (std::size_t j = 0; j < k; ++j) best(0, j) = start[j] + emissions(0, j);
  for (std::size_t t = 1; t < steps; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t arg = 0;
      double m = best(t - 1, 0) + transitions(0, j);
      for (std::size_t i = 1; i < k; ++i) {
        const double cand = best(t - 1, i) + transitions(i, j);
        if (cand > m) {
          m = cand;
          arg = i;
        }
      }
      best(t, j) = m + emissions(t, j);
      back[t * k + j] = arg;
    }
  }
  TagSequence out;
  out.tags.assign(steps, 0);
  std::size_t arg = 0;
  double m = best(steps - 1, 0) + end[0];
  for (std::size_t j = 1; j < k; ++j) {
    const double cand = best(steps - 1, j) + end[j];
    if (cand > m) {
      m = cand;
      arg = j;
    }
  }
  out.score = m;
  out.tags[steps - 1] = arg;
  for (std::size_t t = steps - 1; t > 0; --t) out.tags[t - 1] = back[t * k + out.tags[t]];
  return out;
}

/// Gradient of the log-partition: unary and pairwise marginals.
struct Marginals {
  double log_partition = 0.0;
  Matrix unary;     // T x K
  Matrix pairwise;  // K x K, summed over steps
};

inline Marginals crf_marginals(const Matrix& emissions, const Matrix& transitions, std::span<const double> start,
                               std::span<const double> end) {
  detail::check_shapes(emissions, transitions, start, end);
  const std::size_t steps = emissions.rows(), k = emissions.cols();
  const Matrix alpha = forward_messages(emissions, transitions, start);
  const Matrix beta = backward_messages(emissions, transitions, end);
  Vector final(k);
  for (std::size_t j = 0; j < k; ++j) final[j] = alpha(steps - 1, j) + end[j];

  Marginals out{log_sum_exp(final), Matrix(steps, k), Matrix(k, k)};
  const double z = out.log_partition;
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < k; ++j) out.unary(t, j) = std::exp(alpha(t, j) + beta(t, j) - z);
  for (std::size_t t = 0; t + 1 < steps; ++t)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        out.pairwise(i, j) += std::exp(alpha(t, i) + transitions(i, j) + emissions(t + 1, j) + beta(t + 1, j) - z);
  return out;
}

}  // namespace apthunt::crf
