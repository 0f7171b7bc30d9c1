// SPDX-License-Identifier: Apache-2.0
//
// BiGRU encoder with a linear-chain CRF head for BIO2 ability tagging.
//
// GRU cell (reset gate applied before the recurrent product):
//   z = sigmoid(Wz x + Uz h' + bz)
//   r = sigmoid(Wr x + Ur h' + br)
//   n = tanh(Wn x + Un (r * h') + bn)
//   h = z * h' + (1 - z) * n
// Emissions at step t are P [h_fwd(t) ; h_bwd(t)] + c.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "apthunt/crf.hpp"
#include "apthunt/error.hpp"
#include "apthunt/linalg.hpp"
#include "apthunt/random.hpp"

namespace apthunt::tagger {

/// Tag indices: O = 0, then B-a = 2i + 1 and I-a = 2i + 2 for ability i.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(std::vector<std::string> abilities) : abilities_(std::move(abilities)) {
    for (std::size_t i = 0; i < abilities_.size(); ++i) {
      if (abilities_[i].empty()) throw Error(ErrorKind::InvalidArgument, "empty ability identifier");
      for (std::size_t j = 0; j < i; ++j)
        if (abilities_[j] == abilities_[i])
          throw Error(ErrorKind::InvalidArgument, "duplicate ability '" + abilities_[i] + "'");
    }
  }

  const std::vector<std::string>& abilities() const { return abilities_; }
  std::size_t tag_count() const { return 2 * abilities_.size() + 1; }

  std::string tag_name(std::size_t tag) const {
    if (tag == 0) return "O";
    return std::string(tag % 2 == 1 ? "B-" : "I-") + abilities_.at((tag - 1) / 2);
  }

  std::optional<std::size_t> ability_index(std::string_view ability) const {
    for (std::size_t i = 0; i < abilities_.size(); ++i)
      if (abilities_[i] == ability) return i;
    return std::nullopt;
  }

  /// Parses "O", "B-x" or "I-x".
  std::size_t tag_index(std::string_view tag) const {
    if (tag == "O") return 0;
    if (tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-') {
      if (auto a = ability_index(tag.substr(2))) return 2 * *a + (tag[0] == 'B' ? 1 : 2);
    }
    throw Error(ErrorKind::UnknownAbility, "tag '" + std::string(tag) + "' not in label set");
  }

  /// Ability index of a tag, nullopt for O.
  static std::optional<std::size_t> ability_of(std::size_t tag) {
    if (tag == 0) return std::nullopt;
    return (tag - 1) / 2;
  }
  static bool is_begin(std::size_t tag) { return tag != 0 && tag % 2 == 1; }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<std::string> abilities_;
};

struct GruParams {
  Matrix w_z, w_r, w_n;  // h x k
  Matrix u_z, u_r, u_n;  // h x h
  Vector b_z, b_r, b_n;  // h

  GruParams() = default;
  GruParams(std::size_t hidden, std::size_t input)
      : w_z(hidden, input), w_r(hidden, input), w_n(hidden, input),
        u_z(hidden, hidden), u_r(hidden, hidden), u_n(hidden, hidden),
        b_z(hidden, 0.0), b_r(hidden, 0.0), b_n(hidden, 0.0) {}

  std::size_t hidden() const { return b_z.size(); }
  std::size_t input() const { return w_z.cols(); }

  friend bool operator==(const GruParams&, const GruParams&) = default;
};

struct TaggerParams {
  GruParams forward, backward;
  Matrix emission;       // K x 2h
  Vector emission_bias;  // K
  Matrix transitions;    // K x K, from row tag to column tag
  Vector start, end;     // K

  TaggerParams() = default;
  TaggerParams(std::size_t input, std::size_t hidden, std::size_t tags)
      : forward(hidden, input), backward(hidden, input), emission(tags, 2 * hidden),
        emission_bias(tags, 0.0), transitions(tags, tags), start(tags, 0.0), end(tags, 0.0) {}

  std::size_t hidden() const { return forward.hidden(); }
  std::size_t input() const { return forward.input(); }
  std::size_t tags() const { return emission_bias.size(); }

  friend bool operator==(const TaggerParams&, const TaggerParams&) = default;
};

/// Calls f(name, span) for every parameter tensor in a fixed order.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
  auto gru = [&](auto& g, const std::string& dir) {
    f(dir + ".w_z", std::span(g.w_z.flat()));
    f(dir + ".w_r", std::span(g.w_r.flat()));
    f(dir + ".w_n", std::span(g.w_n.flat()));
    f(dir + ".u_z", std::span(g.u_z.flat()));
    f(dir + ".u_r", std::span(g.u_r.flat()));
    f(dir + ".u_n", std::span(g.u_n.flat()));
    f(dir + ".b_z", std::span(g.b_z));
    f(dir + ".b_r", std::span(g.b_r));
    f(dir + ".b_n", std::span(g.b_n));
  };
  gru(p.forward, "forward");
  gru(p.backward, "backward");
  f(std::string("emission.weights"), std::span(p.emission.flat()));
  f(std::string("emission.bias"), std::span(p.emission_bias));
  f(std::string("crf.transitions"), std::span(p.transitions.flat()));
  f(std::string("crf.start"), std::span(p.start));
  f(std::string("crf.end"), std::span(p.end));
}

struct BiGruCrfModel {
  LabelSet labels;
  TaggerParams params;

  friend bool operator==(const BiGruCrfModel&, const BiGruCrfModel&) = default;
};

inline BiGruCrfModel make_model(LabelSet labels, std::size_t input, std::size_t hidden) {
  const std::size_t k = labels.tag_count();
  return BiGruCrfModel{std::move(labels), TaggerParams(input, hidden, k)};
}

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Per-position activations of one GRU direction.
struct GruTrace {
  Matrix h, h_prev, z, r, n;  // T x h
};

inline GruTrace gru_run(const GruParams& g, const std::vector<Vector>& inputs, bool reverse) {
  const std::size_t steps = inputs.size(), hid = g.hidden();
  GruTrace tr{Matrix(steps, hid), Matrix(steps, hid), Matrix(steps, hid), Matrix(steps, hid), Matrix(steps, hid)};
  Vector prev(hid, 0.0), az(hid), ar(hid), an(hid), rh(hid);
  for (std::size_t p = 0; p < steps; ++p) {
    const std::size_t t = reverse ? steps - 1 - p : p;
    const Vector& x = inputs[t];
    std::copy(g.b_z.begin(), g.b_z.end(), az.begin());
    std::copy(g.b_r.begin(), g.b_r.end(), ar.begin());
    std::copy(g.b_n.begin(), g.b_n.end(), an.begin());
    gemv_add(g.w_z, x, az);
    gemv_add(g.u_z, prev, az);
    gemv_add(g.w_r, x, ar);
    gemv_add(g.u_r, prev, ar);
    for (std::size_t i = 0; i < hid; ++i) {
      tr.z(t, i) = sigmoid(az[i]);
      tr.r(t, i) = sigmoid(ar[i]);
      rh[i] = tr.r(t, i) * prev[i];
    }
    gemv_add(g.w_n, x, an);
    gemv_add(g.u_n, rh, an);
    for (std::size_t i = 0; i < hid; ++i) {
      const double n = std::tanh(an[i]);
      const double z = tr.z(t, i);
      tr.n(t, i) = n;
      tr.h_prev(t, i) = prev[i];
      tr.h(t, i) = z * prev[i] + (1.0 - z) * n;
    }
    auto ht = tr.h.row(t);
    std::copy(ht.begin(), ht.end(), prev.begin());
  }
  return tr;
}

/// Backpropagation through time for one direction. dh holds the gradient
/// arriving at each position's hidden state from the emission layer.
inline void gru_backprop(const GruParams& g, const std::vector<Vector>& inputs, const GruTrace& tr, const Matrix& dh,
                         bool reverse, GruParams& grad) {
  const std::size_t steps = inputs.size(), hid = g.hidden();
  Vector carry(hid, 0.0), d(hid), daz(hid), dar(hid), dan(hid), drh(hid), rh(hid), next(hid);
  for (std::size_t p = steps; p-- > 0;) {
    const std::size_t t = reverse ? steps - 1 - p : p;
    const Vector& x = inputs[t];
    for (std::size_t i = 0; i < hid; ++i) {
      d[i] = dh(t, i) + carry[i];
      const double z = tr.z(t, i), n = tr.n(t, i), hp = tr.h_prev(t, i);
      daz[i] = d[i] * (hp - n) * z * (1.0 - z);
      dan[i] = d[i] * (1.0 - z) * (1.0 - n * n);
      rh[i] = tr.r(t, i) * hp;
    }
    std::fill(drh.begin(), drh.end(), 0.0);
    gemv_t_add(g.u_n, dan, drh);
    for (std::size_t i = 0; i < hid; ++i) {
      const double r = tr.r(t, i);
      dar[i] = drh[i] * tr.h_prev(t, i) * r * (1.0 - r);
      next[i] = d[i] * tr.z(t, i) + drh[i] * r;
    }
    gemv_t_add(g.u_z, daz, next);
    gemv_t_add(g.u_r, dar, next);

    auto hp = tr.h_prev.row(t);
    outer_add(grad.w_z, daz, x);
    outer_add(grad.w_r, dar, x);
    outer_add(grad.w_n, dan, x);
    outer_add(grad.u_z, daz, hp);
    outer_add(grad.u_r, dar, hp);
    outer_add(grad.u_n, dan, rh);
    for (std::size_t i = 0; i < hid; ++i) {
      grad.b_z[i] += daz[i];
      grad.b_r[i] += dar[i];
      grad.b_n[i] += dan[i];
    }
    carry.swap(next);
  }
}

struct ForwardTrace {
  GruTrace fwd, bwd;
  Matrix emissions;  // T x K
};

inline void check_inputs(const TaggerParams& p, const std::vector<Vector>& inputs) {
  if (inputs.empty()) throw Error(ErrorKind::InvalidArgument, "tagger input sequence is empty");
  for (const auto& x : inputs) {
    if (x.size() != p.input())
      throw Error(ErrorKind::DimMismatch,
                  "input vector length " + std::to_string(x.size()) + " != " + std::to_string(p.input()));
  }
}

inline ForwardTrace forward_trace(const TaggerParams& p, const std::vector<Vector>& inputs) {
  check_inputs(p, inputs);
  ForwardTrace tr{gru_run(p.forward, inputs, false), gru_run(p.backward, inputs, true),
                  Matrix(inputs.size(), p.tags())};
  const std::size_t hid = p.hidden();
  Vector both(2 * hid);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto hf = tr.fwd.h.row(t), hb = tr.bwd.h.row(t);
    std::copy(hf.begin(), hf.end(), both.begin());
    std::copy(hb.begin(), hb.end(), both.begin() + static_cast<std::ptrdiff_t>(hid));
    auto e = tr.emissions.row(t);
    std::copy(p.emission_bias.begin(), p.emission_bias.end(), e.begin());
    gemv_add(p.emission, both, e);
  }
  return tr;
}

}  // namespace detail

/// Per-step emission scores (T x K).
inline Matrix bigru_forward(const BiGruCrfModel& model, const std::vector<Vector>& inputs) {
  return detail::forward_trace(model.params, inputs).emissions;
}

/// Additive penalties that forbid I-a unless preceded by B-a or I-a.
struct TransitionMask {
  Matrix transitions;
  Vector start;
};

inline TransitionMask bio_mask(const LabelSet& labels, double penalty = -1e6) {
  const std::size_t k = labels.tag_count();
  TransitionMask m{Matrix(k, k), Vector(k, 0.0)};
  for (std::size_t to = 1; to < k; ++to) {
    if (LabelSet::is_begin(to)) continue;
    m.start[to] = penalty;
    for (std::size_t from = 0; from < k; ++from) {
      if (LabelSet::ability_of(from) != LabelSet::ability_of(to)) m.transitions(from, to) = penalty;
    }
  }
  return m;
}

inline crf::TagSequence tag(const BiGruCrfModel& model, const std::vector<Vector>& inputs, bool bio_constrained = false) {
  const Matrix emissions = bigru_forward(model, inputs);
  const auto& p = model.params;
  if (!bio_constrained) return crf::crf_viterbi(emissions, p.transitions, p.start, p.end);
  auto mask = bio_mask(model.labels);
  Matrix trans = p.transitions;
  Vector start = p.start;
  for (std::size_t i = 0; i < trans.flat().size(); ++i) trans.flat()[i] += mask.transitions.flat()[i];
  for (std::size_t i = 0; i < start.size(); ++i) start[i] += mask.start[i];
  return crf::crf_viterbi(emissions, trans, start, p.end);
}

struct LossAndGradients {
  double loss = 0.0;
  TaggerParams gradients;
};

inline double gold_score(const TaggerParams& p, const Matrix& emissions, const std::vector<std::size_t>& gold) {
  return crf::path_score(emissions, p.transitions, p.start, p.end, gold);
}

inline void check_gold(const TaggerParams& p, const std::vector<Vector>& inputs, const std::vector<std::size_t>& gold) {
  if (gold.size() != inputs.size())
    throw Error(ErrorKind::AlignmentMismatch,
                std::to_string(gold.size()) + " gold tags for " + std::to_string(inputs.size()) + " inputs");
  for (std::size_t g : gold)
    if (g >= p.tags()) throw Error(ErrorKind::InvalidArgument, "gold tag index out of range");
}

/// CRF negative log-likelihood of the gold path (forward pass only).
inline double nll(const BiGruCrfModel& model, const std::vector<Vector>& inputs, const std::vector<std::size_t>& gold) {
  const auto& p = model.params;
  check_gold(p, inputs, gold);
  const Matrix e = bigru_forward(model, inputs);
  return crf::crf_log_partition(e, p.transitions, p.start, p.end) - gold_score(p, e, gold);
}

/// NLL = log Z - score(gold) and its exact gradient with respect to every
/// parameter tensor (CRF expected-minus-observed counts, then BPTT through
/// both GRU directions).
inline LossAndGradients nll_and_gradients(const BiGruCrfModel& model, const std::vector<Vector>& inputs,
                                          const std::vector<std::size_t>& gold) {
  const auto& p = model.params;
  check_gold(p, inputs, gold);
  const std::size_t steps = inputs.size(), k = p.tags(), hid = p.hidden();
  auto tr = detail::forward_trace(p, inputs);
  auto marg = crf::crf_marginals(tr.emissions, p.transitions, p.start, p.end);

  LossAndGradients out{marg.log_partition - gold_score(p, tr.emissions, gold), TaggerParams(p.input(), hid, k)};
  auto& g = out.gradients;

  Matrix de = marg.unary;  // d loss / d emissions
  for (std::size_t t = 0; t < steps; ++t) de(t, gold[t]) -= 1.0;
  g.transitions = marg.pairwise;
  for (std::size_t t = 1; t < steps; ++t) g.transitions(gold[t - 1], gold[t]) -= 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    g.start[j] = marg.unary(0, j);
    g.end[j] = marg.unary(steps - 1, j);
  }
  g.start[gold.front()] -= 1.0;
  g.end[gold.back()] -= 1.0;

  Matrix dhf(steps, hid), dhb(steps, hid);
  Vector both(2 * hid), dboth(2 * hid);
  for (std::size_t t = 0; t < steps; ++t) {
    auto hf = tr.fwd.h.row(t), hb = tr.bwd.h.row(t);
    std::copy(hf.begin(), hf.end(), both.begin());
    std::copy(hb.begin(), hb.end(), both.begin() + static_cast<std::ptrdiff_t>(hid));
    auto det = de.row(t);
    outer_add(g.emission, det, both);
    for (std::size_t j = 0; j < k; ++j) g.emission_bias[j] += det[j];
    std::fill(dboth.begin(), dboth.end(), 0.0);
    gemv_t_add(p.emission, det, dboth);
    std::copy(dboth.begin(), dboth.begin() + static_cast<std::ptrdiff_t>(hid), dhf.row(t).begin());
    std::copy(dboth.begin() + static_cast<std::ptrdiff_t>(hid), dboth.end(), dhb.row(t).begin());
  }
  detail::gru_backprop(p.forward, inputs, tr.fwd, dhf, false, g.forward);
  detail::gru_backprop(p.backward, inputs, tr.bwd, dhb, true, g.backward);
  return out;
}

struct TrainingSequence {
  std::vector<Vector> inputs;
  std::vector<std::size_t> tags;
};

struct TrainHyper {
  std::size_t hidden = 64;
  double lr = 0.01;
  std::size_t epochs = 20;
  std::size_t batch = 32;
  std::uint64_t seed = 0;
  double clip = 5.0;  // max global gradient L2 norm
};

/// Uniform(-0.1, 0.1) initialization in tensor order.
inline BiGruCrfModel init_model(LabelSet labels, std::size_t input, std::size_t hidden, std::uint64_t seed) {
  auto model = make_model(std::move(labels), input, hidden);
  Rng rng(seed);
  for_each_tensor(model.params, [&](const std::string&, std::span<double> t) {
    for (double& x : t) x = rng.uniform(-0.1, 0.1);
  });
  return model;
}

inline double mean_loss(const BiGruCrfModel& model, const std::vector<TrainingSequence>& data) {
  double total = 0.0;
  for (const auto& s : data) total += nll(model, s.inputs, s.tags);
  return total / static_cast<double>(data.size());
}

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Mini-batch SGD on the mean per-sequence NLL with global-norm clipping.
/// The callback receives the full-data mean loss after each epoch.
inline BiGruCrfModel train(const std::vector<TrainingSequence>& data, const LabelSet& labels, const TrainHyper& hyper,
                           const EpochCallback& on_epoch = {}) {
  if (data.empty()) throw Error(ErrorKind::InvalidArgument, "training set is empty");
  if (hyper.batch == 0 || hyper.hidden == 0) throw Error(ErrorKind::InvalidArgument, "batch and hidden must be >= 1");
  const std::size_t input = data.front().inputs.empty() ? 0 : data.front().inputs.front().size();
  auto model = init_model(labels, input, hyper.hidden, hyper.seed);
  for (const auto& s : data) {
    detail::check_inputs(model.params, s.inputs);
    check_gold(model.params, s.inputs, s.tags);
  }

  Rng order_rng(mix64(hyper.seed ^ 0x5eedULL));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    for (std::size_t b = 0; b < order.size(); b += hyper.batch) {
      const std::size_t e = std::min(order.size(), b + hyper.batch);
      TaggerParams sum(input, hyper.hidden, labels.tag_count());
      for (std::size_t i = b; i < e; ++i) {
        auto lg = nll_and_gradients(model, data[order[i]].inputs, data[order[i]].tags);
        if (!std::isfinite(lg.loss))
          throw Error(ErrorKind::NonFinite, "non-finite loss at epoch " + std::to_string(epoch) + ", sequence " +
                                                std::to_string(order[i]));
        std::vector<std::span<double>> dst;
        for_each_tensor(sum, [&](const std::string&, std::span<double> t) { dst.push_back(t); });
        std::size_t idx = 0;
        for_each_tensor(lg.gradients, [&](const std::string&, std::span<double> t) {
          auto d = dst[idx++];
          for (std::size_t q = 0; q < t.size(); ++q) d[q] += t[q];
        });
      }
      const double scale = 1.0 / static_cast<double>(e - b);
      double sq = 0.0;
      for_each_tensor(sum, [&](const std::string&, std::span<double> t) {
        for (double& x : t) {
          x *= scale;
          sq += x * x;
        }
      });
      const double gnorm = std::sqrt(sq);
      const double step = hyper.lr * ((hyper.clip > 0.0 && gnorm > hyper.clip) ? hyper.clip / gnorm : 1.0);
      std::vector<std::span<double>> grads;
      for_each_tensor(sum, [&](const std::string&, std::span<double> t) { grads.push_back(t); });
      std::size_t idx = 0;
      for_each_tensor(model.params, [&](const std::string&, std::span<double> t) {
        auto gsp = grads[idx++];
        for (std::size_t q = 0; q < t.size(); ++q) t[q] -= step * gsp[q];
      });
    }
    if (on_epoch) {
      const double loss = mean_loss(model, data);
      if (!std::isfinite(loss)) throw Error(ErrorKind::NonFinite, "non-finite loss after epoch " + std::to_string(epoch));
      on_epoch(epoch, loss);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline nlohmann::json gru_to_json(const GruParams& g) {
  return {{"w_z", to_json_matrix(g.w_z)}, {"w_r", to_json_matrix(g.w_r)}, {"w_n", to_json_matrix(g.w_n)},
          {"u_z", to_json_matrix(g.u_z)}, {"u_r", to_json_matrix(g.u_r)}, {"u_n", to_json_matrix(g.u_n)},
          {"b_z", g.b_z},                 {"b_r", g.b_r},                 {"b_n", g.b_n}};
}

inline GruParams gru_from_json(const nlohmann::json& j, const std::string& path, std::size_t input,
                               std::size_t hidden) {
  GruParams g(hidden, input);
  auto mat = [&](const char* key, std::size_t rows, std::size_t cols) {
    Matrix m = matrix_from_json(require_field(j, key, path), path + "/" + key, cols);
    if (m.rows() != rows) throw SchemaError(path + "/" + key, "wrong row count");
    return m;
  };
  auto vec = [&](const char* key) {
    Vector v = vector_from_json(require_field(j, key, path), path + "/" + key);
    if (v.size() != hidden) throw SchemaError(path + "/" + key, "wrong length");
    return v;
  };
  g.w_z = mat("w_z", hidden, input);
  g.w_r = mat("w_r", hidden, input);
  g.w_n = mat("w_n", hidden, input);
  g.u_z = mat("u_z", hidden, hidden);
  g.u_r = mat("u_r", hidden, hidden);
  g.u_n = mat("u_n", hidden, hidden);
  g.b_z = vec("b_z");
  g.b_r = vec("b_r");
  g.b_n = vec("b_n");
  return g;
}

}  // namespace detail

inline nlohmann::json to_json(const BiGruCrfModel& m) {
  const auto& p = m.params;
  return {{"version", 1},
          {"abilities", m.labels.abilities()},
          {"input_dim", p.input()},
          {"hidden", p.hidden()},
          {"forward", detail::gru_to_json(p.forward)},
          {"backward", detail::gru_to_json(p.backward)},
          {"emission", {{"weights", to_json_matrix(p.emission)}, {"bias", p.emission_bias}}},
          {"crf", {{"transitions", to_json_matrix(p.transitions)}, {"start", p.start}, {"end", p.end}}}};
}

inline BiGruCrfModel tagger_from_json(const nlohmann::json& j) {
  require_version(j, 1);
  const auto& abilities = require_field(j, "abilities", "");
  if (!abilities.is_array()) throw SchemaError("/abilities", "expected array of strings");
  LabelSet labels(abilities.get<std::vector<std::string>>());
  const auto input = require_field(j, "input_dim", "").get<std::size_t>();
  const auto hidden = require_field(j, "hidden", "").get<std::size_t>();
  const std::size_t k = labels.tag_count();
  BiGruCrfModel m{labels, TaggerParams(input, hidden, k)};
  m.params.forward = detail::gru_from_json(require_field(j, "forward", ""), "/forward", input, hidden);
  m.params.backward = detail::gru_from_json(require_field(j, "backward", ""), "/backward", input, hidden);
  const auto& em = require_field(j, "emission", "");
  m.params.emission = matrix_from_json(require_field(em, "weights", "/emission"), "/emission/weights", 2 * hidden);
  m.params.emission_bias = vector_from_json(require_field(em, "bias", "/emission"), "/emission/bias");
  const auto& c = require_field(j, "crf", "");
  m.params.transitions = matrix_from_json(require_field(c, "transitions", "/crf"), "/crf/transitions", k);
  m.params.start = vector_from_json(require_field(c, "start", "/crf"), "/crf/start");
  m.params.end = vector_from_json(require_field(c, "end", "/crf"), "/crf/end");
  if (m.params.emission.rows() != k || m.params.emission_bias.size() != k || m.params.transitions.rows() != k ||
      m.params.start.size() != k || m.params.end.size() != k)
    throw SchemaError("/emission", "emission/CRF shapes do not match the label set");
  return m;
}

}  // namespace apthunt::tagger
