// SPDX-License-Identifier: Apache-2.0
//
// Event embedding: each (subject, action, object) triple becomes the
// concatenation of three token vectors, optionally reduced with PCA.

#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"

#include "apthunt/error.hpp"
#include "apthunt/ingest.hpp"
#include "apthunt/linalg.hpp"
#include "apthunt/random.hpp"

namespace apthunt::embed {

/// Signed feature hashing over lowercase alphanumeric fragments.
struct FeatureHash {
  std::size_t dim = 64;
  std::uint64_t seed = 0;
  // Each fragment lands in this many (bucket, sign) slots.
  static constexpr int kProbes = 4;
};

enum class OovPolicy { Zero, HashFallback, Error };

inline const char* to_string(OovPolicy p) {
  switch (p) {
    case OovPolicy::Zero: return "zero";
    case OovPolicy::HashFallback: return "hash-fallback";
    case OovPolicy::Error: return "error";
  }
  return "?";
}

inline OovPolicy parse_oov_policy(std::string_view s) {
  if (s == "zero") return OovPolicy::Zero;
  if (s == "hash-fallback") return OovPolicy::HashFallback;
  if (s == "error") return OovPolicy::Error;
  throw Error(ErrorKind::InvalidArgument, "unknown OOV policy '" + std::string(s) + "'");
}

/// Precomputed token vectors (e.g. exported from a language model), keyed
/// by lowercase token.
struct ExternalTable {
  std::unordered_map<std::string, Vector> vectors;
  std::size_t dim = 0;
  OovPolicy oov = OovPolicy::HashFallback;
  std::uint64_t fallback_seed = 0;
};

struct TokenEmbedder {
  std::variant<FeatureHash, ExternalTable> backend;

  std::size_t dim() const {
    return std::visit([](const auto& b) { return b.dim; }, backend);
  }
};

/// Lowercases and splits on every non-alphanumeric byte (path separators
/// included). Bytes >= 0x80 stay inside fragments so UTF-8 words survive.
inline std::vector<std::string> token_fragments(std::string_view token) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : token) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Vector feature_hash(const FeatureHash& fh, std::string_view token) {
  if (fh.dim == 0) throw Error(ErrorKind::InvalidArgument, "feature hash dim must be positive");
  Vector v(fh.dim, 0.0);
  const std::uint64_t salt = mix64(fh.seed);
  for (const auto& frag : token_fragments(token)) {
    const std::uint64_t base = fnv1a64(frag);
    for (int p = 0; p < FeatureHash::kProbes; ++p) {
      const std::uint64_t h = mix64(base ^ (salt + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(p + 1)));
      v[h % fh.dim] += (h >> 63) ? -1.0 : 1.0;
    }
  }
  const double n = norm2(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
  return v;
}

inline Vector embed_token(const TokenEmbedder& embedder, std::string_view token) {
  if (const auto* fh = std::get_if<FeatureHash>(&embedder.backend)) return feature_hash(*fh, token);

  const auto& table = std::get<ExternalTable>(embedder.backend);
  auto it = table.vectors.find(ingest::detail::lower(token));
  if (it != table.vectors.end()) return it->second;
  switch (table.oov) {
    case OovPolicy::Zero: return Vector(table.dim, 0.0);
    case OovPolicy::HashFallback: return feature_hash(FeatureHash{table.dim, table.fallback_seed}, token);
    case OovPolicy::Error: break;
  }
  throw Error(ErrorKind::OovToken, "token '" + std::string(token) + "' not in embedding table");
}

struct EventVector {
  Vector values;
  std::uint64_t event_ref = 0;  // seq_id of the source event
};

/// [subject || action || object], length 3d.
inline EventVector embed_event(const TokenEmbedder& embedder, const ingest::CanonicalEvent& e) {
  EventVector out;
  out.event_ref = e.seq_id;
  out.values.reserve(3 * embedder.dim());
  for (const std::string* token : {&e.subject, &e.action, &e.object}) {
    Vector part = embed_token(embedder, *token);
    out.values.insert(out.values.end(), part.begin(), part.end());
  }
  return out;
}

/// Embeds a batch, memoizing token vectors within the call.
inline std::vector<EventVector> embed_events(const TokenEmbedder& embedder,
                                             const std::vector<ingest::CanonicalEvent>& events) {
  std::unordered_map<std::string, Vector> cache;
  auto lookup = [&](const std::string& token) -> const Vector& {
    auto it = cache.find(token);
    if (it == cache.end()) it = cache.emplace(token, embed_token(embedder, token)).first;
    return it->second;
  };
  std::vector<EventVector> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    EventVector v;
    v.event_ref = e.seq_id;
    v.values.reserve(3 * embedder.dim());
    for (const std::string* token : {&e.subject, &e.action, &e.object}) {
      const Vector& part = lookup(*token);
      v.values.insert(v.values.end(), part.begin(), part.end());
    }
    out.push_back(std::move(v));
  }
  return out;
}

/// Reads `token<TAB>v1 v2 ... vd` lines. Tokens are lowercased on load.
inline ExternalTable load_embedding_table(std::string_view text, OovPolicy oov = OovPolicy::HashFallback,
                                          std::uint64_t fallback_seed = 0) {
  ExternalTable table;
  table.oov = oov;
  table.fallback_seed = fallback_seed;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0)
      throw ParseError(ErrorKind::DimMismatch, line_no, "expected token<TAB>values");
    std::istringstream values{std::string(line.substr(tab + 1))};
    Vector v;
    std::string num;
    while (values >> num) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(num, &used));
        if (used != num.size()) throw std::invalid_argument(num);
      } catch (const std::exception&) {
        throw ParseError(ErrorKind::DimMismatch, line_no, "non-numeric component '" + num + "'");
      }
    }
    if (v.empty() || !all_finite(v)) throw ParseError(ErrorKind::DimMismatch, line_no, "empty or non-finite vector");
    if (table.dim == 0) table.dim = v.size();
    if (v.size() != table.dim)
      throw ParseError(ErrorKind::DimMismatch, line_no,
                       "vector has " + std::to_string(v.size()) + " components, expected " + std::to_string(table.dim));
    table.vectors[ingest::detail::lower(line.substr(0, tab))] = std::move(v);
  }
  if (table.dim == 0) throw Error(ErrorKind::DimMismatch, "embedding table is empty");
  return table;
}

// ---------------------------------------------------------------------------
// PCA

struct PcaModel {
  Vector mean;
  Matrix components;  // k x D, orthonormal rows
  Vector explained_variance;

  std::size_t input_dim() const { return mean.size(); }
  std::size_t output_dim() const { return components.rows(); }

  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

/// Fits the top-k principal axes of the sample covariance (n - 1
/// denominator) by Jacobi eigendecomposition.
inline PcaModel pca_fit(const std::vector<Vector>& vectors, std::size_t k) {
  const std::size_t n = vectors.size();
  if (n < 2) throw Error(ErrorKind::DegenerateInput, "PCA needs at least 2 vectors, got " + std::to_string(n));
  const std::size_t d = vectors.front().size();
  if (k == 0 || k > d || k > n)
    throw Error(ErrorKind::InvalidArgument,
                "k=" + std::to_string(k) + " must satisfy 1 <= k <= min(dim=" + std::to_string(d) +
                    ", n=" + std::to_string(n) + ")");

  PcaModel model;
  model.mean.assign(d, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != d) throw Error(ErrorKind::DimMismatch, "PCA input vectors differ in length");
    if (!all_finite(v)) throw Error(ErrorKind::NonFinite, "PCA input contains non-finite values");
    for (std::size_t i = 0; i < d; ++i) model.mean[i] += v[i];
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  Matrix cov(d, d);
  Vector centered(d);
  for (const auto& v : vectors) {
    for (std::size_t i = 0; i < d; ++i) centered[i] = v[i] - model.mean[i];
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = centered[i];
      if (ci == 0.0) continue;
      auto row = cov.row(i);
      for (std::size_t j = i; j < d; ++j) row[j] += ci * centered[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }
  }

  auto eig = jacobi_eigen(std::move(cov));
  model.components = Matrix(k, d);
  model.explained_variance.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    model.explained_variance[r] = std::max(0.0, eig.values[r]);
    auto src = eig.vectors.row(r);
    std::copy(src.begin(), src.end(), model.components.row(r).begin());
  }
  return model;
}

inline Vector pca_transform(const PcaModel& model, std::span<const double> v) {
  if (v.size() != model.input_dim())
    throw Error(ErrorKind::DimMismatch,
                "vector length " + std::to_string(v.size()) + " != model input " + std::to_string(model.input_dim()));
  Vector centered(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) centered[i] = v[i] - model.mean[i];
  Vector out(model.output_dim(), 0.0);
  gemv_add(model.components, centered, out);
  return out;
}

inline Vector pca_inverse(const PcaModel& model, std::span<const double> y) {
  if (y.size() != model.output_dim()) throw Error(ErrorKind::DimMismatch, "reduced vector length mismatch");
  Vector out = model.mean;
  gemv_t_add(model.components, y, out);
  return out;
}

inline nlohmann::json to_json(const PcaModel& m) {
  return {{"version", 1},
          {"mean", m.mean},
          {"components", to_json_matrix(m.components)},
          {"explained_variance", m.explained_variance}};
}

inline PcaModel pca_from_json(const nlohmann::json& j) {
  require_version(j, 1);
  PcaModel m;
  m.mean = vector_from_json(require_field(j, "mean", ""), "/mean");
  m.components = matrix_from_json(require_field(j, "components", ""), "/components", m.mean.size());
  m.explained_variance = vector_from_json(require_field(j, "explained_variance", ""), "/explained_variance");
  if (m.explained_variance.size() != m.components.rows())
    throw SchemaError("/explained_variance", "length must equal number of components");
  return m;
}

// Embedder configuration persisted next to the PCA model so inference
// reproduces the training-time token vectors.

inline nlohmann::json embedder_to_json(const TokenEmbedder& e, const std::string& table_path = {}) {
  if (const auto* fh = std::get_if<FeatureHash>(&e.backend))
    return {{"version", 1}, {"backend", "feature_hash"}, {"dim", fh->dim}, {"seed", fh->seed}};
  const auto& t = std::get<ExternalTable>(e.backend);
  return {{"version", 1},         {"backend", "external_table"}, {"dim", t.dim},
          {"table", table_path},  {"oov", to_string(t.oov)},     {"seed", t.fallback_seed}};
}

}  // namespace apthunt::embed
