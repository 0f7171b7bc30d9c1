// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "apthunt/embed.hpp"
#include "apthunt/random.hpp"
#include "oracles.hpp"

using namespace apthunt;
using namespace apthunt::embed;

namespace {

TokenEmbedder hashing(std::size_t d, std::uint64_t seed) { return TokenEmbedder{FeatureHash{d, seed}}; }

double cosine(const Vector& a, const Vector& b) { return dot(a, b) / (norm2(a) * norm2(b)); }

std::vector<Vector> line_data() {
  std::vector<Vector> pts;
  for (int t = -2; t <= 2; ++t) pts.push_back({double(t), 2.0 * t});
  return pts;
}

}  // namespace

TEST(Embed, Fragments) {
  EXPECT_EQ(token_fragments("C:\\Windows\\System32\\cmd.EXE"),
            (std::vector<std::string>{"c", "windows", "system32", "cmd", "exe"}));
  EXPECT_TRUE(token_fragments("::\\//").empty());
}

TEST(Embed, HashDeterministicAndNormalized) {
  auto e = hashing(64, 7);
  const auto a = embed_token(e, "RegOpenKey"), b = embed_token(e, "RegOpenKey");
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 64u);
  EXPECT_NEAR(norm2(a), 1.0, 1e-12);
  EXPECT_NE(embed_token(hashing(64, 8), "RegOpenKey"), a);
  EXPECT_EQ(embed_token(e, "\\\\"), Vector(64, 0.0));
}

TEST(Embed, HashIsPureOverRandomTokens) {
  auto e = hashing(64, 1);
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    std::string tok;
    const auto len = 1 + rng.below(20);
    for (std::uint64_t c = 0; c < len; ++c) tok += static_cast<char>(33 + rng.below(94));
    EXPECT_EQ(embed_token(e, tok), embed_token(e, tok));
  }
}

TEST(Embed, CollisionCorpus) {
  // 1000 realistic, distinct tokens.
  std::vector<std::string> tokens;
  const char* dirs[] = {"windows", "system32", "users", "appdata", "temp", "program files", "syswow64", "drivers",
                        "roaming", "local"};
  const char* names[] = {"svchost", "explorer", "cmd", "powershell", "rundll32", "regsvr32", "notepad", "chrome",
                         "outlook", "winword", "conhost", "lsass", "taskhost", "dllhost", "wscript", "mshta",
                         "certutil", "schtasks", "netsh", "reg", "whoami", "tasklist", "ipconfig", "net", "sc"};
  const char* exts[] = {"exe", "dll", "lnk", "tmp"};
  for (const char* d : dirs)
    for (const char* n : names)
      for (const char* x : exts) tokens.push_back(std::string("C:\\") + d + "\\" + n + "." + x);
  ASSERT_EQ(tokens.size(), 1000u);
  auto e = hashing(64, 0);
  std::vector<Vector> v;
  for (const auto& t : tokens) v.push_back(embed_token(e, t));
  double worst = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      EXPECT_NE(v[i], v[j]) << tokens[i] << " / " << tokens[j];
      worst = std::max(worst, cosine(v[i], v[j]));
    }
  EXPECT_LT(worst, 0.99);
}

TEST(Embed, ExternalTable) {
  ExternalTable t;
  t.dim = 2;
  t.vectors["regopenkey"] = {0.1, 0.2};
  t.oov = OovPolicy::Zero;
  TokenEmbedder e{t};
  EXPECT_EQ(embed_token(e, "RegOpenKey"), (Vector{0.1, 0.2}));
  EXPECT_EQ(embed_token(e, "other"), (Vector{0.0, 0.0}));
  std::get<ExternalTable>(e.backend).oov = OovPolicy::Error;
  try {
    embed_token(e, "other");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::OovToken);
  }
  std::get<ExternalTable>(e.backend).oov = OovPolicy::HashFallback;
  EXPECT_EQ(embed_token(e, "other"), embed_token(hashing(2, 0), "other"));
}

TEST(Embed, LoadTable) {
  auto t = load_embedding_table("RegOpenKey\t0.1 0.2\nx\t1 2\n", OovPolicy::Zero);
  EXPECT_EQ(t.dim, 2u);
  EXPECT_EQ(t.vectors.at("regopenkey"), (Vector{0.1, 0.2}));
  try {
    load_embedding_table("a\t1 2\nb\t1 2 3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimMismatch);
  }
}

TEST(Embed, EventConcatenation) {
  ExternalTable t;
  t.dim = 2;
  t.oov = OovPolicy::Error;
  t.vectors = {{"groupagent.exe", {1, 0}}, {"regopenkey", {0, 1}}, {"hklm\\x", {0.5, 0.5}}, {"hklm\\y", {2, 2}}};
  TokenEmbedder e{t};
  ingest::CanonicalEvent a;
  a.seq_id = 9;
  a.subject = "groupagent.exe";
  a.action = "RegOpenKey";
  a.object = "HKLM\\x";
  auto v = embed_event(e, a);
  EXPECT_EQ(v.values, (Vector{1, 0, 0, 1, 0.5, 0.5}));
  EXPECT_EQ(v.event_ref, 9u);
  auto b = a;
  b.object = "HKLM\\y";
  auto w = embed_event(e, b);
  EXPECT_TRUE(std::equal(v.values.begin(), v.values.begin() + 4, w.values.begin()));
  auto batch = embed_events(e, {a, b});
  EXPECT_EQ(batch[0].values, v.values);
  EXPECT_EQ(batch[1].values, w.values);

  ExternalTable ones;
  ones.dim = 2;
  ones.oov = OovPolicy::Error;
  ones.vectors = {{"s", {1, 0}}, {"a", {1, 0}}, {"o", {1, 0}}};
  ingest::CanonicalEvent c;
  c.subject = "s", c.action = "a", c.object = "o";
  EXPECT_EQ(embed_event(TokenEmbedder{ones}, c).values, (Vector{1, 0, 1, 0, 1, 0}));
}

TEST(Embed, PcaLineDataMatchesAnalytic) {
  const auto pts = line_data();
  auto m = pca_fit(pts, 1);
  std::vector<std::pair<double, double>> pairs;
  for (const auto& p : pts) pairs.emplace_back(p[0], p[1]);
  const auto ref = oracle::pca2(pairs);
  EXPECT_NEAR(m.components(0, 0), ref.v1x, 1e-10);
  EXPECT_NEAR(m.components(0, 1), ref.v1y, 1e-10);
  EXPECT_NEAR(m.components(0, 0), 1 / std::sqrt(5.0), 1e-10);
  EXPECT_NEAR(m.explained_variance[0], ref.lambda1, 1e-8);
  EXPECT_NEAR(m.explained_variance[0] / (ref.lambda1 + ref.lambda2), 1.0, 1e-8);
  EXPECT_NEAR(pca_transform(m, Vector{1, 2})[0], 2.2360679, 1e-6);
  EXPECT_NEAR(pca_transform(m, Vector{2, -1})[0], 0.0, 1e-8);
  EXPECT_NEAR(pca_transform(m, m.mean)[0], 0.0, 1e-15);
}

TEST(Embed, PcaRandom2dMatchesAnalytic) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> pts;
    std::vector<std::pair<double, double>> pairs;
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    for (int i = 0; i < 30; ++i) {
      const double u = rng.normal(), w = rng.normal() * 0.3;
      pts.push_back({a * u + w, b * u - w});
      pairs.emplace_back(pts.back()[0], pts.back()[1]);
    }
    auto m = pca_fit(pts, 2);
    auto ref = oracle::pca2(pairs);
    EXPECT_NEAR(m.explained_variance[0], ref.lambda1, 1e-9);
    EXPECT_NEAR(m.explained_variance[1], ref.lambda2, 1e-9);
    EXPECT_NEAR(m.components(0, 0), ref.v1x, 1e-7);
    EXPECT_NEAR(m.components(0, 1), ref.v1y, 1e-7);
  }
}

TEST(Embed, PcaOrthonormalOrderedLossless) {
  Rng rng(9);
  std::vector<Vector> pts;
  for (int i = 0; i < 60; ++i) pts.push_back(oracle::random_vector(rng, 12, 1.0));
  auto m = pca_fit(pts, 12);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      EXPECT_NEAR(dot(m.components.row(i), m.components.row(j)), i == j ? 1.0 : 0.0, 1e-8);
  for (std::size_t i = 1; i < 12; ++i) EXPECT_GE(m.explained_variance[i - 1], m.explained_variance[i]);
  for (std::size_t i = 0; i < 12; ++i) {
    std::size_t first = 0;
    while (std::abs(m.components(i, first)) < 1e-12) ++first;
    EXPECT_GT(m.components(i, first), 0.0);
  }
  for (const auto& p : pts) {
    auto back = pca_inverse(m, pca_transform(m, p));
    for (std::size_t d = 0; d < p.size(); ++d) EXPECT_NEAR(back[d], p[d], 1e-8);
  }
  // Linearity for centered combinations.
  const double a = 0.3, b = -1.7;
  Vector mix(12);
  for (std::size_t d = 0; d < 12; ++d) mix[d] = a * pts[0][d] + b * pts[1][d] + (1 - a - b) * m.mean[d];
  auto tm = pca_transform(m, mix), t0 = pca_transform(m, pts[0]), t1 = pca_transform(m, pts[1]);
  for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(tm[d], a * t0[d] + b * t1[d], 1e-8);
}

TEST(Embed, PcaDegenerateAndErrors) {
  auto m = pca_fit({{1, 1}, {1, 1}, {1, 1}}, 1);
  EXPECT_EQ(m.explained_variance[0], 0.0);
  EXPECT_THROW(pca_fit({{1, 2}}, 1), Error);
  try {
    pca_transform(m, Vector{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimMismatch);
  }
}

TEST(Embed, PcaJsonRoundTrip) {
  auto m = pca_fit(line_data(), 2);
  EXPECT_EQ(pca_from_json(nlohmann::json::parse(to_json(m).dump())), m);
}
