// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include "apthunt/anomaly.hpp"
#include "apthunt/crf.hpp"
#include "apthunt/embed.hpp"
#include "apthunt/evalkit.hpp"
#include "apthunt/matcher.hpp"
#include "apthunt/pipeline.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace apthunt;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and limits.
constexpr double kCrfTol = 1e-10;
constexpr double kCrfSeconds = 10.0;
constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradSeconds = 30.0;
constexpr double kNuBand = 0.05;
constexpr double kAlphaSumTol = 1e-8;
constexpr double kOrthoTol = 1e-8;
constexpr double kProjTol = 1e-6;
constexpr double kProjection = 2.2360679;
constexpr double kMinMacroF1 = 0.80;
constexpr std::size_t kMinTop1 = 4;
constexpr std::size_t kMinTop3 = 5;
constexpr double kSuiteSeconds = 15 * 60.0;

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome crf_correctness() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  double worst = 0.0;
  std::size_t path_mismatch = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t steps = 1 + rng.below(6), k = 1 + rng.below(5);
    const Matrix em = oracle::random_matrix(rng, steps, k, 3.0), tr = oracle::random_matrix(rng, k, k, 3.0);
    const Vector st = oracle::random_vector(rng, k, 2.0), en = oracle::random_vector(rng, k, 2.0);
    const auto ref = oracle::crf_brute(em, tr, st, en);
    worst = std::max(worst, std::abs(crf::crf_log_partition(em, tr, st, en) - ref.log_z));
    const auto vit = crf::crf_viterbi(em, tr, st, en);
    worst = std::max(worst, std::abs(vit.score - ref.best_score));
    path_mismatch += vit.tags != ref.best;
  }
  const double secs = seconds_since(t0);
  return {worst <= kCrfTol && path_mismatch == 0 && secs < kCrfSeconds,
          "200 instances, max |err| " + fmt("%.2e", worst) + ", viterbi mismatches " +
              std::to_string(path_mismatch) + ", " + fmt("%.2f", secs) + " s"};
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const std::size_t steps = 5, k = 4, hidden = 3, input = 6;
  tagger::BiGruCrfModel m{tagger::LabelSet{}, tagger::TaggerParams(input, hidden, k)};
  Rng rng(77);
  tagger::for_each_tensor(m.params, [&](const std::string&, std::span<double> t) {
    for (double& x : t) x = rng.uniform(-0.8, 0.8);
  });
  std::vector<Vector> xs;
  std::vector<std::size_t> gold;
  for (std::size_t t = 0; t < steps; ++t) {
    xs.push_back(oracle::random_vector(rng, input, 1.0));
    gold.push_back(rng.below(k));
  }
  const auto checks = oracle::gradient_check(m, xs, gold, kGradEps);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : checks)
    if (c.rel_error >= worst) worst = c.rel_error, worst_name = c.name;
  const double secs = seconds_since(t0);
  return {worst < kGradTol && checks.size() == 23 && secs < kGradSeconds,
          std::to_string(checks.size()) + " tensors, max rel err " + fmt("%.2e", worst) + " (" + worst_name + "), " +
              fmt("%.2f", secs) + " s"};
}

Outcome nu_property() {
  bool ok = true;
  std::ostringstream d;
  double worst_gap = 0.0, worst_sum = 0.0;
  for (double nu : {0.1, 0.5}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng rng(seed);
      std::vector<Vector> x;
      for (int i = 0; i < 500; ++i) x.push_back({rng.normal(), rng.normal()});
      const auto m = anomaly::ocsvm_fit(x, {.nu = nu, .gamma = 0.5});
      std::size_t out = 0;
      for (const auto& v : x) out += anomaly::ocsvm_decision(m, v) < 0.0;
      const double frac = double(out) / 500.0;
      const double sum = std::accumulate(m.alphas.begin(), m.alphas.end(), 0.0);
      bool box = true;
      for (double a : m.alphas) box = box && a > 0.0 && a <= m.upper_bound();
      worst_gap = std::max(worst_gap, std::abs(frac - nu));
      worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
      ok = ok && std::abs(frac - nu) <= kNuBand && std::abs(sum - 1.0) <= kAlphaSumTol && box;
    }
  }
  d << "10 fits, max |outlier frac - nu| " << fmt("%.3f", worst_gap) << ", max |sum alpha - 1| "
    << fmt("%.1e", worst_sum);
  return {ok, d.str()};
}

Outcome pca() {
  std::vector<Vector> line;
  for (int t = -2; t <= 2; ++t) line.push_back({double(t), 2.0 * t});
  const auto m = embed::pca_fit(line, 1);
  const double cx = m.components(0, 0), cy = m.components(0, 1);
  const double dir_err = std::max(std::abs(cx - 1 / std::sqrt(5.0)), std::abs(cy - 2 / std::sqrt(5.0)));
  const double proj = embed::pca_transform(m, Vector{1, 2})[0];

  Rng rng(3);
  std::vector<Vector> cloud;
  for (int i = 0; i < 80; ++i) cloud.push_back(oracle::random_vector(rng, 24, 1.0));
  const auto full = embed::pca_fit(cloud, 24);
  double ortho = 0.0;
  for (std::size_t i = 0; i < 24; ++i)
    for (std::size_t j = 0; j < 24; ++j)
      ortho = std::max(ortho, std::abs(dot(full.components.row(i), full.components.row(j)) - (i == j ? 1.0 : 0.0)));
  return {ortho <= kOrthoTol && dir_err <= kOrthoTol && std::abs(proj - kProjection) <= kProjTol,
          "orthonormality err " + fmt("%.1e", ortho) + ", component err " + fmt("%.1e", dir_err) +
              ", projection " + fmt("%.9f", proj)};
}

Outcome ged() {
  Rng rng(99);
  std::size_t mismatch = 0, axioms = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto q = oracle::random_graph(rng, 6, "q"), c = oracle::random_graph(rng, 6, "c");
    const double raw = matcher::ged_exact(q, c).raw;
    mismatch += raw != oracle::ged_brute(q, c);
    if (matcher::ged_exact(q, q).raw != 0.0) ++axioms;
    if (matcher::ged_exact(c, q).raw != raw) ++axioms;
  }
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = oracle::random_graph(rng, 5, "a"), b = oracle::random_graph(rng, 5, "b"),
               c = oracle::random_graph(rng, 5, "c");
    if (matcher::ged_exact(a, c).raw > matcher::ged_exact(a, b).raw + matcher::ged_exact(b, c).raw) ++axioms;
  }
  graph::AbilityGraph empty, three;
  three.labels = {"A", "B", "C"};
  three.stages.resize(3);
  three.edges = {{0, 1}, {1, 2}};
  const auto e = matcher::ged_exact(empty, three);
  const bool norm_ok = e.raw == 5.0 && e.normalized == 1.0;
  return {mismatch == 0 && axioms == 0 && norm_ok,
          "200 oracle pairs, mismatches " + std::to_string(mismatch) + ", axiom violations " +
              std::to_string(axioms) + ", empty vs (3,2) = " + fmt("%.17g", e.normalized)};
}

Outcome topk() {
  using matcher::TopkCase;
  const std::vector<TopkCase> cases{{"A", {"A", "B", "C", "D", "E"}},
                                    {"B", {"B", "A", "C", "D", "E"}},
                                    {"C", {"A", "B", "C", "D", "E"}},
                                    {"D", {"A", "B", "C", "E"}},
                                    {"E", {"A", "B", "C", "D"}}};
  const double t1 = matcher::topk_score(cases, 1), t3 = matcher::topk_score(cases, 3),
               t5 = matcher::topk_score(cases, 5);
  return {t1 == 0.4 && t3 == 0.6 && t5 == 0.6,
          "top-1 " + fmt("%.17g", t1) + ", top-3 " + fmt("%.17g", t3) + ", top-5 " + fmt("%.17g", t5)};
}

// ---------------------------------------------------------------------------
// End to end

const std::vector<std::string> kCampaignFiles{"higaisa", "apt28", "cobaltgroup", "gamaredon", "patchwork"};

struct E2E {
  fs::path work;
  pipeline::PipelineConfig cfg;
  std::vector<graph::AbilityGraph> campaigns;
};

E2E setup_e2e() {
  E2E e;
  e.work = fs::path(APTHUNT_TEST_WORK) / "acceptance";
  fs::remove_all(e.work);
  fs::create_directories(e.work);
  pipeline::apply_config_text(e.cfg, pipeline::read_file(APTHUNT_DATA_DIR "/pipeline.conf"));
  e.cfg.campaigns = APTHUNT_DATA_DIR "/campaigns";
  for (const auto& name : kCampaignFiles)
    e.campaigns.push_back(graph::graph_from_json(pipeline::read_json(e.cfg.campaigns + "/" + name + ".json")));
  return e;
}

std::vector<ingest::CanonicalEvent> scenario(const graph::AbilityGraph& c, std::uint64_t seed) {
  return evalkit::generate_scenario(evalkit::ScenarioSpec{c, 10000, 0.01, seed}).events;
}

/// Four training scenarios per campaign, seeds 1000..1019, disjoint from test seeds 1..5.
pipeline::Models train(const E2E& e) {
  std::vector<std::vector<ingest::CanonicalEvent>> corpora;
  for (std::size_t i = 0; i < e.campaigns.size(); ++i)
    for (std::uint64_t j = 0; j < 4; ++j) corpora.push_back(scenario(e.campaigns[i], 1000 + 4 * i + j));
  return pipeline::train_models(corpora, e.cfg);
}

nlohmann::json infer(const E2E& e, const fs::path& models, const fs::path& input, const fs::path& out) {
  auto cfg = e.cfg;
  cfg.models = models.string();
  cfg.input = input.string();
  cfg.out = out.string();
  return pipeline::run_pipeline(cfg);
}

Outcome end_to_end(const E2E& e, Clock::time_point suite_start) {
  const auto t0 = Clock::now();
  pipeline::save_models(e.work / "models", train(e));
  const double train_secs = seconds_since(t0);

  std::size_t top1 = 0, top3 = 0;
  std::vector<std::pair<std::string, evalkit::MetricReport>> rows;
  std::ostringstream ranks;
  for (std::size_t i = 0; i < e.campaigns.size(); ++i) {
    const auto& c = e.campaigns[i];
    const fs::path input = e.work / ("test_" + kCampaignFiles[i] + ".jsonl");
    pipeline::save_events(input, scenario(c, i + 1));
    const auto report = infer(e, e.work / "models", input, e.work / ("out_" + kCampaignFiles[i]));
    std::size_t rank = 0;
    for (std::size_t r = 0; r < report["ranking"].size(); ++r)
      if (report["ranking"][r]["campaign"] == c.name) rank = r + 1;
    top1 += rank == 1;
    top3 += rank >= 1 && rank <= 3;
    const auto tagged = pipeline::load_events(e.work / ("out_" + kCampaignFiles[i]) / "tags.jsonl");
    const auto gold = pipeline::load_events(input);
    rows.emplace_back(c.name, pipeline::evaluate(tagged, gold));
    ranks << (i ? " " : "") << c.name << "@" << rank;
  }
  double f1 = 0.0;
  for (const auto& [name, r] : rows) f1 += r.f1;
  f1 /= double(rows.size());
  std::cout << evalkit::format_table(rows);
  const double suite = seconds_since(suite_start);
  return {top1 >= kMinTop1 && top3 >= kMinTop3 && f1 >= kMinMacroF1 && suite < kSuiteSeconds,
          "ranks " + ranks.str() + "; top-1 " + std::to_string(top1) + "/5, top-3 " + std::to_string(top3) +
              "/5, mean macro F1 " + fmt("%.4f", f1) + ", training " + fmt("%.0f", train_secs) + " s, suite so far " +
              fmt("%.0f", suite) + " s"};
}

/// Retrains from scratch into a second directory and reruns one scenario.
Outcome determinism(const E2E& e) {
  pipeline::save_models(e.work / "models_again", train(e));
  bool same_models = true;
  for (const char* f : {pipeline::kEmbedderFile, pipeline::kPcaFile, pipeline::kOcsvmFile, pipeline::kTaggerFile})
    same_models = same_models && pipeline::read_file(e.work / "models" / f) ==
                                     pipeline::read_file(e.work / "models_again" / f);
  const fs::path input = e.work / ("test_" + kCampaignFiles[0] + ".jsonl");
  infer(e, e.work / "models_again", input, e.work / "again");
  const std::string a = pipeline::read_file(e.work / ("out_" + kCampaignFiles[0]) / "report.json");
  const std::string b = pipeline::read_file(e.work / "again/report.json");
  return {same_models && a == b && !a.empty(),
          std::string("model files ") + (same_models ? "identical" : "differ") + ", report.json " +
              (a == b ? "identical" : "differs") + " (" + std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main() {
  const auto suite_start = Clock::now();
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  " << o.detail << std::endl;
  };

  report("crf-correctness", crf_correctness);
  report("gradient-fidelity", gradient_fidelity);
  report("ocsvm-nu-property", nu_property);
  report("pca", pca);
  report("ged", ged);
  report("topk-arithmetic", topk);

  E2E e;
  try {
    e = setup_e2e();
  } catch (const std::exception& ex) {
    std::cout << "setup failed: " << ex.what() << std::endl;
    std::cout << "FAIL  end-to-end-attribution  setup failed\nFAIL  determinism  setup failed" << std::endl;
    return 1;
  }
  report("end-to-end-attribution", [&] { return end_to_end(e, suite_start); });
  report("determinism", [&] { return determinism(e); });

  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : "all criteria passed") << " in "
            << fmt("%.0f", seconds_since(suite_start)) << " s" << std::endl;
  return failures ? 1 : 0;
}
