// SPDX-License-Identifier: Apache-2.0
// Small in-process walk through the cascade: generate labeled scenarios,
// train every model, then attribute a held-out scenario.
//
//   apthunt-demo [campaign-dir]
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "apthunt/evalkit.hpp"
#include "apthunt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace apthunt;

int main(int argc, char** argv) {
  const fs::path campaign_dir = argc > 1 ? argv[1] : "data/campaigns";
  try {
    const auto campaigns = pipeline::load_campaigns(campaign_dir);

    // Reduced sizes so the demo finishes in well under a minute.
    pipeline::PipelineConfig cfg;
    cfg.embed_dim = 32;
    cfg.pca_dim = 96;
    cfg.ocsvm_samples = 1000;
    cfg.hidden = 32;
    cfg.epochs = 10;
    cfg.batch = 2;
    cfg.lr = 0.05;
    cfg.max_window = 128;

    std::vector<std::vector<ingest::CanonicalEvent>> corpora;
    for (std::size_t i = 0; i < campaigns.size(); ++i)
      for (std::uint64_t j = 0; j < 3; ++j)
        corpora.push_back(evalkit::generate_scenario({campaigns[i], 3000, 0.02, 500 + 3 * i + j}).events);
    std::cout << "training on " << corpora.size() << " generated scenarios\n";
    const auto models =
        pipeline::train_models(corpora, cfg, [](const std::string& s) { std::cout << "  " << s << '\n'; });

    const auto& target = campaigns.front();
    const auto test = evalkit::generate_scenario({target, 3000, 0.02, 7}).events;
    std::cout << "\nheld-out scenario: " << target.name << ", " << test.size() << " events\n";

    const auto vectors = pipeline::embed_stage(test, models.embedder, models.pca);
    const auto suspicious = pipeline::filter_stage(test, vectors, models.ocsvm, cfg.threshold);
    std::cout << "one-class SVM kept " << suspicious.size() << " suspicious events\n";
    const auto tagged = pipeline::tag_stage(test, vectors, suspicious, models.tagger, cfg);
    const auto gq = pipeline::graph_stage(tagged, cfg.transitive_reduction);

    std::cout << "detected ability chain:";
    for (const auto& a : gq.labels) std::cout << ' ' << a;
    std::cout << "\n\nranking (normalized GED):\n";
    for (const auto& r : pipeline::match_stage(gq, campaigns, cfg.ged_budget))
      std::cout << "  " << std::left << std::setw(14) << r.campaign << std::fixed << std::setprecision(3)
                << r.normalized << '\n';

    const std::vector<std::pair<std::string, evalkit::MetricReport>> rows{
        {target.name, pipeline::evaluate(tagged, test)}};
    std::cout << '\n' << evalkit::format_table(rows);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
