// SPDX-License-Identifier: Apache-2.0
//
// apthunt: command-line front end for the detection and attribution cascade.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "apthunt/pipeline.hpp"

namespace {

using namespace apthunt;
namespace fs = std::filesystem;
using pipeline::PipelineConfig;

void log_line(const std::string& s) { std::cerr << s << '\n'; }

/// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    pipeline::write_file(path, text);
  }
}

void emit_json(const std::string& path, const nlohmann::json& j) { emit(path, j.dump(2) + "\n"); }

/// --config FILE plus one --<key> flag per config key. Flags win over the file.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "flat key=value configuration file");
    for (const auto& key : pipeline::option_names()) {
      std::string flag = "--" + key;
      for (char& c : flag)
        if (c == '_') c = '-';
      cmd->add_option(flag, values[key], "config key " + key);
    }
  }

  PipelineConfig resolve(CLI::App* cmd) const {
    PipelineConfig c;
    if (!config_file.empty()) pipeline::apply_config_text(c, pipeline::read_file(config_file));
    for (const auto& key : pipeline::option_names()) {
      std::string flag = "--" + key;
      for (char& ch : flag)
        if (ch == '_') ch = '-';
      if (cmd->count(flag) > 0) pipeline::set_option(c, key, values.at(key));
    }
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"apthunt: audit-log ability tagging and APT campaign attribution"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  // ingest
  std::string in_path, out_path;
  bool strict = false;
  auto* ingest_cmd = app.add_subcommand("ingest", "parse a ProcMon CSV or canonical JSONL into canonical JSONL");
  ingest_cmd->add_option("--input", in_path, "input log")->required();
  ingest_cmd->add_option("--out", out_path, "output JSONL (default stdout)");
  ingest_cmd->add_flag("--strict", strict, "fail on the first malformed row");

  // embed
  std::string events_path, models_dir = "models";
  auto* embed_cmd = app.add_subcommand("embed", "embed events and project with the trained PCA");
  embed_cmd->add_option("--events", events_path, "canonical JSONL")->required();
  embed_cmd->add_option("--models", models_dir, "directory with embedder.json and pca.json");
  embed_cmd->add_option("--out", out_path, "output vectors JSON (default stdout)");

  // fit-ocsvm
  std::string vectors_path;
  anomaly::OcSvmParams svm;
  std::uint64_t seed = 0;
  auto* fit_cmd = app.add_subcommand("fit-ocsvm", "fit a one-class SVM on event vectors");
  fit_cmd->add_option("--vectors", vectors_path, "vectors JSON")->required();
  fit_cmd->add_option("--events", events_path, "labeled JSONL; when given only O events are used");
  fit_cmd->add_option("--nu", svm.nu, "outlier fraction bound");
  fit_cmd->add_option("--gamma", svm.gamma, "RBF width (0: median heuristic)");
  fit_cmd->add_option("--tol", svm.tol, "KKT tolerance");
  fit_cmd->add_option("--max-iter", svm.max_iter, "maximum sweeps");
  fit_cmd->add_option("--seed", seed, "seed for the median heuristic");
  fit_cmd->add_option("--out", out_path, "output model JSON (default stdout)");

  // filter
  std::string model_path;
  double threshold = 0.0;
  auto* filter_cmd = app.add_subcommand("filter", "keep events the one-class SVM scores as anomalous");
  filter_cmd->add_option("--events", events_path, "canonical JSONL")->required();
  filter_cmd->add_option("--vectors", vectors_path, "vectors JSON")->required();
  filter_cmd->add_option("--model", model_path, "ocsvm.json")->required();
  filter_cmd->add_option("--threshold", threshold, "keep events with decision <= threshold");
  filter_cmd->add_option("--out", out_path, "output JSONL (default stdout)");

  // train-tagger
  PipelineConfig tcfg;
  auto* train_tagger_cmd = app.add_subcommand("train-tagger", "train the BiGRU-CRF tagger on labeled events");
  train_tagger_cmd->add_option("--events", events_path, "labeled JSONL")->required();
  train_tagger_cmd->add_option("--vectors", vectors_path, "vectors JSON")->required();
  train_tagger_cmd->add_option("--hidden", tcfg.hidden);
  train_tagger_cmd->add_option("--lr", tcfg.lr);
  train_tagger_cmd->add_option("--epochs", tcfg.epochs);
  train_tagger_cmd->add_option("--batch", tcfg.batch);
  train_tagger_cmd->add_option("--clip", tcfg.clip);
  train_tagger_cmd->add_option("--max-window", tcfg.max_window);
  train_tagger_cmd->add_option("--seed", tcfg.seed, "tagger seed");
  train_tagger_cmd->add_option("--out", out_path, "output model JSON (default stdout)");

  // tag
  std::string suspicious_path;
  bool no_mask = false;
  std::size_t max_window = 256;
  auto* tag_cmd = app.add_subcommand("tag", "predict BIO2 tags; events outside --suspicious are O");
  tag_cmd->add_option("--events", events_path, "canonical JSONL")->required();
  tag_cmd->add_option("--vectors", vectors_path, "vectors JSON")->required();
  tag_cmd->add_option("--model", model_path, "tagger.json")->required();
  tag_cmd->add_option("--suspicious", suspicious_path, "subset of events to tag (output of filter)");
  tag_cmd->add_option("--max-window", max_window, "window length");
  tag_cmd->add_flag("--no-mask", no_mask, "disable the BIO transition constraint");
  tag_cmd->add_option("--out", out_path, "output JSONL (default stdout)");

  // build-graph
  std::string tags_path;
  bool no_reduction = false;
  auto* graph_cmd = app.add_subcommand("build-graph", "build the detected ability graph from tagged events");
  graph_cmd->add_option("--tags", tags_path, "tagged JSONL")->required();
  graph_cmd->add_flag("--no-reduction", no_reduction, "keep transitively implied edges");
  graph_cmd->add_option("--out", out_path, "output graph JSON (default stdout)");

  // match
  std::string query_path, corpus_dir = "data/campaigns";
  std::size_t budget = 1'000'000;
  auto* match_cmd = app.add_subcommand("match", "rank campaigns by normalized graph edit distance");
  match_cmd->add_option("--query", query_path, "ability graph JSON")->required();
  match_cmd->add_option("--corpus", corpus_dir, "directory of campaign graph JSON files");
  match_cmd->add_option("--budget", budget, "A* expansion budget per campaign");
  match_cmd->add_option("--out", out_path, "output ranking JSON (default stdout)");

  // eval
  std::vector<std::string> preds, golds, names;
  bool table = false;
  auto* eval_cmd = app.add_subcommand("eval", "event-level macro precision, recall and F1");
  eval_cmd->add_option("--pred", preds, "predicted JSONL (repeatable)")->required();
  eval_cmd->add_option("--gold", golds, "gold JSONL, one per --pred")->required();
  eval_cmd->add_option("--name", names, "row name per pair");
  eval_cmd->add_flag("--table", table, "print an aligned table instead of JSON");
  eval_cmd->add_option("--out", out_path, "output (default stdout)");

  // gen
  std::string campaign_path, templates_path, truth_path;
  evalkit::ScenarioSpec spec;
  bool dump_templates = false;
  auto* gen_cmd = app.add_subcommand("gen", "generate a labeled synthetic scenario");
  gen_cmd->add_option("--campaign", campaign_path, "campaign graph JSON");
  gen_cmd->add_option("--seed", spec.seed);
  gen_cmd->add_option("--benign", spec.benign_event_count, "benign event count");
  gen_cmd->add_option("--rate", spec.malicious_rate, "malicious fraction in (0, 1)");
  gen_cmd->add_option("--templates", templates_path, "template library JSON (default: built-in)");
  gen_cmd->add_option("--truth", truth_path, "write the ground-truth graph here");
  gen_cmd->add_flag("--dump-templates", dump_templates, "print the built-in template library and exit");
  gen_cmd->add_option("--out", out_path, "output JSONL (default stdout)");

  // train
  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "fit embedder, PCA, one-class SVM and tagger into --models");
  train_flags.attach(train_cmd);

  // run
  ConfigFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "full inference cascade with per-stage artifacts in --out");
  run_flags.attach(run_cmd);

  // report
  std::string graph_path, ranking_path, gold_path;
  auto* report_cmd = app.add_subcommand("report", "assemble report.json from stage artifacts");
  report_cmd->add_option("--graph", graph_path, "graph JSON")->required();
  report_cmd->add_option("--ranking", ranking_path, "ranking JSON")->required();
  report_cmd->add_option("--tags", tags_path, "tagged JSONL, for metrics");
  report_cmd->add_option("--gold", gold_path, "events with gold labels, for metrics");
  report_cmd->add_option("--out", out_path, "output report JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*ingest_cmd) {
      auto events = pipeline::load_events(in_path, strict, log_line);
      emit(out_path, ingest::write_canonical_jsonl(ingest::sort_chronologically(std::move(events))));
    } else if (*embed_cmd) {
      const auto events = pipeline::load_events(events_path);
      const fs::path dir = models_dir;
      const auto embedder =
          pipeline::embedder_from_json(pipeline::read_json(pipeline::require_model_file(dir, pipeline::kEmbedderFile)), dir);
      const auto pca = embed::pca_from_json(pipeline::read_json(pipeline::require_model_file(dir, pipeline::kPcaFile)));
      emit_json(out_path, pipeline::vectors_to_json(pipeline::embed_stage(events, embedder, pca)));
    } else if (*fit_cmd) {
      const auto vectors = pipeline::vectors_from_json(pipeline::read_json(vectors_path));
      std::set<std::uint64_t> benign;
      if (!events_path.empty())
        for (const auto& e : pipeline::load_events(events_path))
          if (e.label.value_or("O") == "O") benign.insert(e.seq_id);
      std::vector<Vector> x;
      for (const auto& v : vectors)
        if (events_path.empty() || benign.count(v.event_ref)) x.push_back(v.values);
      if (svm.gamma <= 0.0) svm.gamma = anomaly::median_gamma(x, seed);
      const auto model = anomaly::ocsvm_fit(x, svm);
      if (!model.converged) log_line("warning: one-class SVM stopped at max_iter before convergence");
      emit_json(out_path, anomaly::to_json(model));
    } else if (*filter_cmd) {
      const auto events = pipeline::load_events(events_path);
      const auto vectors = pipeline::vectors_from_json(pipeline::read_json(vectors_path));
      const auto model = anomaly::ocsvm_from_json(pipeline::read_json(model_path));
      emit(out_path, ingest::write_canonical_jsonl(pipeline::filter_stage(events, vectors, model, threshold)));
    } else if (*train_tagger_cmd) {
      const auto events = pipeline::load_events(events_path);
      const auto vectors = pipeline::vectors_from_json(pipeline::read_json(vectors_path));
      const auto labels = pipeline::labels_of(events);
      const auto by_seq = pipeline::detail::index_vectors(vectors);
      std::vector<tagger::TrainingSequence> data;
      for (const auto& w : ingest::sessionize(events, tcfg.max_window)) {
        tagger::TrainingSequence s;
        s.inputs = pipeline::detail::window_inputs(w, by_seq);
        for (const auto& e : w.events) s.tags.push_back(labels.tag_index(e.label.value_or("O")));
        data.push_back(std::move(s));
      }
      tagger::TrainHyper hyper{tcfg.hidden, tcfg.lr, tcfg.epochs, tcfg.batch, tcfg.tagger_seed(), tcfg.clip};
      const auto model = tagger::train(data, labels, hyper, [&](std::size_t epoch, double loss) {
        log_line("epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(loss));
      });
      emit_json(out_path, tagger::to_json(model));
    } else if (*tag_cmd) {
      const auto events = ingest::sort_chronologically(pipeline::load_events(events_path));
      const auto vectors = pipeline::vectors_from_json(pipeline::read_json(vectors_path));
      const auto model = tagger::tagger_from_json(pipeline::read_json(model_path));
      std::optional<std::vector<ingest::CanonicalEvent>> subset;
      if (!suspicious_path.empty()) subset = pipeline::load_events(suspicious_path);
      PipelineConfig cfg;
      cfg.max_window = max_window;
      cfg.viterbi_mask = !no_mask;
      emit(out_path, ingest::write_canonical_jsonl(pipeline::tag_stage(events, vectors, subset, model, cfg)));
    } else if (*graph_cmd) {
      const auto tagged = pipeline::load_events(tags_path);
      emit_json(out_path, graph::to_json(pipeline::graph_stage(tagged, !no_reduction)));
    } else if (*match_cmd) {
      const auto gq = graph::graph_from_json(pipeline::read_json(query_path));
      const auto ranking = pipeline::match_stage(gq, pipeline::load_campaigns(corpus_dir), budget);
      emit_json(out_path, matcher::to_json(ranking));
    } else if (*eval_cmd) {
      if (preds.size() != golds.size())
        throw Error(ErrorKind::InvalidArgument, "need one --gold per --pred");
      if (!names.empty() && names.size() != preds.size())
        throw Error(ErrorKind::InvalidArgument, "need one --name per --pred");
      std::vector<std::pair<std::string, evalkit::MetricReport>> rows;
      for (std::size_t i = 0; i < preds.size(); ++i)
        rows.emplace_back(names.empty() ? fs::path(golds[i]).stem().string() : names[i],
                          pipeline::evaluate(pipeline::load_events(preds[i]), pipeline::load_events(golds[i])));
      if (table) {
        emit(out_path, evalkit::format_table(rows));
      } else if (rows.size() == 1) {
        emit_json(out_path, evalkit::to_json(rows.front().second));
      } else {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [name, r] : rows) j[name] = evalkit::to_json(r);
        emit_json(out_path, j);
      }
    } else if (*gen_cmd) {
      if (!templates_path.empty()) spec.templates = templates::library_from_json(pipeline::read_json(templates_path));
      if (dump_templates) {
        emit_json(out_path, templates::to_json(spec.templates));
        return 0;
      }
      if (campaign_path.empty()) throw Error(ErrorKind::InvalidArgument, "--campaign is required");
      spec.campaign = graph::graph_from_json(pipeline::read_json(campaign_path));
      const auto scenario = evalkit::generate_scenario(spec);
      emit(out_path, ingest::write_canonical_jsonl(scenario.events));
      if (!truth_path.empty()) pipeline::write_json(truth_path, graph::to_json(scenario.ground_truth));
    } else if (*train_cmd) {
      const auto cfg = train_flags.resolve(train_cmd);
      std::vector<std::vector<ingest::CanonicalEvent>> corpora;
      for (const auto& f : cfg.train) corpora.push_back(pipeline::load_events(f, cfg.strict, log_line));
      const auto models = pipeline::train_models(corpora, cfg, log_line);
      pipeline::save_models(cfg.models, models, cfg.embedding_table);
      log_line("models written to " + cfg.models);
    } else if (*run_cmd) {
      const auto cfg = run_flags.resolve(run_cmd);
      const auto report = pipeline::run_pipeline(cfg, log_line);
      std::cout << report.dump(2) << '\n';
    } else if (*report_cmd) {
      const auto gq = graph::graph_from_json(pipeline::read_json(graph_path));
      const auto rj = pipeline::read_json(ranking_path);
      std::vector<matcher::RankEntry> ranking;
      for (const auto& e : rj)
        ranking.push_back({e.at("campaign").get<std::string>(), e.at("raw").get<double>(),
                           e.at("normalized").get<double>(), e.at("expanded_states").get<std::size_t>(),
                           e.at("exact").get<bool>()});
      std::optional<evalkit::MetricReport> metrics;
      if (!tags_path.empty() && !gold_path.empty()) {
        const auto gold = pipeline::load_events(gold_path);
        if (pipeline::has_gold(gold)) metrics = pipeline::evaluate(pipeline::load_events(tags_path), gold);
      }
      emit_json(out_path, pipeline::make_report(gq, ranking, metrics));
    }
  } catch (const StageError& e) {
    std::cerr << "apthunt: stage '" << e.stage() << "' failed: " << e.detail() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "apthunt: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
