// SPDX-License-Identifier: Apache-2.0
//
// Cascade orchestration: configuration, artifact I/O, training and the
// ingest -> embed -> filter -> tag -> graph -> match run.
//
// Every stage reads and writes the same versioned JSON artifacts whether it
// runs inside run_pipeline or as a separate subcommand, so decomposed runs
// reproduce the monolithic report byte for byte.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "apthunt/anomaly.hpp"
#include "apthunt/embed.hpp"
#include "apthunt/error.hpp"
#include "apthunt/evalkit.hpp"
#include "apthunt/graph.hpp"
#include "apthunt/ingest.hpp"
#include "apthunt/matcher.hpp"
#include "apthunt/random.hpp"
#include "apthunt/tagger.hpp"

namespace apthunt::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

inline nlohmann::json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("/", path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
  // paths
  std::string input;
  std::vector<std::string> train;  // labeled canonical JSONL files
  std::string models = "models";
  std::string campaigns = "data/campaigns";
  std::string out = "out";
  std::string embedding_table;

  // embed
  std::size_t embed_dim = 64;
  std::string oov = "hash-fallback";
  std::size_t pca_dim = 192;  // 3 * embed_dim: a rotation, see README

  // anomaly
  double nu = 0.1;
  double gamma = 0.0;  // 0 selects the median heuristic at fit time
  double threshold = 0.0;
  std::size_t ocsvm_samples = 2000;
  std::size_t ocsvm_max_iter = 1000;
  double ocsvm_tol = 1e-6;

  // sequences and tagger
  std::size_t max_window = 256;
  bool per_pid = false;
  std::size_t hidden = 64;
  double lr = 0.01;
  std::size_t epochs = 20;
  std::size_t batch = 32;
  double clip = 5.0;

  // matcher
  std::size_t ged_budget = 1'000'000;

  // flags
  bool strict = false;
  bool tag_suspicious_only = true;
  bool transitive_reduction = true;
  bool viterbi_mask = true;

  std::uint64_t seed = 0;

  // Per-stage seeds derive from `seed` by fixed offsets.
  std::uint64_t hash_seed() const { return seed; }
  std::uint64_t sample_seed() const { return seed + 1; }
  std::uint64_t tagger_seed() const { return seed + 2; }
  std::uint64_t gamma_seed() const { return seed + 3; }
};

namespace detail {

inline bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw Error(ErrorKind::InvalidArgument, key + ": expected boolean, got '" + std::string(v) + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T x{};
  in >> x;
  if (!in || !in.eof()) throw Error(ErrorKind::InvalidArgument, key + ": expected number, got '" + v + "'");
  return x;
}

}  // namespace detail

/// Names accepted by set_option, in the order `describe` prints them.
inline const std::vector<std::string>& option_names() {
  static const std::vector<std::string> names{
      "input",     "train",       "models",   "campaigns",  "out",        "embedding_table", "embed_dim",
      "oov",       "pca_dim",     "nu",       "gamma",      "threshold",  "ocsvm_samples",   "ocsvm_max_iter",
      "ocsvm_tol", "max_window",  "per_pid",  "hidden",     "lr",         "epochs",          "batch",
      "clip",      "ged_budget",  "strict",   "tag_suspicious_only",      "transitive_reduction",
      "viterbi_mask", "seed"};
  return names;
}

/// Applies one key=value setting. `train` appends a comma-separated list.
inline void set_option(PipelineConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "input") c.input = value;
  else if (key == "train") {
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');)
      if (auto t = ingest::detail::trim(item); !t.empty()) c.train.push_back(t);
  } else if (key == "models") c.models = value;
  else if (key == "campaigns") c.campaigns = value;
  else if (key == "out") c.out = value;
  else if (key == "embedding_table") c.embedding_table = value;
  else if (key == "embed_dim") c.embed_dim = parse_number<std::size_t>(key, value);
  else if (key == "oov") c.oov = embed::to_string(embed::parse_oov_policy(value));
  else if (key == "pca_dim") c.pca_dim = parse_number<std::size_t>(key, value);
  else if (key == "nu") c.nu = parse_number<double>(key, value);
  else if (key == "gamma") c.gamma = parse_number<double>(key, value);
  else if (key == "threshold") c.threshold = parse_number<double>(key, value);
  else if (key == "ocsvm_samples") c.ocsvm_samples = parse_number<std::size_t>(key, value);
  else if (key == "ocsvm_max_iter") c.ocsvm_max_iter = parse_number<std::size_t>(key, value);
  else if (key == "ocsvm_tol") c.ocsvm_tol = parse_number<double>(key, value);
  else if (key == "max_window") c.max_window = parse_number<std::size_t>(key, value);
  else if (key == "per_pid") c.per_pid = parse_bool(key, value);
  else if (key == "hidden") c.hidden = parse_number<std::size_t>(key, value);
  else if (key == "lr") c.lr = parse_number<double>(key, value);
  else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, value);
  else if (key == "batch") c.batch = parse_number<std::size_t>(key, value);
  else if (key == "clip") c.clip = parse_number<double>(key, value);
  else if (key == "ged_budget") c.ged_budget = parse_number<std::size_t>(key, value);
  else if (key == "strict") c.strict = parse_bool(key, value);
  else if (key == "tag_suspicious_only") c.tag_suspicious_only = parse_bool(key, value);
  else if (key == "transitive_reduction") c.transitive_reduction = parse_bool(key, value);
  else if (key == "viterbi_mask") c.viterbi_mask = parse_bool(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else throw Error(ErrorKind::InvalidArgument, "unknown config key '" + key + "'");
}

/// Flat `key = value` lines; `#` starts a comment.
inline void apply_config_text(PipelineConfig& c, std::string_view text) {
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = ingest::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(ErrorKind::InvalidArgument, line_no, "expected key = value");
    try {
      set_option(c, ingest::detail::trim(line.substr(0, eq)), ingest::detail::trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw ParseError(e.kind(), line_no, e.detail());
    }
  }
}

inline std::string describe(const PipelineConfig& c) {
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  std::string train;
  for (const auto& t : c.train) train += (train.empty() ? "" : ",") + t;
  o << "input = " << c.input << "\ntrain = " << train << "\nmodels = " << c.models << "\ncampaigns = " << c.campaigns
    << "\nout = " << c.out << "\nembedding_table = " << c.embedding_table << "\nembed_dim = " << c.embed_dim
    << "\noov = " << c.oov << "\npca_dim = " << c.pca_dim << "\nnu = " << c.nu << "\ngamma = " << c.gamma
    << "\nthreshold = " << c.threshold << "\nocsvm_samples = " << c.ocsvm_samples
    << "\nocsvm_max_iter = " << c.ocsvm_max_iter << "\nocsvm_tol = " << c.ocsvm_tol
    << "\nmax_window = " << c.max_window << "\nper_pid = " << b(c.per_pid) << "\nhidden = " << c.hidden
    << "\nlr = " << c.lr << "\nepochs = " << c.epochs << "\nbatch = " << c.batch << "\nclip = " << c.clip
    << "\nged_budget = " << c.ged_budget << "\nstrict = " << b(c.strict)
    << "\ntag_suspicious_only = " << b(c.tag_suspicious_only)
    << "\ntransitive_reduction = " << b(c.transitive_reduction) << "\nviterbi_mask = " << b(c.viterbi_mask)
    << "\nseed = " << c.seed << "\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Artifacts

using Log = std::function<void(const std::string&)>;

/// .csv is parsed as a ProcMon export, anything else as canonical JSONL.
inline std::vector<ingest::CanonicalEvent> load_events(const fs::path& path, bool strict = false,
                                                       const Log& log = {}) {
  const std::string text = read_file(path);
  auto ext = ingest::detail::lower(path.extension().string());
  ingest::ParseResult r = ext == ".csv"
                              ? ingest::parse_procmon_csv(text, strict ? ingest::ParseMode::Strict
                                                                       : ingest::ParseMode::Lenient)
                              : ingest::parse_canonical_jsonl(text);
  if (log)
    for (const auto& issue : r.issues)
      log(path.string() + ":" + std::to_string(issue.line) + ": skipped (" + to_string(issue.kind) +
          "): " + issue.message);
  return std::move(r.events);
}

inline void save_events(const fs::path& path, const std::vector<ingest::CanonicalEvent>& events) {
  write_file(path, ingest::write_canonical_jsonl(events));
}

inline nlohmann::json vectors_to_json(const std::vector<embed::EventVector>& vectors) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& v : vectors) arr.push_back({{"seq_id", v.event_ref}, {"values", v.values}});
  return {{"version", 1}, {"dim", vectors.empty() ? 0 : vectors.front().values.size()}, {"vectors", std::move(arr)}};
}

inline std::vector<embed::EventVector> vectors_from_json(const nlohmann::json& j) {
  require_version(j, 1);
  const auto dim = require_field(j, "dim", "").get<std::size_t>();
  const auto& arr = require_field(j, "vectors", "");
  if (!arr.is_array()) throw SchemaError("/vectors", "expected array");
  std::vector<embed::EventVector> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "/vectors/" + std::to_string(i);
    embed::EventVector v;
    v.event_ref = require_field(arr[i], "seq_id", path).get<std::uint64_t>();
    v.values = vector_from_json(require_field(arr[i], "values", path), path + "/values");
    if (v.values.size() != dim)
      throw Error(ErrorKind::DimMismatch, path + ": " + std::to_string(v.values.size()) + " values, expected " +
                                              std::to_string(dim));
    out.push_back(std::move(v));
  }
  return out;
}

/// Table paths are stored relative to the embedder file when possible.
inline embed::TokenEmbedder embedder_from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  require_version(j, 1);
  const auto backend = require_field(j, "backend", "").get<std::string>();
  const auto dim = require_field(j, "dim", "").get<std::size_t>();
  const auto seed = j.value("seed", std::uint64_t{0});
  if (backend == "feature_hash") return {embed::FeatureHash{dim, seed}};
  if (backend != "external_table") throw SchemaError("/backend", "unknown backend '" + backend + "'");
  fs::path table = require_field(j, "table", "").get<std::string>();
  if (table.is_relative() && !base_dir.empty() && !fs::exists(table)) table = base_dir / table;
  auto t = embed::load_embedding_table(read_file(table), embed::parse_oov_policy(j.value("oov", "hash-fallback")),
                                       seed);
  if (t.dim != dim) throw Error(ErrorKind::DimMismatch, "embedding table dim differs from embedder.json");
  return {std::move(t)};
}

inline embed::TokenEmbedder make_embedder(const PipelineConfig& c) {
  if (c.embedding_table.empty()) return {embed::FeatureHash{c.embed_dim, c.hash_seed()}};
  return {embed::load_embedding_table(read_file(c.embedding_table), embed::parse_oov_policy(c.oov), c.hash_seed())};
}

inline std::vector<graph::AbilityGraph> load_campaigns(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "campaign corpus '" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<graph::AbilityGraph> out;
  for (const auto& f : files) {
    try {
      out.push_back(graph::graph_from_json(read_json(f)));
    } catch (const Error& e) {
      throw Error(e.kind(), f.string() + ": " + e.detail());
    }
  }
  if (out.empty()) throw Error(ErrorKind::Io, "no campaign graphs in '" + dir.string() + "'");
  return out;
}

struct Models {
  embed::TokenEmbedder embedder;
  embed::PcaModel pca;
  anomaly::OcSvmModel ocsvm;
  tagger::BiGruCrfModel tagger;
};

inline constexpr const char* kEmbedderFile = "embedder.json";
inline constexpr const char* kPcaFile = "pca.json";
inline constexpr const char* kOcsvmFile = "ocsvm.json";
inline constexpr const char* kTaggerFile = "tagger.json";

inline fs::path require_model_file(const fs::path& dir, const char* name) {
  fs::path p = dir / name;
  if (!fs::is_regular_file(p)) throw Error(ErrorKind::Io, "missing model file '" + p.string() + "'");
  return p;
}

inline Models load_models(const fs::path& dir) {
  Models m;
  const auto emb = require_model_file(dir, kEmbedderFile);
  m.embedder = embedder_from_json(read_json(emb), dir);
  m.pca = embed::pca_from_json(read_json(require_model_file(dir, kPcaFile)));
  m.ocsvm = anomaly::ocsvm_from_json(read_json(require_model_file(dir, kOcsvmFile)));
  m.tagger = tagger::tagger_from_json(read_json(require_model_file(dir, kTaggerFile)));
  return m;
}

inline void save_models(const fs::path& dir, const Models& m, const std::string& table_path = {}) {
  write_json(dir / kEmbedderFile, embed::embedder_to_json(m.embedder, table_path));
  write_json(dir / kPcaFile, embed::to_json(m.pca));
  write_json(dir / kOcsvmFile, anomaly::to_json(m.ocsvm));
  write_json(dir / kTaggerFile, tagger::to_json(m.tagger));
}

// ---------------------------------------------------------------------------
// Stages

/// Token embedding followed by PCA projection. Events keep their order.
inline std::vector<embed::EventVector> embed_stage(const std::vector<ingest::CanonicalEvent>& events,
                                                   const embed::TokenEmbedder& embedder, const embed::PcaModel& pca) {
  auto raw = embed::embed_events(embedder, events);
  for (auto& v : raw) v.values = embed::pca_transform(pca, v.values);
  return raw;
}

/// Events with decision value <= threshold.
inline std::vector<ingest::CanonicalEvent> filter_stage(const std::vector<ingest::CanonicalEvent>& events,
                                                        const std::vector<embed::EventVector>& vectors,
                                                        const anomaly::OcSvmModel& model, double threshold) {
  ingest::EventSequence all{events, {}};
  return anomaly::filter_events(model, all, vectors, threshold).events;
}

namespace detail {

inline std::unordered_map<std::uint64_t, const Vector*> index_vectors(const std::vector<embed::EventVector>& vectors) {
  std::unordered_map<std::uint64_t, const Vector*> by_seq;
  for (const auto& v : vectors)
    if (!by_seq.emplace(v.event_ref, &v.values).second)
      throw Error(ErrorKind::AlignmentMismatch, "duplicate vector for seq_id " + std::to_string(v.event_ref));
  return by_seq;
}

inline std::vector<Vector> window_inputs(const ingest::EventSequence& w,
                                         const std::unordered_map<std::uint64_t, const Vector*>& by_seq) {
  std::vector<Vector> inputs;
  inputs.reserve(w.events.size());
  for (const auto& e : w.events) {
    auto it = by_seq.find(e.seq_id);
    if (it == by_seq.end())
      throw Error(ErrorKind::AlignmentMismatch, "no vector for event seq_id " + std::to_string(e.seq_id));
    inputs.push_back(*it->second);
  }
  return inputs;
}

}  // namespace detail

/// Tags `subset` (all events when nullopt) in windows of max_window and
/// returns those events in window order with the predicted tag in
/// `label`. Events outside the subset are implicitly O; leaving them out
/// keeps spans contiguous in the sequence the tagger actually saw.
inline std::vector<ingest::CanonicalEvent> tag_stage(const std::vector<ingest::CanonicalEvent>& events,
                                                     const std::vector<embed::EventVector>& vectors,
                                                     const std::optional<std::vector<ingest::CanonicalEvent>>& subset,
                                                     const tagger::BiGruCrfModel& model, const PipelineConfig& cfg) {
  const auto by_seq = detail::index_vectors(vectors);
  std::vector<ingest::CanonicalEvent> out;
  for (auto& w : ingest::sessionize(subset ? *subset : events, {cfg.max_window, cfg.per_pid, {}})) {
    const auto path = tagger::tag(model, detail::window_inputs(w, by_seq), cfg.viterbi_mask);
    for (std::size_t t = 0; t < w.events.size(); ++t) {
      w.events[t].label = model.labels.tag_name(path.tags[t]);
      out.push_back(std::move(w.events[t]));
    }
  }
  return out;
}

/// Label set spanning every ability named in `label` fields, sorted.
inline tagger::LabelSet labels_of(const std::vector<ingest::CanonicalEvent>& events) {
  std::set<std::string> names;
  for (const auto& e : events)
    if (e.label)
      if (auto a = evalkit::fold_tag(*e.label)) names.insert(*a);
  return tagger::LabelSet(std::vector<std::string>(names.begin(), names.end()));
}

/// Spans are read in the order given, which is the tagger's window order.
inline graph::AbilityGraph graph_stage(const std::vector<ingest::CanonicalEvent>& tagged, bool reduce) {
  return graph::build_ability_graph(graph::spans_from_labeled_events(tagged, labels_of(tagged)), reduce);
}

inline std::vector<matcher::RankEntry> match_stage(const graph::AbilityGraph& gq,
                                                   const std::vector<graph::AbilityGraph>& campaigns,
                                                   std::size_t budget) {
  return matcher::rank_campaigns(gq, campaigns, {}, budget);
}

/// Aligns predictions to gold by seq_id; events absent from `pred` count as O.
inline evalkit::MetricReport evaluate(const std::vector<ingest::CanonicalEvent>& pred,
                                      const std::vector<ingest::CanonicalEvent>& gold) {
  std::unordered_map<std::uint64_t, const std::string*> by_seq;
  for (const auto& e : pred)
    if (e.label) by_seq[e.seq_id] = &*e.label;
  std::vector<std::string> p, g;
  p.reserve(gold.size());
  g.reserve(gold.size());
  for (const auto& e : gold) {
    if (!e.label) throw Error(ErrorKind::InvalidArgument, "gold event " + std::to_string(e.seq_id) + " has no label");
    g.push_back(*e.label);
    auto it = by_seq.find(e.seq_id);
    p.push_back(it == by_seq.end() ? "O" : *it->second);
  }
  return evalkit::macro_prf(p, g);
}

inline bool has_gold(const std::vector<ingest::CanonicalEvent>& events) {
  return !events.empty() && std::all_of(events.begin(), events.end(), [](const auto& e) { return e.label.has_value(); });
}

inline nlohmann::json make_report(const graph::AbilityGraph& gq, const std::vector<matcher::RankEntry>& ranking,
                                  const std::optional<evalkit::MetricReport>& metrics) {
  std::vector<std::string> abilities;
  for (const auto& a : gq.labels)
    if (std::find(abilities.begin(), abilities.end(), a) == abilities.end()) abilities.push_back(a);
  nlohmann::json notes = nlohmann::json::array();
  if (gq.node_count() == 0) notes.push_back("no abilities detected");
  for (const auto& r : ranking)
    if (!r.exact) notes.push_back("search budget exhausted for '" + r.campaign + "'; score is an upper bound");
  nlohmann::json report{{"version", 1},
                        {"detected_abilities", abilities},
                        {"ability_graph", graph::to_json(gq)},
                        {"ranking", matcher::to_json(ranking)},
                        {"notes", std::move(notes)}};
  if (metrics) report["metrics"] = evalkit::to_json(*metrics);
  return report;
}

// ---------------------------------------------------------------------------
// Training

/// Fits every model from labeled event files. PCA sees all training events;
/// the one-class SVM sees a seeded subsample of benign (O) events; the
/// tagger trains on the windows that survive the filter.
inline Models train_models(const std::vector<std::vector<ingest::CanonicalEvent>>& corpora, const PipelineConfig& cfg,
                           const Log& log = {}) {
  if (corpora.empty()) throw Error(ErrorKind::InvalidArgument, "no training data");
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  Models m;
  m.embedder = make_embedder(cfg);

  std::vector<std::vector<ingest::CanonicalEvent>> sorted;
  std::vector<std::vector<embed::EventVector>> raw;
  std::vector<Vector> all;
  for (const auto& c : corpora) {
    if (!has_gold(c)) throw Error(ErrorKind::InvalidArgument, "training events must all carry a label");
    sorted.push_back(ingest::sort_chronologically(c));
    raw.push_back(embed::embed_events(m.embedder, sorted.back()));
    for (const auto& v : raw.back()) all.push_back(v.values);
  }
  say("pca: " + std::to_string(all.size()) + " events, " + std::to_string(all.front().size()) + " -> " +
      std::to_string(cfg.pca_dim) + " dims");
  m.pca = embed::pca_fit(all, cfg.pca_dim);
  all.clear();

  std::vector<std::vector<embed::EventVector>> reduced(raw.size());
  std::vector<Vector> benign;
  for (std::size_t f = 0; f < raw.size(); ++f) {
    for (std::size_t i = 0; i < raw[f].size(); ++i) {
      reduced[f].push_back({embed::pca_transform(m.pca, raw[f][i].values), raw[f][i].event_ref});
      if (sorted[f][i].label == "O") benign.push_back(reduced[f].back().values);
    }
  }
  raw.clear();
  if (benign.empty()) throw Error(ErrorKind::DegenerateInput, "no benign events to fit the one-class SVM");
  {
    std::vector<std::size_t> idx(benign.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(cfg.sample_seed());
    rng.shuffle(std::span(idx));
    idx.resize(std::min(idx.size(), cfg.ocsvm_samples));
    std::sort(idx.begin(), idx.end());
    std::vector<Vector> sample;
    for (auto i : idx) sample.push_back(benign[i]);
    anomaly::OcSvmParams p;
    p.nu = cfg.nu;
    p.gamma = cfg.gamma > 0.0 ? cfg.gamma : anomaly::median_gamma(sample, cfg.gamma_seed());
    p.tol = cfg.ocsvm_tol;
    p.max_iter = cfg.ocsvm_max_iter;
    m.ocsvm = anomaly::ocsvm_fit(sample, p);
    say("ocsvm: " + std::to_string(sample.size()) + " benign samples, gamma " + std::to_string(p.gamma) + ", " +
        std::to_string(m.ocsvm.alphas.size()) + " support vectors" + (m.ocsvm.converged ? "" : " (not converged)"));
  }

  std::vector<ingest::CanonicalEvent> everything;
  for (const auto& c : sorted) everything.insert(everything.end(), c.begin(), c.end());
  const auto labels = labels_of(everything);
  std::vector<tagger::TrainingSequence> data;
  std::size_t kept = 0, total = 0;
  for (std::size_t f = 0; f < sorted.size(); ++f) {
    const auto subset = cfg.tag_suspicious_only ? filter_stage(sorted[f], reduced[f], m.ocsvm, cfg.threshold)
                                                : sorted[f];
    kept += subset.size();
    total += sorted[f].size();
    const auto by_seq = detail::index_vectors(reduced[f]);
    for (const auto& w : ingest::sessionize(subset, {cfg.max_window, cfg.per_pid, {}})) {
      tagger::TrainingSequence s;
      s.inputs = detail::window_inputs(w, by_seq);
      for (const auto& e : w.events) s.tags.push_back(labels.tag_index(*e.label));
      data.push_back(std::move(s));
    }
  }
  say("tagger: " + std::to_string(kept) + " of " + std::to_string(total) + " events in " +
      std::to_string(data.size()) + " windows, " + std::to_string(labels.tag_count()) + " tags");
  tagger::TrainHyper hyper{cfg.hidden, cfg.lr, cfg.epochs, cfg.batch, cfg.tagger_seed(), cfg.clip};
  m.tagger = tagger::train(data, labels, hyper, [&](std::size_t epoch, double loss) {
    say("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) + " loss " + std::to_string(loss));
  });
  return m;
}

// ---------------------------------------------------------------------------
// Inference

/// Paths of the artifacts run_pipeline writes under `out`.
struct ArtifactPaths {
  fs::path events, vectors, suspicious, tags, graph, ranking, report;

  explicit ArtifactPaths(const fs::path& out)
      : events(out / "events.jsonl"),
        vectors(out / "vectors.json"),
        suspicious(out / "suspicious.jsonl"),
        tags(out / "tags.jsonl"),
        graph(out / "graph.json"),
        ranking(out / "ranking.json"),
        report(out / "report.json") {}
};

/// Runs one stage, rethrowing failures as StageError naming the stage.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

/// Inference over cfg.input with models from cfg.models. Artifacts written
/// before a failing stage are left in place.
inline nlohmann::json run_pipeline(const PipelineConfig& cfg, const Log& log = {}) {
  if (cfg.input.empty()) throw StageError("config", "no input file");
  const ArtifactPaths out(cfg.out);
  const Models models = stage("load-models", [&] { return load_models(cfg.models); });
  const auto campaigns = stage("load-campaigns", [&] { return load_campaigns(cfg.campaigns); });

  const auto events = stage("ingest", [&] {
    auto ev = ingest::sort_chronologically(load_events(cfg.input, cfg.strict, log));
    save_events(out.events, ev);
    return ev;
  });
  const auto vectors = stage("embed", [&] {
    auto v = embed_stage(events, models.embedder, models.pca);
    write_json(out.vectors, vectors_to_json(v));
    return v;
  });
  const auto subset = stage("filter", [&] {
    std::optional<std::vector<ingest::CanonicalEvent>> s;
    if (cfg.tag_suspicious_only) {
      s = filter_stage(events, vectors, models.ocsvm, cfg.threshold);
      save_events(out.suspicious, *s);
    }
    return s;
  });
  const auto tagged = stage("tag", [&] {
    auto t = tag_stage(events, vectors, subset, models.tagger, cfg);
    save_events(out.tags, t);
    return t;
  });
  const auto gq = stage("graph", [&] {
    auto g = graph_stage(tagged, cfg.transitive_reduction);
    write_json(out.graph, graph::to_json(g));
    return g;
  });
  const auto ranking = stage("match", [&] {
    auto r = match_stage(gq, campaigns, cfg.ged_budget);
    write_json(out.ranking, matcher::to_json(r));
    return r;
  });
  return stage("report", [&] {
    std::optional<evalkit::MetricReport> metrics;
    if (has_gold(events)) metrics = evaluate(tagged, events);
    auto report = make_report(gq, ranking, metrics);
    write_json(out.report, report);
    return report;
  });
}

}  // namespace apthunt::pipeline
