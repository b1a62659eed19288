#include "tempora/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "tempora/cooccurrence.hpp"
#include "tempora/corpus.hpp"
#include "tempora/csv.hpp"
#include "tempora/errors.hpp"
#include "tempora/exact.hpp"
#include "tempora/metrics.hpp"
#include "tempora/numeric.hpp"
#include "tempora/oracle.hpp"
#include "tempora/parallel.hpp"
#include "tempora/serialization.hpp"
#include "tempora/synthetic.hpp"
#include "tempora/trainer.hpp"

namespace tempora {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                   std::chrono::system_clock::now())));
}

std::string file_hash(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open " + file.string());
  Fnv1a h;
  char buffer[1 << 16];
  while (in.read(buffer, sizeof buffer) || in.gcount() > 0) h.update({buffer, static_cast<std::size_t>(in.gcount())});
  return h.hex();
}

struct Globals {
  unsigned threads = 0;
  std::string workdir = ".";
  std::string manifest_out = "run_manifest.json";
  bool no_manifest = false;
  std::string log_level = "info";

  fs::path at(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(workdir) / path;
  }
};

/// Record of one invocation: what ran, with which resolved settings, on
/// which inputs, producing which outputs.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv)
      : command_(std::move(command)), argv_(std::move(argv)), started_(utc_now()) {}

  json config = json::object();
  json results = json::object();
  std::optional<std::uint64_t> seed;

  void input(const fs::path& file) { inputs_.push_back({{"path", file.string()}, {"fnv1a", file_hash(file)}}); }

  /// The corpus manifest and every file it references.
  void corpus_input(const fs::path& manifest) {
    input(manifest);
    std::ifstream in(manifest);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) return;
    for (const auto& s : j.value("slices", json::array())) {
      if (s.contains("file") && s["file"].is_string()) input(manifest.parent_path() / s["file"].get<std::string>());
    }
    if (j.contains("vocabulary") && j["vocabulary"].is_string()) {
      input(manifest.parent_path() / j["vocabulary"].get<std::string>());
    }
  }

  void output(const fs::path& file) { outputs_.push_back(file.string()); }

  void write(const fs::path& file, int exit_code) const {
    json j = {{"command", command_},
              {"argv", argv_},
              {"config", config},
              {"seed", seed ? json(*seed) : json(nullptr)},
              {"inputs", inputs_},
              {"outputs", outputs_},
              {"started_at", started_},
              {"finished_at", utc_now()},
              {"exit_code", exit_code},
              {"results", results}};
    std::ofstream out(file);
    if (!out) {
      spdlog::error("cannot write run manifest {}", file.string());
      return;
    }
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string started_;
  json inputs_ = json::array();
  std::vector<std::string> outputs_;
};

/// Writes to `target` ("-" is standard output) and records the file.
void emit(const Globals& g, RunManifest& m, const std::string& target, const std::function<void(std::ostream&)>& fn) {
  if (target == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  const fs::path file = g.at(target);
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write " + file.string());
  fn(out);
  m.output(file);
}

TemporalCorpus load_corpus(const Globals& g, RunManifest& m, const std::string& manifest,
                           std::shared_ptr<const Vocabulary> vocabulary = nullptr) {
  const fs::path path = g.at(manifest);
  m.corpus_input(path);
  IngestOptions options;
  options.threads = resolve_threads(g.threads);
  options.fixed_vocabulary = std::move(vocabulary);
  return ingest(path, options);
}

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
  std::string manifest;
  std::string vocab;
  std::string out;
  std::string stats = "-";
};

void cmd_ingest(const IngestArgs& a, const Globals& g, RunManifest& m) {
  const fs::path path = g.at(a.manifest);
  m.corpus_input(path);
  IngestOptions options;
  options.threads = resolve_threads(g.threads);
  if (!a.vocab.empty()) {
    options.vocabulary = g.at(a.vocab);
    m.input(*options.vocabulary);
  }
  const TemporalCorpus corpus = ingest(path, options);
  emit(g, m, a.stats, [&](std::ostream& out) {
    CsvWriter csv(out, {"slice", "documents", "tokens"});
    for (const auto& s : corpus.slices()) csv.row({s.label, std::to_string(s.size()), std::to_string(s.token_count())});
    csv.row({"total", std::to_string(corpus.document_count()), std::to_string(corpus.token_count())});
  });
  if (!a.out.empty()) {
    const fs::path dir = g.at(a.out);
    write_corpus(corpus, dir);
    m.output(dir / "manifest.json");
  }
  m.results = {{"slices", corpus.slice_count()},
               {"documents", corpus.document_count()},
               {"tokens", corpus.token_count()},
               {"vocabulary_size", corpus.vocab_size()},
               {"vocabulary_hash", corpus.vocabulary().hash()}};
  spdlog::info("{} slices, {} documents, {} tokens, vocabulary {}", corpus.slice_count(), corpus.document_count(),
               corpus.token_count(), corpus.vocab_size());
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string held;
  std::size_t held_per_slice = 0;
  std::string split_out;
  std::string out = "model.json";
  std::string log = "train_log.csv";
  std::string resume;
  bool binary_sidecar = false;
  bool no_clip = false;
  bool cd_sample_final = false;
  std::string activation = "tanh";
  std::string z_mode = "auto";
  TrainConfig config;
};

void cmd_train(TrainArgs a, const Globals& g, RunManifest& m) {
  TrainConfig& cfg = a.config;
  if (a.no_clip) cfg.clip_norm = 0.0;
  if (a.cd_sample_final) cfg.cd_mean_field_final = false;
  cfg.activation = parse_recurrent_activation(a.activation);
  cfg.z_mode = parse_z_mode(a.z_mode);
  cfg.threads = resolve_threads(g.threads);

  TemporalCorpus corpus = load_corpus(g, m, a.corpus);
  std::optional<TemporalCorpus> held;
  if (!a.held.empty() && a.held_per_slice > 0) throw InputError("--held and --held-per-slice are exclusive");
  if (!a.held.empty()) held = load_corpus(g, m, a.held, corpus.shared_vocabulary());
  if (a.held_per_slice > 0) {
    CorpusSplit split = split_held_out(corpus, a.held_per_slice, cfg.seed);
    corpus = std::move(split.train);
    held = std::move(split.held);
    if (!a.split_out.empty()) {
      write_corpus(corpus, g.at(a.split_out) / "train");
      write_corpus(*held, g.at(a.split_out) / "held");
      m.output(g.at(a.split_out) / "train" / "manifest.json");
      m.output(g.at(a.split_out) / "held" / "manifest.json");
    }
  }

  Checkpoint start;
  if (!a.resume.empty()) {
    const fs::path resume = g.at(a.resume);
    m.input(resume);
    start = load_checkpoint(resume);
    if (start.vocab_hash != corpus.vocabulary().hash()) {
      throw RefusalError("checkpoint vocabulary hash " + start.vocab_hash + " does not match the corpus (" +
                         corpus.vocabulary().hash() + ")");
    }
    const int epochs = cfg.epochs;
    const unsigned threads = cfg.threads;
    cfg = start.config;
    cfg.epochs = epochs;
    cfg.threads = threads;
  }
  m.config = config_to_json(cfg);
  m.config["threads"] = cfg.threads;
  m.seed = cfg.seed;

  const Trainer trainer(corpus, cfg, held ? &*held : nullptr);
  if (a.resume.empty()) start = trainer.initialize();
  start.config = cfg;

  std::ostringstream log;
  CsvWriter csv(log, {"epoch", "reconstruction_error", "gradient_norm", "heldout_sum_ppl"});
  const TrainOutcome outcome = trainer.run(std::move(start), [&](const EpochRecord& r) {
    csv.row({std::to_string(r.epoch), CsvWriter::number(r.reconstruction_error), CsvWriter::number(r.gradient_norm),
             CsvWriter::number(r.heldout_sum_ppl)});
    spdlog::debug("epoch {} reconstruction {:.6g} |g| {:.6g}", r.epoch, r.reconstruction_error, r.gradient_norm);
  });
  emit(g, m, a.log, [&](std::ostream& out) { out << log.str(); });

  const fs::path out = g.at(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(outcome.checkpoint, out, a.binary_sidecar);
  m.output(out);
  if (a.binary_sidecar) m.output(fs::path(out.string() + ".bin"));

  m.results = {{"epochs_run", outcome.history.size()},
               {"checkpoint_epoch", outcome.checkpoint.epoch},
               {"stopped_early", outcome.stopped_early}};
  if (outcome.checkpoint.heldout_sum_ppl) m.results["heldout_sum_ppl"] = *outcome.checkpoint.heldout_sum_ppl;
  spdlog::info("saved checkpoint at epoch {} to {}", outcome.checkpoint.epoch, out.string());
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string corpus;
  std::string out = "-";
  std::string z_mode = "auto";
  int ais_temperatures = 1000;
  int ais_runs = 100;
  std::uint64_t ais_seed = 1;
  std::size_t top = 20;
  std::string docs;
  std::string normalization = "per-word";
  std::string key_terms;
  std::string from;
  std::vector<std::string> keywords;
  std::string reference;
  std::string table;
  std::string table_out;
  std::size_t window = 5;
};

struct EvalContext {
  Checkpoint checkpoint;
  TemporalCorpus corpus;
};

EvalContext load_eval(const EvalArgs& a, const Globals& g, RunManifest& m) {
  if (a.checkpoint.empty() || a.corpus.empty()) throw InputError("eval needs --checkpoint and --corpus");
  const fs::path ckpt = g.at(a.checkpoint);
  m.input(ckpt);
  EvalContext ctx{load_checkpoint(ckpt), load_corpus(g, m, a.corpus)};
  if (ctx.checkpoint.vocab_hash != ctx.corpus.vocabulary().hash()) {
    throw RefusalError("checkpoint vocabulary hash " + ctx.checkpoint.vocab_hash + " does not match the corpus (" +
                       ctx.corpus.vocabulary().hash() + ")");
  }
  m.config = {{"checkpoint", ckpt.string()}, {"z_mode", a.z_mode}, {"top", a.top}};
  return ctx;
}

AisOptions ais_options(const EvalArgs& a) { return {a.ais_temperatures, a.ais_runs, a.ais_seed}; }

TemporalCorpus eval_docs(const EvalArgs& a, const Globals& g, RunManifest& m, const TemporalCorpus& timeline) {
  if (a.docs.empty()) return timeline;
  TemporalCorpus docs = load_corpus(g, m, a.docs, timeline.shared_vocabulary());
  return docs;
}

void eval_perplexity(const EvalArgs& a, const Globals& g, RunManifest& m) {
  const EvalContext ctx = load_eval(a, g, m);
  const TemporalCorpus docs = eval_docs(a, g, m, ctx.corpus);
  if (docs.slice_count() != ctx.corpus.slice_count()) {
    throw InputError("documents have " + std::to_string(docs.slice_count()) + " slices, timeline has " +
                     std::to_string(ctx.corpus.slice_count()));
  }
  PerplexityNormalization norm;
  if (a.normalization == "per-word") {
    norm = PerplexityNormalization::per_word;
  } else if (a.normalization == "per-word-per-document") {
    norm = PerplexityNormalization::per_word_per_document;
  } else {
    throw InputError("unknown normalization '" + a.normalization + "'");
  }
  const ZMode mode = parse_z_mode(a.z_mode);
  const UnrolledState state = forward(ctx.checkpoint.params, ctx.corpus);
  double sum = 0.0;
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"slice", "documents", "words", "log_prob", "perplexity"});
    for (std::size_t t = 0; t < docs.slice_count(); ++t) {
      const auto& slice = docs.slice(t);
      if (slice.documents.empty()) continue;
      const auto r = perplexity(ctx.checkpoint.params, state, slice.documents, t, mode, ais_options(a), norm);
      sum += r.perplexity;
      csv.row({slice.label, std::to_string(r.documents), std::to_string(r.words), CsvWriter::number(r.log_prob),
               CsvWriter::number(r.perplexity)});
    }
  });
  m.results = {{"sum_perplexity", sum}};
  spdlog::info("SumPPL {:.6g}", sum);
}

void eval_timestamp(const EvalArgs& a, const Globals& g, RunManifest& m) {
  const EvalContext ctx = load_eval(a, g, m);
  const TemporalCorpus docs = eval_docs(a, g, m, ctx.corpus);
  const UnrolledState state = forward(ctx.checkpoint.params, ctx.corpus);
  TimelineScorer scorer(ctx.checkpoint.params, state, parse_z_mode(a.z_mode), ais_options(a));
  std::vector<std::string> predicted;
  std::vector<std::string> truth;
  std::size_t correct = 0;
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"true_slice", "document", "predicted_slice"});
    for (const auto& slice : docs.slices()) {
      for (std::size_t n = 0; n < slice.documents.size(); ++n) {
        const std::string& p = ctx.corpus.slice(scorer.predict(slice.documents[n])).label;
        predicted.push_back(p);
        truth.push_back(slice.label);
        if (p == slice.label) ++correct;
        csv.row({slice.label, std::to_string(n), p});
      }
    }
  });
  if (truth.empty()) throw InputError("no documents to date");
  const double accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  m.results = {{"documents", truth.size()}, {"accuracy", accuracy}};
  try {
    const double err = mean_absolute_error_years(predicted, truth);
    m.results["mean_absolute_error_years"] = err;
    spdlog::info("accuracy {:.4f}, mean absolute error {:.4f} years", accuracy, err);
  } catch (const InputError& e) {
    spdlog::warn("{}; mean absolute error not reported", e.what());
    spdlog::info("accuracy {:.4f}", accuracy);
  }
}

void eval_topics(const EvalArgs& a, const Globals& g, RunManifest& m) {
  const EvalContext ctx = load_eval(a, g, m);
  const TopicSet topics = extract_topic_set(ctx.checkpoint.params, ctx.corpus, a.top);
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"slice", "topic", "rank", "term", "probability"});
    for (std::size_t t = 0; t < topics.slices.size(); ++t) {
      for (std::size_t j = 0; j < topics.slices[t].size(); ++j) {
        const Topic& topic = topics.slices[t][j];
        for (std::size_t r = 0; r < topic.terms.size(); ++r) {
          csv.row({topics.labels[t], std::to_string(j), std::to_string(r + 1), topic.terms[r],
                   CsvWriter::number(topic.probabilities[r])});
        }
      }
    }
  });
  m.results = {{"slices", topics.slices.size()}, {"unique_terms", topic_set_terms(topics).size()}};
}

void eval_popularity(const EvalArgs& a, const Globals& g, RunManifest& m) {
  if (a.key_terms.empty()) throw InputError("popularity needs --key-terms");
  const EvalContext ctx = load_eval(a, g, m);
  const fs::path key_file = g.at(a.key_terms);
  m.input(key_file);
  std::ifstream in(key_file);
  json keys = json::parse(in, nullptr, false);
  if (keys.is_discarded() || !keys.is_object()) {
    throw InputError(key_file.string() + ": expected {\"topic\": [\"term\", ...]}");
  }
  const TopicSet topics = extract_topic_set(ctx.checkpoint.params, ctx.corpus, a.top);
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"key_topic", "slice", "popularity"});
    for (const auto& [name, terms] : keys.items()) {
      TermSet key;
      try {
        key = terms.get<TermSet>();
      } catch (const json::exception&) {
        throw InputError(key_file.string() + ": '" + name + "' must be a list of terms");
      }
      const auto pop = topic_popularity(topics, key);
      for (std::size_t t = 0; t < pop.size(); ++t) csv.row({name, topics.labels[t], CsvWriter::number(pop[t])});
    }
  });
}

void eval_drift(const EvalArgs& a, const Globals& g, RunManifest& m) {
  const EvalContext ctx = load_eval(a, g, m);
  const TopicSet topics = extract_topic_set(ctx.checkpoint.params, ctx.corpus, a.top);
  if (topics.slices.empty()) throw InputError("corpus has no slices");
  std::size_t from = 0;
  if (!a.from.empty()) {
    auto it = std::find(topics.labels.begin(), topics.labels.end(), a.from);
    if (it == topics.labels.end()) throw InputError("unknown slice '" + a.from + "'");
    from = static_cast<std::size_t>(it - topics.labels.begin());
  }
  const TermSet base = slice_terms(topics.slices[from]);
  double last = 0.0;
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"from_slice", "to_slice", "ttd"});
    for (std::size_t t = 0; t < topics.slices.size(); ++t) {
      last = topic_term_drift(base, slice_terms(topics.slices[t]));
      csv.row({topics.labels[from], topics.labels[t], CsvWriter::number(last)});
    }
  });
  m.results = {{"ttd_to_final", last}};
}

void eval_trend(const EvalArgs& a, const Globals& g, RunManifest& m) {
  if (a.keywords.empty()) throw InputError("trend needs at least one --keyword");
  const EvalContext ctx = load_eval(a, g, m);
  const TopicSet topics = extract_topic_set(ctx.checkpoint.params, ctx.corpus, a.top);
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"keyword", "count", "span", "span_dict", "bits"});
    for (const auto& k : a.keywords) {
      if (!ctx.corpus.vocabulary().find(k)) spdlog::warn("keyword '{}' is not in the vocabulary", k);
      const TrendSequence trend = keyword_trend(topics, k, ctx.corpus);
      std::string bits;
      for (auto b : trend.bits) bits += b ? '1' : '0';
      csv.row({k, std::to_string(trend.count), std::to_string(trend.span), CsvWriter::number(trend.span_dict), bits});
    }
  });
}

void eval_span(const EvalArgs& a, const Globals& g, RunManifest& m) {
  const EvalContext ctx = load_eval(a, g, m);
  const TopicSet topics = extract_topic_set(ctx.checkpoint.params, ctx.corpus, a.top);
  const double value = avg_span(topics, ctx.corpus);
  const std::size_t unique = topic_set_terms(topics).size();
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"unique_terms", "avg_span"});
    csv.row({std::to_string(unique), CsvWriter::number(value)});
  });
  m.results = {{"unique_terms", unique}, {"avg_span", value}};
}

void eval_coherence(const EvalArgs& a, const Globals& g, RunManifest& m) {
  if (a.reference.empty() == a.table.empty()) throw InputError("coherence needs exactly one of --reference or --table");
  const EvalContext ctx = load_eval(a, g, m);
  const TopicSet topics = extract_topic_set(ctx.checkpoint.params, ctx.corpus, a.top);
  std::optional<CooccurrenceTable> table;
  if (!a.table.empty()) {
    m.input(g.at(a.table));
    table = CooccurrenceTable::load(g.at(a.table));
  } else {
    m.input(g.at(a.reference));
    const TermSet keep = topic_set_terms(topics);
    table = build_cooccurrence(g.at(a.reference), a.window, &keep);
  }
  if (!a.table_out.empty()) {
    table->save(g.at(a.table_out));
    m.output(g.at(a.table_out));
  }
  double total = 0.0;
  std::size_t n = 0;
  std::vector<std::string> warnings;
  emit(g, m, a.out, [&](std::ostream& out) {
    CsvWriter csv(out, {"slice", "topic", "coherence"});
    for (std::size_t t = 0; t < topics.slices.size(); ++t) {
      for (std::size_t j = 0; j < topics.slices[t].size(); ++j) {
        const double c = coherence(topics.slices[t][j].terms, *table, &warnings);
        total += c;
        ++n;
        csv.row({topics.labels[t], std::to_string(j), CsvWriter::number(c)});
      }
    }
  });
  std::sort(warnings.begin(), warnings.end());
  warnings.erase(std::unique(warnings.begin(), warnings.end()), warnings.end());
  for (const auto& w : warnings) spdlog::warn(w);
  if (n) m.results = {{"mean_coherence", total / static_cast<double>(n)}};
}

// --- oracle -----------------------------------------------------------------

struct OracleArgs {
  std::string checkpoint;
  std::string corpus;
  std::uint64_t seed = 1;
  std::size_t vocab = 3;
  int hidden = 2;
  int recurrent = 2;
  std::size_t slices = 3;
  std::size_t docs_per_slice = 3;
  std::uint32_t max_length = 3;
  double scale = 0.5;
  std::string out = "-";
  OracleOptions options;
};

void cmd_oracle(const OracleArgs& a, const Globals& g, RunManifest& m) {
  RnnRsmParams params;
  TemporalCorpus corpus;
  if (!a.checkpoint.empty()) {
    if (a.corpus.empty()) throw InputError("--checkpoint needs --corpus");
    const fs::path ckpt = g.at(a.checkpoint);
    m.input(ckpt);
    Checkpoint c = load_checkpoint(ckpt);
    corpus = load_corpus(g, m, a.corpus);
    if (c.vocab_hash != corpus.vocabulary().hash()) {
      throw RefusalError("checkpoint vocabulary hash does not match the corpus");
    }
    params = std::move(c.params);
  } else {
    std::mt19937_64 rng(a.seed);
    corpus = make_random_corpus(a.vocab, a.slices, a.docs_per_slice, a.max_length, rng);
    params = random_rnn_rsm_params(static_cast<Eigen::Index>(a.vocab), a.hidden, a.recurrent, a.scale, rng);
    m.seed = a.seed;
  }
  // Fail early on a bad epsilon rather than after the normalization checks.
  if (a.options.fd_epsilon < 1e-7 || a.options.fd_epsilon > 1e-3) {
    throw InputError("--fd-epsilon must lie in [1e-7, 1e-3]");
  }
  m.config = {{"fd_epsilon", a.options.fd_epsilon},
              {"normalization_tolerance", a.options.normalization_tolerance},
              {"rsm_tolerance", a.options.rsm_tolerance},
              {"bptt_tolerance", a.options.bptt_tolerance},
              {"inject_sign_flip", a.options.sign_flip_block}};
  const auto checks = run_oracle(params, corpus, a.options);
  bool ok = true;
  emit(g, m, a.out, [&](std::ostream& out) {
    for (const auto& c : checks) {
      out << fmt::format("{} {}: {:.3e} (tolerance {:.1e}) {}\n", c.passed ? "PASS" : "FAIL", c.name, c.value,
                         c.tolerance, c.detail);
      ok = ok && c.passed;
      m.results[c.name] = {{"value", c.value}, {"tolerance", c.tolerance}, {"passed", c.passed}};
    }
  });
  if (!ok) throw CheckFailed("oracle checks failed");
}

// --- wiring -----------------------------------------------------------------

std::shared_ptr<spdlog::logger> stderr_logger() {
  if (auto existing = spdlog::get("tempora")) return existing;
  return spdlog::stderr_color_mt("tempora");
}

void add_eval_common(CLI::App* sub, EvalArgs& a) {
  sub->add_option("--checkpoint", a.checkpoint, "Checkpoint file")->required();
  sub->add_option("--corpus", a.corpus, "Training corpus manifest (defines the timeline)")->required();
  sub->add_option("--out", a.out, "Output CSV ('-' for standard output)")->capture_default_str();
  sub->add_option("--top", a.top, "Terms per topic")->capture_default_str();
}

void add_z_options(CLI::App* sub, EvalArgs& a) {
  sub->add_option("--z-mode", a.z_mode, "auto | exact | ais")->capture_default_str();
  sub->add_option("--ais-temperatures", a.ais_temperatures)->capture_default_str();
  sub->add_option("--ais-runs", a.ais_runs)->capture_default_str();
  sub->add_option("--ais-seed", a.ais_seed)->capture_default_str();
  sub->add_option("--docs", a.docs, "Documents to score (manifest); defaults to the corpus");
}

int dispatch(CLI::App& app, const std::vector<std::string>& argv, const Globals& g, const std::function<void(RunManifest&)>& run,
             const std::string& command) {
  RunManifest manifest(command, argv);
  int code = kExitOk;
  try {
    run(manifest);
  } catch (const CheckFailed& e) {
    spdlog::error("{}", e.what());
    code = kExitCheckFailed;
  } catch (const NumericalError& e) {
    spdlog::error("numerical abort: {}", e.what());
    code = kExitNumerical;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    code = kExitInput;
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("{}", e.what());
    code = kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    code = kExitInput;
  }
  (void)app;
  if (!g.no_manifest) manifest.write(g.at(g.manifest_out), code);
  return code;
}

}  // namespace

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args);
}

int run_cli(const std::vector<std::string>& args) {
  spdlog::set_default_logger(stderr_logger());

  CLI::App app{"Temporal topic modelling with recurrent replicated softmax models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "Worker threads (0: TEMPORA_THREADS or all cores)")->capture_default_str();
  app.add_option("--workdir", g.workdir, "Base directory for relative paths")->capture_default_str();
  app.add_option("--manifest-out", g.manifest_out, "Run manifest file")->capture_default_str();
  app.add_flag("--no-manifest", g.no_manifest, "Do not write a run manifest");
  app.add_option("--log-level", g.log_level, "trace | debug | info | warn | error | off")->capture_default_str();

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Read a corpus manifest and report slice statistics");
  ingest_cmd->add_option("manifest", ingest_args.manifest, "Corpus manifest (JSON)")->required();
  ingest_cmd->add_option("--vocab", ingest_args.vocab, "Pre-supplied vocabulary file");
  ingest_cmd->add_option("--out", ingest_args.out, "Write the normalised corpus to this directory");
  ingest_cmd->add_option("--stats", ingest_args.stats, "Statistics CSV ('-' for standard output)")
      ->capture_default_str();

  TrainArgs train_args;
  TrainConfig& cfg = train_args.config;
  auto* train_cmd = app.add_subcommand("train", "Train an RNN-RSM with CD-k and BPTT");
  train_cmd->add_option("--corpus", train_args.corpus, "Corpus manifest")->required();
  train_cmd->add_option("--held", train_args.held, "Held-out corpus manifest for early stopping");
  train_cmd->add_option("--held-per-slice", train_args.held_per_slice, "Hold out this many documents per slice");
  train_cmd->add_option("--split-out", train_args.split_out, "Write the train/held split here");
  train_cmd->add_option("--out", train_args.out, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--log", train_args.log, "Training log CSV")->capture_default_str();
  train_cmd->add_option("--resume", train_args.resume, "Continue from this checkpoint");
  train_cmd->add_flag("--binary-sidecar", train_args.binary_sidecar, "Store parameters in <out>.bin");
  train_cmd->add_option("--epochs", cfg.epochs)->capture_default_str();
  train_cmd->add_option("--cd-k", cfg.cd_k, "Gibbs steps per CD estimate")->capture_default_str();
  train_cmd->add_option("--lr", cfg.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--hidden", cfg.hidden, "Hidden units (topics)")->capture_default_str();
  train_cmd->add_option("--recurrent", cfg.recurrent, "Recurrent state size")->capture_default_str();
  train_cmd->add_option("--seed", cfg.seed)->capture_default_str();
  train_cmd->add_option("--early-stop", cfg.early_stop_patience, "Patience in evaluations")->capture_default_str();
  train_cmd->add_option("--eval-every", cfg.eval_every, "Epochs between held-out evaluations")
      ->capture_default_str();
  train_cmd->add_option("--warm-start", cfg.warm_start_epochs, "Static RSM epochs on the final slice")
      ->capture_default_str();
  train_cmd->add_option("--momentum", cfg.momentum)->capture_default_str();
  train_cmd->add_option("--weight-decay", cfg.weight_decay)->capture_default_str();
  train_cmd->add_option("--clip-norm", cfg.clip_norm, "Global gradient norm cap")->capture_default_str();
  train_cmd->add_flag("--no-clip", train_args.no_clip, "Disable gradient clipping");
  train_cmd->add_option("--minibatch", cfg.minibatch, "Documents per slice per epoch (0: all)")
      ->capture_default_str();
  train_cmd->add_flag("--cd-sample-final", train_args.cd_sample_final,
                      "Use sampled rather than mean-field final hidden statistics");
  train_cmd->add_option("--recurrent-activation", train_args.activation, "tanh | logistic")->capture_default_str();
  train_cmd->add_flag("--scale-visible-sum", cfg.scale_visible_sum, "Average slice counts over documents");
  train_cmd->add_option("--z-mode", train_args.z_mode, "Held-out log Z: auto | exact | ais")->capture_default_str();
  train_cmd->add_option("--ais-temperatures", cfg.ais_temperatures)->capture_default_str();
  train_cmd->add_option("--ais-runs", cfg.ais_runs)->capture_default_str();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->require_subcommand(1);
  auto* ev_ppl = eval_cmd->add_subcommand("perplexity", "Per-slice perplexity");
  add_eval_common(ev_ppl, eval_args);
  add_z_options(ev_ppl, eval_args);
  ev_ppl->add_option("--normalization", eval_args.normalization, "per-word | per-word-per-document")
      ->capture_default_str();
  auto* ev_ts = eval_cmd->add_subcommand("timestamp", "Date documents on the timeline");
  add_eval_common(ev_ts, eval_args);
  add_z_options(ev_ts, eval_args);
  auto* ev_topics = eval_cmd->add_subcommand("topics", "Top terms of every topic per slice");
  add_eval_common(ev_topics, eval_args);
  auto* ev_pop = eval_cmd->add_subcommand("popularity", "Key-term popularity per slice");
  add_eval_common(ev_pop, eval_args);
  ev_pop->add_option("--key-terms", eval_args.key_terms, "JSON {\"topic\": [\"term\", ...]}")->required();
  auto* ev_drift = eval_cmd->add_subcommand("drift", "Topic-term drift against a reference slice");
  add_eval_common(ev_drift, eval_args);
  ev_drift->add_option("--from", eval_args.from, "Reference slice label (default: first)");
  auto* ev_trend = eval_cmd->add_subcommand("trend", "Keyword trend and span");
  add_eval_common(ev_trend, eval_args);
  ev_trend->add_option("--keyword", eval_args.keywords, "Keyword (repeatable)")->required();
  auto* ev_span = eval_cmd->add_subcommand("span", "Average span over all topic terms");
  add_eval_common(ev_span, eval_args);
  auto* ev_coh = eval_cmd->add_subcommand("coherence", "NPMI coherence against a reference corpus");
  add_eval_common(ev_coh, eval_args);
  ev_coh->add_option("--reference", eval_args.reference, "Plain-text reference corpus");
  ev_coh->add_option("--table", eval_args.table, "Saved co-occurrence table");
  ev_coh->add_option("--table-out", eval_args.table_out, "Save the co-occurrence table here");
  ev_coh->add_option("--window", eval_args.window, "Sliding window size")->capture_default_str();

  OracleArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exact gradient and normalization checks");
  oracle_cmd->add_option("--checkpoint", oracle_args.checkpoint, "Checkpoint to verify");
  oracle_cmd->add_option("--corpus", oracle_args.corpus, "Corpus for --checkpoint");
  oracle_cmd->add_option("--seed", oracle_args.seed, "Seed of the generated instance")->capture_default_str();
  oracle_cmd->add_option("--vocab", oracle_args.vocab, "Generated vocabulary size")->capture_default_str();
  oracle_cmd->add_option("--hidden", oracle_args.hidden, "Generated hidden size")->capture_default_str();
  oracle_cmd->add_option("--recurrent", oracle_args.recurrent, "Generated state size")->capture_default_str();
  oracle_cmd->add_option("--slices", oracle_args.slices, "Generated slices")->capture_default_str();
  oracle_cmd->add_option("--fd-epsilon", oracle_args.options.fd_epsilon, "Central-difference step")
      ->capture_default_str();
  oracle_cmd->add_option("--rsm-tolerance", oracle_args.options.rsm_tolerance)->capture_default_str();
  oracle_cmd->add_option("--bptt-tolerance", oracle_args.options.bptt_tolerance)->capture_default_str();
  oracle_cmd->add_option("--inject-sign-flip", oracle_args.options.sign_flip_block,
                         "Negate one gradient block (fault injection)");
  oracle_cmd->add_option("--out", oracle_args.out, "Report file ('-' for standard output)")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  const auto level = spdlog::level::from_str(g.log_level);
  spdlog::set_level(level);

  std::string command;
  std::function<void(RunManifest&)> run;
  if (ingest_cmd->parsed()) {
    command = "ingest";
    run = [&](RunManifest& m) { cmd_ingest(ingest_args, g, m); };
  } else if (train_cmd->parsed()) {
    command = "train";
    run = [&](RunManifest& m) { cmd_train(train_args, g, m); };
  } else if (oracle_cmd->parsed()) {
    command = "oracle";
    run = [&](RunManifest& m) { cmd_oracle(oracle_args, g, m); };
  } else {
    const std::vector<std::pair<CLI::App*, void (*)(const EvalArgs&, const Globals&, RunManifest&)>> evals = {
        {ev_ppl, eval_perplexity}, {ev_ts, eval_timestamp}, {ev_topics, eval_topics}, {ev_pop, eval_popularity},
        {ev_drift, eval_drift},    {ev_trend, eval_trend},  {ev_span, eval_span},     {ev_coh, eval_coherence}};
    for (const auto& [sub, fn] : evals) {
      if (!sub->parsed()) continue;
      command = "eval " + sub->get_name();
      run = [&, fn = fn](RunManifest& m) { fn(eval_args, g, m); };
    }
  }
  return dispatch(app, args, g, run, command);
}

}  // namespace tempora
