// Acceptance harness: one PASS/FAIL line per criterion, tolerances pinned below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "support/brute_force.hpp"
#include "support/fixtures.hpp"
#include "tempora/cli.hpp"
#include "tempora/cooccurrence.hpp"
#include "tempora/exact.hpp"
#include "tempora/metrics.hpp"
#include "tempora/numeric.hpp"
#include "tempora/synthetic.hpp"
#include "tempora/trainer.hpp"

using namespace tempora;

namespace {

// Criterion 1
constexpr int kNormInstances = 20;
constexpr double kNormTolerance = 1e-9;
constexpr double kZRelTolerance = 1e-10;
constexpr double kNormSeconds = 10;
// Criterion 2
constexpr int kRsmInstances = 10;
constexpr double kRsmTolerance = 1e-6;
constexpr double kRsmSeconds = 30;
// Criterion 3
constexpr int kBpttInstances = 5;
constexpr double kBpttTolerance = 1e-4;
constexpr double kBpttSeconds = 120;
// Shared by the finite-difference checks.
constexpr double kFdEpsilon = 1e-5;
constexpr double kFdFloor = 1e-3;
// Criterion 4
constexpr int kCdDraws = 10000;
constexpr int kCdSteps = 15;
constexpr double kCdStdErrors = 3.0;
constexpr double kCdComponentFraction = 0.95;
constexpr double kCdSeconds = 300;
// Criterion 5
constexpr double kUniformTolerance = 1e-12;
// Criterion 7
constexpr int kSynthSeeds = 20;
constexpr int kSynthEpochs = 300;
constexpr int kSynthWindow = 30;  // epoch medians are taken over 10 windows of 30 epochs
constexpr std::size_t kSynthHeldPerSlice = 10;
constexpr std::size_t kSynthTopTerms = 10;
constexpr double kSynthAccuracy = 0.9;
constexpr double kSynthPopularity = 0.5;
constexpr int kSynthMonotoneSeeds = 18;  // 90% of 20
constexpr double kSynthSeconds = 900;

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const std::string& name, double limit_seconds, const std::function<Outcome()>& check) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
  if (limit_seconds > 0 && seconds > limit_seconds) {
    o.passed = false;
    o.detail += fmt::format("; runtime over {:.0f} s", limit_seconds);
  }
  if (!o.passed) ++failures;
  std::printf("%s %d %s: %s [%.2f s]\n", o.passed ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), seconds);
  std::fflush(stdout);
}

RsmParams random_rsm(Eigen::Index K, Eigen::Index F, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  RsmParams p = RsmParams::zeros(K, F);
  for (double& x : p.weights.reshaped()) x = normal(rng);
  for (double& x : p.visible_bias) x = normal(rng);
  for (double& x : p.hidden_bias) x = normal(rng);
  return p;
}

std::vector<double> flatten_rsm(const Eigen::MatrixXd& w, const Eigen::VectorXd& bv, const Eigen::VectorXd& bh) {
  std::vector<double> out(w.data(), w.data() + w.size());
  out.insert(out.end(), bv.data(), bv.data() + bv.size());
  out.insert(out.end(), bh.data(), bh.data() + bh.size());
  return out;
}

RsmParams unflatten_rsm(const std::vector<double>& x, Eigen::Index K, Eigen::Index F) {
  RsmParams p = RsmParams::zeros(K, F);
  std::copy_n(x.begin(), K * F, p.weights.data());
  std::copy_n(x.begin() + K * F, K, p.visible_bias.data());
  std::copy_n(x.begin() + K * F + K, F, p.hidden_bias.data());
  return p;
}

Outcome normalization() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> pick_k(2, 4), pick_f(1, 3), pick_d(1, 3);
  double worst_sum = 0.0, worst_z = 0.0;
  for (int i = 0; i < kNormInstances; ++i) {
    const int K = pick_k(rng), F = pick_f(rng), D = pick_d(rng);
    const RsmParams p = random_rsm(K, F, 1.0, rng);
    const double log_z = exact_log_z(p, nullptr, static_cast<std::uint64_t>(D));
    double total = 0.0;
    brute::for_each_sequence(K, D, [&](const std::vector<int>& words) {
      total += std::exp(-free_energy(p, brute::document_of(words)) - log_z);
    });
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    worst_z = std::max(worst_z, std::abs(std::expm1(log_z - brute::log_z(p, nullptr, D))));
  }
  return {worst_sum <= kNormTolerance && worst_z <= kZRelTolerance,
          fmt::format("max |sum P - 1| = {:.3e} (tol {:.0e}), max rel Z error = {:.3e} (tol {:.0e}) over {} instances",
                      worst_sum, kNormTolerance, worst_z, kZRelTolerance, kNormInstances)};
}

Outcome rsm_gradient() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> pick_k(2, 4), pick_f(1, 3);
  double worst = 0.0;
  for (int i = 0; i < kRsmInstances; ++i) {
    const int K = pick_k(rng), F = pick_f(rng);
    const RsmParams p = random_rsm(K, F, 0.7, rng);
    std::uniform_int_distribution<int> word(0, K - 1), length(1, 3);
    std::vector<Document> docs;
    for (int n = 0; n < 3; ++n) {
      std::vector<int> w(static_cast<std::size_t>(length(rng)));
      for (int& x : w) x = word(rng);
      docs.push_back(brute::document_of(w));
    }
    const RsmGradient g = exact_rsm_gradient(p, docs);
    const auto cost = [&](const std::vector<double>& x) {
      const RsmParams q = unflatten_rsm(x, K, F);
      double nll = 0.0;
      for (const auto& d : docs) nll -= brute::log_prob(q, d);
      return nll;
    };
    const auto numeric =
        brute::numeric_gradient(cost, flatten_rsm(p.weights, p.visible_bias, p.hidden_bias), kFdEpsilon);
    worst = std::max(worst, brute::max_relative_deviation(
                                flatten_rsm(g.weights, g.visible_bias, g.hidden_bias), numeric, kFdFloor));
  }
  return {worst <= kRsmTolerance,
          fmt::format("max relative deviation {:.3e} (tol {:.0e}) over {} instances", worst, kRsmTolerance,
                      kRsmInstances)};
}

Outcome bptt_gradient() {
  double worst = 0.0;
  for (int i = 0; i < kBpttInstances; ++i) {
    std::mt19937_64 rng(derive_seed(303, {static_cast<std::uint64_t>(i)}));
    const TemporalCorpus corpus = make_random_corpus(3, 3, 2, 3, rng);
    RnnRsmParams p = random_rnn_rsm_params(3, 2, 2, 0.5, rng);
    const RnnRsmGradient g = sequence_gradient(p, corpus, exact_slice_estimator());
    const auto cost = [&](const std::vector<double>& x) {
      RnnRsmParams q = p;
      unflatten(x, q);
      return brute::sequence_nll(q, corpus);
    };
    const auto numeric = brute::numeric_gradient(cost, flatten(p), kFdEpsilon);
    worst = std::max(worst, brute::max_relative_deviation(flatten(g), numeric, kFdFloor));
  }
  return {worst <= kBpttTolerance,
          fmt::format("max relative deviation {:.3e} (tol {:.0e}) over {} instances, all parameter blocks", worst,
                      kBpttTolerance, kBpttInstances)};
}

Outcome cd_consistency() {
  std::mt19937_64 rng(404);
  const RsmParams p = random_rsm(4, 3, 0.5, rng);
  const std::vector<Document> docs = {brute::document_of({0, 0, 1}), brute::document_of({2, 3}),
                                      brute::document_of({3, 1, 1, 2})};
  const RsmGradient exact = exact_rsm_gradient(p, docs);
  const Eigen::Index n = p.vocab_size() + p.hidden_size();
  Eigen::VectorXd target(n);
  target << exact.visible_bias, exact.hidden_bias;

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sum_sq = Eigen::VectorXd::Zero(n);
  CdOptions options;
  options.k_steps = kCdSteps;
  for (int i = 0; i < kCdDraws; ++i) {
    const RsmGradient g = cd_gradient(p, docs, nullptr, options, derive_seed(4040, {static_cast<std::uint64_t>(i)}));
    Eigen::VectorXd v(n);
    v << g.visible_bias, g.hidden_bias;
    sum += v;
    sum_sq += v.cwiseProduct(v);
  }
  const Eigen::VectorXd mean = sum / kCdDraws;
  const Eigen::VectorXd var = (sum_sq / kCdDraws - mean.cwiseProduct(mean)) * kCdDraws / (kCdDraws - 1.0);
  int within = 0;
  double worst_z = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double se = std::sqrt(var[i] / kCdDraws);
    const double z = se > 0 ? std::abs(mean[i] - target[i]) / se : (mean[i] == target[i] ? 0.0 : INFINITY);
    worst_z = std::max(worst_z, z);
    within += z <= kCdStdErrors;
  }
  const double fraction = static_cast<double>(within) / static_cast<double>(n);
  return {fraction >= kCdComponentFraction,
          fmt::format("{}/{} bias components within {} SE (need {:.0f}%), worst {:.2f} SE, {} CD-{} draws", within, n,
                      kCdStdErrors, 100 * kCdComponentFraction, worst_z, kCdDraws, kCdSteps)};
}

Outcome uniform_perplexity() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  for (std::size_t K : {2u, 7u, 50u, 1000u}) {
    const TemporalCorpus corpus = make_random_corpus(K, 2, 5, 40, rng);
    for (int F : {1, 4, 12}) {
      const RnnRsmParams zero = RnnRsmParams::zeros(static_cast<Eigen::Index>(K), F, 3);
      const UnrolledState state = forward(zero, corpus);
      for (std::size_t t = 0; t < corpus.slice_count(); ++t) {
        const double ppl = perplexity(zero, state, corpus.slice(t).documents, t, ZMode::exact).perplexity;
        worst = std::max(worst, std::abs(ppl - static_cast<double>(K)) / static_cast<double>(K));
      }
    }
  }
  return {worst <= kUniformTolerance,
          fmt::format("max relative deviation from K {:.3e} (tol {:.0e})", worst, kUniformTolerance)};
}

Outcome metric_golden_values() {
  std::vector<std::string> failed;
  const std::vector<std::uint8_t> bits = {0, 1, 1, 1, 0, 1};
  if (longest_run(bits) != 3) failed.push_back("span");
  const double sd = *span_dict(19, 11741);
  if (fmt::format("{:.3f}", sd) != "0.002") failed.push_back("span_dict");
  if (topic_term_drift({"a", "b"}, {"a", "b"}) != 0.0) failed.push_back("ttd identical");
  if (topic_term_drift({"a", "b"}, {"c", "d"}) != 1.0) failed.push_back("ttd disjoint");
  std::istringstream always("x y\nx y\n"), independent("x y\nx\ny\nz\n"), apart("x\ny\n");
  if (npmi("x", "y", build_cooccurrence(always)) != 1.0) failed.push_back("npmi 1");
  if (npmi("x", "y", build_cooccurrence(independent)) != 0.0) failed.push_back("npmi 0");
  if (npmi("x", "y", build_cooccurrence(apart)) != -1.0) failed.push_back("npmi -1");
  std::string detail = fmt::format("span 3, span_dict(19, 11741) = {:.3f}, ttd 0/1, npmi 1/0/-1", sd);
  for (const auto& f : failed) detail += "; mismatch: " + f;
  return {failed.empty(), detail};
}

struct SynthRun {
  double accuracy = 0.0;
  bool monotone = false;
  double min_popularity = 0.0;
};

SynthRun synthetic_run(std::uint64_t seed) {
  RegionCorpusOptions opts;
  opts.docs_per_slice = 30 + kSynthHeldPerSlice;
  const TemporalCorpus full = make_region_corpus(opts, seed);
  const CorpusSplit split = split_held_out(full, kSynthHeldPerSlice, seed);

  // Learning rate, CD steps and the rest stay at the training defaults.
  TrainConfig cfg;
  cfg.epochs = kSynthEpochs;
  cfg.hidden = 5;
  cfg.recurrent = 5;
  cfg.seed = seed;
  const Trainer trainer(split.train, cfg);
  Checkpoint c = trainer.initialize();
  std::vector<double> costs;
  for (int e = 0; e < kSynthEpochs; ++e) {
    trainer.step(c);
    costs.push_back(exact_sequence_nll(c.params, split.train));
  }

  SynthRun run;
  std::vector<double> medians;
  for (int w = 0; w + kSynthWindow <= kSynthEpochs; w += kSynthWindow) {
    std::vector<double> window(costs.begin() + w, costs.begin() + w + kSynthWindow);
    std::nth_element(window.begin(), window.begin() + kSynthWindow / 2, window.end());
    const double upper = window[kSynthWindow / 2];
    const double lower = *std::max_element(window.begin(), window.begin() + kSynthWindow / 2);
    medians.push_back(0.5 * (upper + lower));
  }
  run.monotone = std::adjacent_find(medians.begin(), medians.end(), std::less_equal<>()) == medians.end();

  const UnrolledState state = forward(c.params, split.train);
  TimelineScorer scorer(c.params, state, ZMode::exact);
  std::size_t correct = 0, total = 0;
  for (std::size_t t = 0; t < split.held.slice_count(); ++t) {
    for (const auto& d : split.held.slice(t).documents) {
      correct += scorer.predict(d) == t;
      ++total;
    }
  }
  run.accuracy = static_cast<double>(correct) / static_cast<double>(total);

  const TopicSet topics = extract_topic_set(c.params, split.train, kSynthTopTerms);
  run.min_popularity = 1.0;
  for (std::size_t t = 0; t < opts.slices; ++t) {
    TermSet region;
    for (std::size_t i = 0; i < opts.terms_per_region; ++i) region.insert(fmt::format("r{}_w{}", t, i));
    run.min_popularity = std::min(run.min_popularity, topic_popularity(topics, region)[t]);
  }
  return run;
}

Outcome synthetic_end_to_end() {
  int accurate = 0, monotone = 0, separated = 0;
  double worst_accuracy = 1.0, worst_popularity = 1.0;
  for (int s = 1; s <= kSynthSeeds; ++s) {
    const SynthRun r = synthetic_run(static_cast<std::uint64_t>(s));
    accurate += r.accuracy >= kSynthAccuracy;
    monotone += r.monotone;
    separated += r.min_popularity >= kSynthPopularity;
    worst_accuracy = std::min(worst_accuracy, r.accuracy);
    worst_popularity = std::min(worst_popularity, r.min_popularity);
  }
  const bool ok = accurate == kSynthSeeds && separated == kSynthSeeds && monotone >= kSynthMonotoneSeeds;
  return {ok, fmt::format("(a) dating accuracy >= {} in {}/{} seeds (worst {:.3f}); (b) median cost decreasing in "
                          "{}/{} seeds (need {}); (c) region popularity >= {} in {}/{} seeds (worst {:.3f})",
                          kSynthAccuracy, accurate, kSynthSeeds, worst_accuracy, monotone, kSynthSeeds,
                          kSynthMonotoneSeeds, kSynthPopularity, separated, kSynthSeeds, worst_popularity)};
}

struct CliDir {
  fixtures::TempDir dir{"acceptance"};
  CliDir() { write_corpus(make_region_corpus({}, 11), dir / "corpus"); }
  int run(std::vector<std::string> args) const {
    args.insert(args.begin(), {"--workdir", dir.path().string(), "--log-level", "warn"});
    return run_cli(args);
  }
  std::string read(const std::string& name) const { return fixtures::slurp(dir / name); }
};

Outcome determinism() {
  const CliDir w;
  std::vector<std::string> mismatched;
  const std::vector<std::string> runs = {"a", "b", "c"};
  for (const auto& tag : runs) {
    std::filesystem::create_directories(w.dir / tag);
    std::vector<std::string> args = {"train", "--corpus", "corpus/manifest.json", "--epochs", "20", "--hidden", "5",
                                     "--recurrent", "5", "--held-per-slice", "5", "--eval-every", "5",
                                     "--binary-sidecar", "--out", tag + "/model.json", "--log", tag + "/train.csv"};
    if (tag == "c") args.insert(args.begin(), {"--threads", "4"});
    if (w.run(args) != 0) return {false, "train run " + tag + " failed"};
    for (const std::string what : {"topics", "perplexity", "timestamp"}) {
      if (w.run({"eval", what, "--checkpoint", tag + "/model.json", "--corpus", "corpus/manifest.json", "--out",
                 tag + "/" + what + ".csv"}) != 0) {
        return {false, "eval " + what + " failed"};
      }
    }
  }
  for (const std::string file :
       {"model.json", "model.json.bin", "train.csv", "topics.csv", "perplexity.csv", "timestamp.csv"}) {
    const std::string a = w.read("a/" + file);
    for (const std::string other : {"b", "c"}) {
      if (a.empty() || a != w.read(other + "/" + file)) mismatched.push_back(other + "/" + file);
    }
  }
  std::string detail = "checkpoint, sidecar, training log and eval CSVs identical across 2 runs and --threads 4";
  if (!mismatched.empty()) {
    detail = "differs:";
    for (const auto& m : mismatched) detail += " " + m;
  }
  return {mismatched.empty(), detail};
}

Outcome train_defaults() {
  const CliDir w;
  if (w.run({"train", "--corpus", "corpus/manifest.json", "--out", "defaults.json"}) != 0) {
    return {false, "train exited non-zero"};
  }
  const auto manifest = nlohmann::json::parse(w.read("run_manifest.json"));
  const auto& c = manifest.at("config");
  const bool ok = c.at("epochs") == 1000 && c.at("cd_k") == 15 && c.at("learning_rate") == 0.001 &&
                  c.at("hidden") == 30;
  return {ok, fmt::format("manifest epochs={} cd_k={} learning_rate={} hidden={}", c.at("epochs").dump(),
                          c.at("cd_k").dump(), c.at("learning_rate").dump(), c.at("hidden").dump())};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  report(1, "exact normalization", kNormSeconds, normalization);
  report(2, "rsm gradient vs finite differences", kRsmSeconds, rsm_gradient);
  report(3, "bptt gradient vs finite differences", kBpttSeconds, bptt_gradient);
  report(4, "cd consistency", kCdSeconds, cd_consistency);
  report(5, "uniform model perplexity", 0, uniform_perplexity);
  report(6, "metric golden values", 0, metric_golden_values);
  report(7, "synthetic end-to-end", kSynthSeconds, synthetic_end_to_end);
  report(8, "determinism", 0, determinism);
  report(9, "training defaults", 0, train_defaults);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
