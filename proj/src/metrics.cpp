#include "tempora/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "tempora/errors.hpp"
#include "tempora/numeric.hpp"

namespace tempora {

PerplexityResult perplexity(DocumentScorer& scorer, std::span<const Document> docs, PerplexityNormalization norm) {
  if (docs.empty()) throw InputError("perplexity of an empty document set");
  PerplexityResult r;
  r.documents = docs.size();
  for (const auto& doc : docs) {
    r.log_prob += scorer.log_prob(doc);
    r.words += doc.length();
  }
  double exponent = -r.log_prob / static_cast<double>(r.words);
  if (norm == PerplexityNormalization::per_word_per_document) exponent /= static_cast<double>(r.documents);
  r.perplexity = std::exp(exponent);
  return r;
}

namespace {

AisOptions slice_ais(const AisOptions& ais, std::size_t t) {
  AisOptions out = ais;
  out.seed = derive_seed(ais.seed, {t});
  return out;
}

}  // namespace

PerplexityResult perplexity(const RnnRsmParams& params, const UnrolledState& state, std::span<const Document> docs,
                            std::size_t t, ZMode mode, const AisOptions& ais, PerplexityNormalization norm) {
  if (t >= state.biases.size()) {
    throw InputError("slice " + std::to_string(t) + " is outside the unrolled timeline of " +
                     std::to_string(state.biases.size()) + " slices");
  }
  DocumentScorer scorer(params.rsm, state.biases[t], mode, slice_ais(ais, t));
  return perplexity(scorer, docs, norm);
}

TimelineScorer::TimelineScorer(const RnnRsmParams& params, const UnrolledState& state, ZMode mode,
                               const AisOptions& ais) {
  scorers_.reserve(state.biases.size());
  for (std::size_t t = 0; t < state.biases.size(); ++t) {
    scorers_.emplace_back(params.rsm, state.biases[t], mode, slice_ais(ais, t));
  }
}

std::size_t TimelineScorer::predict(const Document& doc) {
  if (scorers_.empty()) throw InputError("cannot date a document against an empty timeline");
  // Per-document perplexity is monotone in -log P for a fixed length.
  std::size_t best = 0;
  double best_lp = scorers_[0].log_prob(doc);
  for (std::size_t t = 1; t < scorers_.size(); ++t) {
    const double lp = scorers_[t].log_prob(doc);
    if (lp > best_lp) {
      best_lp = lp;
      best = t;
    }
  }
  return best;
}

std::size_t predict_timestamp(const RnnRsmParams& params, const UnrolledState& state, const Document& doc,
                              ZMode mode, const AisOptions& ais) {
  TimelineScorer scorer(params, state, mode, ais);
  return scorer.predict(doc);
}

namespace {

long long parse_year(const std::string& label) {
  long long value = 0;
  const char* end = label.data() + label.size();
  auto [ptr, ec] = std::from_chars(label.data(), end, value);
  if (ec != std::errc() || ptr != end || label.empty()) {
    throw InputError("slice label '" + label + "' is not an integer year");
  }
  return value;
}

}  // namespace

double mean_absolute_error_years(std::span<const std::string> predictions, std::span<const std::string> truths) {
  if (predictions.size() != truths.size()) {
    throw InputError("prediction and truth counts differ (" + std::to_string(predictions.size()) + " vs " +
                     std::to_string(truths.size()) + ")");
  }
  if (predictions.empty()) throw InputError("no predictions to score");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += static_cast<double>(std::llabs(parse_year(predictions[i]) - parse_year(truths[i])));
  }
  return total / static_cast<double>(predictions.size());
}

bool TopicSet::empty() const {
  return std::all_of(slices.begin(), slices.end(), [](const auto& topics) {
    return std::all_of(topics.begin(), topics.end(), [](const Topic& topic) { return topic.terms.empty(); });
  });
}

std::vector<Topic> extract_topics(const RnnRsmParams& params, const UnrolledState& state,
                                  const Vocabulary& vocabulary, std::size_t t, std::size_t top_n) {
  const auto K = static_cast<std::size_t>(params.vocab_size());
  if (vocabulary.size() != K) {
    throw DimensionError("vocabulary has " + std::to_string(vocabulary.size()) + " terms, model expects " +
                         std::to_string(K));
  }
  if (t >= state.biases.size()) throw InputError("slice " + std::to_string(t) + " is outside the timeline");
  if (top_n > K) {
    spdlog::warn("top {} exceeds the vocabulary size; clamping to {}", top_n, K);
    top_n = K;
  }
  const Eigen::Index F = params.hidden_size();
  std::vector<Topic> topics(static_cast<std::size_t>(F));
  std::vector<TermId> order(K);
  for (Eigen::Index j = 0; j < F; ++j) {
    const HiddenState h = HiddenState::Unit(F, j);
    const Eigen::VectorXd p = visible_distribution(params.rsm, h, &state.biases[t]);
    std::iota(order.begin(), order.end(), TermId{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_n), order.end(),
                      [&](TermId a, TermId b) {
                        if (p[a] != p[b]) return p[a] > p[b];
                        return vocabulary.term(a) < vocabulary.term(b);
                      });
    Topic& topic = topics[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < top_n; ++i) {
      topic.terms.push_back(vocabulary.term(order[i]));
      topic.probabilities.push_back(p[order[i]]);
    }
  }
  return topics;
}

TopicSet extract_topic_set(const RnnRsmParams& params, const TemporalCorpus& corpus, std::size_t top_n) {
  const auto K = static_cast<std::size_t>(params.vocab_size());
  if (top_n > K) {
    spdlog::warn("top {} exceeds the vocabulary size; clamping to {}", top_n, K);
    top_n = K;
  }
  const UnrolledState state = forward(params, corpus);
  TopicSet out;
  for (std::size_t t = 0; t < corpus.slice_count(); ++t) {
    out.labels.push_back(corpus.slice(t).label);
    out.slices.push_back(extract_topics(params, state, corpus.vocabulary(), t, top_n));
  }
  return out;
}

TermSet slice_terms(std::span<const Topic> topics) {
  TermSet out;
  for (const auto& topic : topics) out.insert(topic.terms.begin(), topic.terms.end());
  return out;
}

TermSet topic_set_terms(const TopicSet& topics) {
  TermSet out;
  for (const auto& slice : topics.slices) out.merge(slice_terms(slice));
  return out;
}

double set_cosine(const TermSet& a, const TermSet& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  if (common == a.size() && common == b.size()) return 1.0;
  return static_cast<double>(common) / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

std::vector<double> topic_popularity(const TopicSet& topics, const TermSet& key_terms) {
  std::vector<double> out;
  out.reserve(topics.slices.size());
  for (const auto& slice : topics.slices) {
    double best = 0.0;
    for (const auto& topic : slice) {
      best = std::max(best, set_cosine(TermSet(topic.terms.begin(), topic.terms.end()), key_terms));
    }
    out.push_back(best);
  }
  return out;
}

double topic_term_drift(const TermSet& q_t, const TermSet& q_t2) { return 1.0 - set_cosine(q_t, q_t2); }

std::size_t longest_run(std::span<const std::uint8_t> bits) {
  std::size_t best = 0;
  std::size_t run = 0;
  for (auto b : bits) {
    run = b ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

std::optional<double> span_dict(std::size_t span, std::uint64_t count) {
  if (count == 0) return std::nullopt;
  return static_cast<double>(span) / static_cast<double>(count);
}

TrendSequence keyword_trend(const TopicSet& topics, const std::string& keyword, std::uint64_t count) {
  TrendSequence trend;
  trend.keyword = keyword;
  trend.count = count;
  trend.bits.reserve(topics.slices.size());
  for (const auto& slice : topics.slices) {
    const bool present = std::any_of(slice.begin(), slice.end(), [&](const Topic& topic) {
      return std::find(topic.terms.begin(), topic.terms.end(), keyword) != topic.terms.end();
    });
    trend.bits.push_back(present ? 1 : 0);
  }
  trend.span = longest_run(trend.bits);
  trend.span_dict = span_dict(trend.span, count);
  return trend;
}

TrendSequence keyword_trend(const TopicSet& topics, const std::string& keyword, const TemporalCorpus& corpus) {
  std::uint64_t count = 0;
  if (auto id = corpus.vocabulary().find(keyword)) count = corpus.term_totals()[*id];
  return keyword_trend(topics, keyword, count);
}

double avg_span(const TopicSet& topics, const TemporalCorpus& corpus) {
  const TermSet terms = topic_set_terms(topics);
  if (terms.empty()) throw InputError("empty topic set");
  const auto totals = corpus.term_totals();
  double sum = 0.0;
  for (const auto& term : terms) {
    std::uint64_t count = 0;
    if (auto id = corpus.vocabulary().find(term)) count = totals[*id];
    sum += keyword_trend(topics, term, count).span_dict.value_or(0.0);
  }
  return sum / static_cast<double>(terms.size());
}

}  // namespace tempora
