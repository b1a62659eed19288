#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tempora/corpus.hpp"
#include "tempora/exact.hpp"
#include "tempora/rnn_rsm.hpp"

namespace tempora {

// --- perplexity and dating ---------------------------------------------------

enum class PerplexityNormalization {
  /// exp(-sum log P / sum D)
  per_word,
  /// exp(-(1/N) sum log P / sum D), N = number of documents
  per_word_per_document,
};

struct PerplexityResult {
  double perplexity = 0.0;
  double log_prob = 0.0;
  std::uint64_t words = 0;
  std::size_t documents = 0;
};

/// Throws InputError for an empty document set.
PerplexityResult perplexity(DocumentScorer& scorer, std::span<const Document> docs,
                            PerplexityNormalization norm = PerplexityNormalization::per_word);

/// Scores `docs` under slice t's bias override from `state`.
PerplexityResult perplexity(const RnnRsmParams& params, const UnrolledState& state, std::span<const Document> docs,
                            std::size_t t, ZMode mode, const AisOptions& ais = {},
                            PerplexityNormalization norm = PerplexityNormalization::per_word);

/// One scorer per slice of an unrolled model; log Z is cached per length.
class TimelineScorer {
 public:
  /// `params` and `state` must outlive the scorer.
  TimelineScorer(const RnnRsmParams& params, const UnrolledState& state, ZMode mode, const AisOptions& ais = {});

  std::size_t slice_count() const noexcept { return scorers_.size(); }
  double log_prob(std::size_t t, const Document& doc) { return scorers_.at(t).log_prob(doc); }
  /// Slice minimising the document's perplexity; ties go to the earliest slice.
  std::size_t predict(const Document& doc);

 private:
  std::vector<DocumentScorer> scorers_;
};

std::size_t predict_timestamp(const RnnRsmParams& params, const UnrolledState& state, const Document& doc,
                              ZMode mode, const AisOptions& ais = {});

/// Mean |predicted - truth| with labels read as integer years.
double mean_absolute_error_years(std::span<const std::string> predictions, std::span<const std::string> truths);

// --- topics -----------------------------------------------------------------

using TermSet = std::set<std::string>;

struct Topic {
  std::vector<std::string> terms;
  std::vector<double> probabilities;
};

/// Topics of every slice, in slice order.
struct TopicSet {
  std::vector<std::string> labels;
  std::vector<std::vector<Topic>> slices;

  bool empty() const;
};

/// Topic j of slice t: the top_n terms of visible_distribution(e_j) under the
/// slice-t bias override, ties broken lexicographically. top_n > K is clamped.
std::vector<Topic> extract_topics(const RnnRsmParams& params, const UnrolledState& state,
                                  const Vocabulary& vocabulary, std::size_t t, std::size_t top_n = 20);

TopicSet extract_topic_set(const RnnRsmParams& params, const TemporalCorpus& corpus, std::size_t top_n = 20);

/// Union of the terms of all topics.
TermSet slice_terms(std::span<const Topic> topics);
TermSet topic_set_terms(const TopicSet& topics);

/// Cosine of binary incidence vectors: |a & b| / sqrt(|a| |b|); 0 if either is empty.
double set_cosine(const TermSet& a, const TermSet& b);

/// Per slice, the best set_cosine between a topic and the key terms.
std::vector<double> topic_popularity(const TopicSet& topics, const TermSet& key_terms);

/// 1 - set_cosine(q_t, q_t2).
double topic_term_drift(const TermSet& q_t, const TermSet& q_t2);

// --- keyword trend and span ---------------------------------------------------

struct TrendSequence {
  std::string keyword;
  std::vector<std::uint8_t> bits;
  std::size_t span = 0;
  std::uint64_t count = 0;
  /// span / count; absent when the keyword never occurs in the corpus.
  std::optional<double> span_dict;
};

/// Length of the longest run of non-zero entries.
std::size_t longest_run(std::span<const std::uint8_t> bits);

/// span_dict for a given span and corpus count; nullopt when count is 0.
std::optional<double> span_dict(std::size_t span, std::uint64_t count);

TrendSequence keyword_trend(const TopicSet& topics, const std::string& keyword, std::uint64_t count);
/// Looks the keyword's corpus count up in `corpus` (0 when out of vocabulary).
TrendSequence keyword_trend(const TopicSet& topics, const std::string& keyword, const TemporalCorpus& corpus);

/// Mean of span/count over every unique topic term; terms with zero corpus
/// count contribute 0 but still count towards the denominator.
double avg_span(const TopicSet& topics, const TemporalCorpus& corpus);

}  // namespace tempora
