#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace tempora {

using TermId = std::uint32_t;

/// Dense 0-based term ids shared by every slice of a corpus.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Throws InputError on duplicate terms.
  explicit Vocabulary(std::vector<std::string> terms);

  std::size_t size() const noexcept { return terms_.size(); }
  const std::string& term(TermId id) const { return terms_.at(id); }
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::optional<TermId> find(std::string_view term) const;
  /// Throws InputError naming the term when it is not present.
  TermId id(std::string_view term) const;

  /// FNV-1a over the newline-joined term list, as 16 hex digits.
  std::string hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.terms_ == b.terms_; }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };
  std::vector<std::string> terms_;
  std::unordered_map<std::string, TermId, StringHash, std::equal_to<>> index_;
};

/// Sparse word counts of one document. Entries are sorted by term id, every
/// count is >= 1 and the document holds at least one word.
class Document {
 public:
  struct Entry {
    TermId term;
    std::uint32_t count;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  /// Merges repeated term ids and sorts. Throws InputError for zero counts or
  /// an empty document.
  explicit Document(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::uint64_t length() const noexcept { return length_; }
  std::uint32_t count(TermId term) const;
  TermId max_term() const noexcept { return entries_.back().term; }

  /// Dense count vector of size K.
  Eigen::VectorXd dense(std::size_t vocab_size) const;

  friend bool operator==(const Document&, const Document&) = default;

 private:
  std::vector<Entry> entries_;
  std::uint64_t length_ = 0;
};

struct TimeSlice {
  std::string label;
  std::vector<Document> documents;

  std::size_t size() const noexcept { return documents.size(); }
  std::uint64_t token_count() const;
  friend bool operator==(const TimeSlice&, const TimeSlice&) = default;
};

/// Time-ordered slices over one shared vocabulary. Slice order is the order of
/// construction; labels are opaque but must be unique.
class TemporalCorpus {
 public:
  TemporalCorpus() = default;
  /// Validates unique labels and that every term id is inside the vocabulary.
  TemporalCorpus(std::shared_ptr<const Vocabulary> vocabulary, std::vector<TimeSlice> slices);

  const Vocabulary& vocabulary() const { return *vocabulary_; }
  const std::shared_ptr<const Vocabulary>& shared_vocabulary() const noexcept { return vocabulary_; }
  const std::vector<TimeSlice>& slices() const noexcept { return slices_; }
  const TimeSlice& slice(std::size_t t) const { return slices_.at(t); }
  std::size_t slice_count() const noexcept { return slices_.size(); }
  std::size_t vocab_size() const { return vocabulary_ ? vocabulary_->size() : 0; }

  std::size_t document_count() const;
  std::uint64_t token_count() const;
  /// Sum over the slice's documents of their dense count vectors.
  Eigen::VectorXd slice_count_sum(std::size_t t) const;
  /// Total corpus frequency of every term.
  std::vector<std::uint64_t> term_totals() const;

  friend bool operator==(const TemporalCorpus& a, const TemporalCorpus& b) {
    return a.vocabulary() == b.vocabulary() && a.slices_ == b.slices_;
  }

 private:
  std::shared_ptr<const Vocabulary> vocabulary_ = std::make_shared<const Vocabulary>();
  std::vector<TimeSlice> slices_;
};

struct IngestOptions {
  /// Pre-supplied vocabulary file; overrides the manifest's "vocabulary" entry.
  std::optional<std::filesystem::path> vocabulary;
  /// Fixed in-memory vocabulary; takes precedence over any file.
  std::shared_ptr<const Vocabulary> fixed_vocabulary;
  unsigned threads = 1;
};

/// Reads a JSON manifest {"slices": [{"label", "file"}...], "vocabulary"?}.
/// Paths inside the manifest are relative to the manifest's directory.
/// Without a vocabulary file the vocabulary is the sorted union of all terms.
TemporalCorpus ingest(const std::filesystem::path& manifest, const IngestOptions& options = {},
                      std::vector<std::string>* warnings = nullptr);

/// Parses one slice file. Every line is a document of `term:count` (or bare
/// `term`, count 1) tokens; `#` lines are comments.
struct RawDocument {
  std::vector<std::pair<std::string, std::uint32_t>> counts;
};
std::vector<RawDocument> parse_slice(std::istream& in, const std::string& source_name);

Vocabulary read_vocabulary(const std::filesystem::path& file);
void write_vocabulary(const Vocabulary& vocabulary, const std::filesystem::path& file);

/// Writes manifest.json, vocabulary.txt and one .bow file per slice into `dir`.
void write_corpus(const TemporalCorpus& corpus, const std::filesystem::path& dir);
void write_slice(const TimeSlice& slice, const Vocabulary& vocabulary, std::ostream& out);

struct CorpusSplit {
  TemporalCorpus train;
  TemporalCorpus held;
};

/// Moves exactly `per_slice` documents of every slice into `held`.
CorpusSplit split_held_out(const TemporalCorpus& corpus, std::size_t per_slice, std::uint64_t seed);

/// Per slice, floor(N * (1 - train_fraction)) documents go to `held`.
CorpusSplit split_fraction(const TemporalCorpus& corpus, double train_fraction, std::uint64_t seed);

}  // namespace tempora
