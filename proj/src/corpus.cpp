#include "tempora/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "tempora/errors.hpp"
#include "tempora/numeric.hpp"
#include "tempora/parallel.hpp"

namespace tempora {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms)) {
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (terms_[i].empty()) throw InputError("vocabulary: empty term at id " + std::to_string(i));
    auto [it, inserted] = index_.emplace(terms_[i], static_cast<TermId>(i));
    if (!inserted) throw InputError("vocabulary: duplicate term '" + terms_[i] + "'");
  }
}

std::optional<TermId> Vocabulary::find(std::string_view term) const {
  auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TermId Vocabulary::id(std::string_view term) const {
  if (auto found = find(term)) return *found;
  throw InputError("unknown token '" + std::string(term) + "' (not in vocabulary)");
}

std::string Vocabulary::hash() const {
  Fnv1a h;
  for (const auto& t : terms_) {
    h.update(t);
    h.update("\n");
  }
  return h.hex();
}

// ---------------------------------------------------------------------------
// Document / slices

Document::Document(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.term < b.term; });
  for (const Entry& e : entries) {
    if (e.count == 0) throw InputError("document: zero count for term id " + std::to_string(e.term));
    if (!entries_.empty() && entries_.back().term == e.term) {
      entries_.back().count += e.count;
    } else {
      entries_.push_back(e);
    }
    length_ += e.count;
  }
  if (length_ == 0) throw InputError("document: empty document");
}

std::uint32_t Document::count(TermId term) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), term,
                             [](const Entry& e, TermId t) { return e.term < t; });
  return (it != entries_.end() && it->term == term) ? it->count : 0;
}

Eigen::VectorXd Document::dense(std::size_t vocab_size) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab_size));
  for (const Entry& e : entries_) {
    if (e.term >= vocab_size) throw DimensionError("document term id exceeds vocabulary size");
    v[e.term] = e.count;
  }
  return v;
}

std::uint64_t TimeSlice::token_count() const {
  std::uint64_t n = 0;
  for (const auto& d : documents) n += d.length();
  return n;
}

TemporalCorpus::TemporalCorpus(std::shared_ptr<const Vocabulary> vocabulary, std::vector<TimeSlice> slices)
    : vocabulary_(std::move(vocabulary)), slices_(std::move(slices)) {
  if (!vocabulary_) throw InputError("corpus: missing vocabulary");
  std::set<std::string> labels;
  for (const auto& s : slices_) {
    if (!labels.insert(s.label).second) throw InputError("corpus: duplicate slice label '" + s.label + "'");
    for (const auto& d : s.documents) {
      if (d.max_term() >= vocabulary_->size()) {
        throw InputError("corpus: slice '" + s.label + "' references term id outside the vocabulary");
      }
    }
  }
}

std::size_t TemporalCorpus::document_count() const {
  std::size_t n = 0;
  for (const auto& s : slices_) n += s.size();
  return n;
}

std::uint64_t TemporalCorpus::token_count() const {
  std::uint64_t n = 0;
  for (const auto& s : slices_) n += s.token_count();
  return n;
}

Eigen::VectorXd TemporalCorpus::slice_count_sum(std::size_t t) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab_size()));
  for (const auto& d : slice(t).documents) {
    for (const auto& e : d.entries()) sum[e.term] += e.count;
  }
  return sum;
}

std::vector<std::uint64_t> TemporalCorpus::term_totals() const {
  std::vector<std::uint64_t> totals(vocab_size(), 0);
  for (const auto& s : slices_) {
    for (const auto& d : s.documents) {
      for (const auto& e : d.entries()) totals[e.term] += e.count;
    }
  }
  return totals;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

std::pair<std::string, std::uint32_t> parse_token(std::string_view token, const std::string& source,
                                                  std::size_t line) {
  const auto colon = token.rfind(':');
  if (colon == std::string_view::npos) return {std::string(token), 1u};
  const std::string_view term = token.substr(0, colon);
  const std::string_view digits = token.substr(colon + 1);
  if (term.empty()) throw ParseError(source, line, "empty term in '" + std::string(token) + "'");
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ParseError(source, line, "count is not a positive decimal integer in '" + std::string(token) + "'");
  }
  std::uint32_t count = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), count);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    throw ParseError(source, line, "count out of range in '" + std::string(token) + "'");
  }
  if (count == 0) throw ParseError(source, line, "count must be positive in '" + std::string(token) + "'");
  return {std::string(term), count};
}

}  // namespace

std::vector<RawDocument> parse_slice(std::istream& in, const std::string& source_name) {
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (!body.empty() && body.front() == '#') continue;
    if (body.empty()) throw ParseError(source_name, line_no, "empty document");
    RawDocument doc;
    std::size_t pos = 0;
    while (pos < body.size()) {
      const auto start = body.find_first_not_of(" \t", pos);
      if (start == std::string_view::npos) break;
      const auto end = std::min(body.find_first_of(" \t", start), body.size());
      doc.counts.push_back(parse_token(body.substr(start, end - start), source_name, line_no));
      pos = end;
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

Vocabulary read_vocabulary(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw InputError("cannot open vocabulary file " + file.string());
  std::vector<std::string> terms;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view term = trim(line);
    if (term.empty()) throw ParseError(file.string(), line_no, "empty vocabulary entry");
    terms.emplace_back(term);
  }
  return Vocabulary(std::move(terms));
}

void write_vocabulary(const Vocabulary& vocabulary, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw InputError("cannot write " + file.string());
  for (const auto& t : vocabulary.terms()) out << t << '\n';
}

TemporalCorpus ingest(const fs::path& manifest_path, const IngestOptions& options,
                      std::vector<std::string>* warnings) {
  std::ifstream manifest_in(manifest_path);
  if (!manifest_in) throw InputError("cannot open manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(manifest_in);
  } catch (const json::parse_error& e) {
    throw InputError("manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("slices") || !manifest["slices"].is_array()) {
    throw InputError("manifest " + manifest_path.string() + ": missing \"slices\" array");
  }
  const fs::path base = manifest_path.parent_path();

  struct SliceSource {
    std::string label;
    fs::path file;
  };
  std::vector<SliceSource> sources;
  for (const auto& entry : manifest["slices"]) {
    if (!entry.contains("label") || !entry.contains("file")) {
      throw InputError("manifest " + manifest_path.string() + ": slice entries need \"label\" and \"file\"");
    }
    const json& label = entry["label"];
    sources.push_back({label.is_string() ? label.get<std::string>() : label.dump(),
                       base / entry["file"].get<std::string>()});
  }

  std::vector<std::vector<RawDocument>> parsed(sources.size());
  parallel_for(sources.size(), options.threads, [&](std::size_t i) {
    std::ifstream in(sources[i].file);
    if (!in) throw InputError("cannot open slice file " + sources[i].file.string());
    parsed[i] = parse_slice(in, sources[i].file.string());
  });

  std::optional<fs::path> vocab_file = options.vocabulary;
  if (!vocab_file && manifest.contains("vocabulary") && manifest["vocabulary"].is_string()) {
    vocab_file = base / manifest["vocabulary"].get<std::string>();
  }

  std::shared_ptr<const Vocabulary> vocabulary;
  if (options.fixed_vocabulary) {
    vocabulary = options.fixed_vocabulary;
  } else if (vocab_file) {
    vocabulary = std::make_shared<const Vocabulary>(read_vocabulary(*vocab_file));
  } else {
    std::set<std::string> all;
    for (const auto& slice : parsed) {
      for (const auto& doc : slice) {
        for (const auto& [term, count] : doc.counts) all.insert(term);
      }
    }
    vocabulary = std::make_shared<const Vocabulary>(std::vector<std::string>(all.begin(), all.end()));
  }

  std::vector<TimeSlice> slices;
  slices.reserve(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    TimeSlice slice{sources[i].label, {}};
    slice.documents.reserve(parsed[i].size());
    for (const auto& raw : parsed[i]) {
      std::vector<Document::Entry> entries;
      entries.reserve(raw.counts.size());
      for (const auto& [term, count] : raw.counts) {
        const auto id = vocabulary->find(term);
        if (!id) {
          throw InputError(sources[i].file.string() + ": unknown token '" + term + "' (not in vocabulary)");
        }
        entries.push_back({*id, count});
      }
      slice.documents.emplace_back(std::move(entries));
    }
    if (slice.documents.empty()) {
      const std::string msg = "slice '" + slice.label + "' (" + sources[i].file.string() + ") has no documents";
      spdlog::warn(msg);
      if (warnings) warnings->push_back(msg);
    }
    slices.push_back(std::move(slice));
  }
  return TemporalCorpus(std::move(vocabulary), std::move(slices));
}

void write_slice(const TimeSlice& slice, const Vocabulary& vocabulary, std::ostream& out) {
  for (const auto& doc : slice.documents) {
    bool first = true;
    for (const auto& e : doc.entries()) {
      if (!first) out << ' ';
      out << vocabulary.term(e.term) << ':' << e.count;
      first = false;
    }
    out << '\n';
  }
}

void write_corpus(const TemporalCorpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  write_vocabulary(corpus.vocabulary(), dir / "vocabulary.txt");
  json manifest;
  manifest["vocabulary"] = "vocabulary.txt";
  manifest["slices"] = json::array();
  for (std::size_t t = 0; t < corpus.slice_count(); ++t) {
    const std::string file = "slice_" + std::to_string(t) + ".bow";
    std::ofstream out(dir / file);
    if (!out) throw InputError("cannot write " + (dir / file).string());
    write_slice(corpus.slice(t), corpus.vocabulary(), out);
    manifest["slices"].push_back({{"label", corpus.slice(t).label}, {"file", file}});
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Splits

namespace {

CorpusSplit split_by_counts(const TemporalCorpus& corpus, const std::vector<std::size_t>& held_counts,
                            std::uint64_t seed) {
  std::vector<TimeSlice> train, held;
  for (std::size_t t = 0; t < corpus.slice_count(); ++t) {
    const TimeSlice& slice = corpus.slice(t);
    std::vector<std::size_t> order(slice.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, {t}));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> is_held(slice.size(), false);
    for (std::size_t i = 0; i < held_counts[t]; ++i) is_held[order[i]] = true;

    TimeSlice tr{slice.label, {}}, he{slice.label, {}};
    for (std::size_t i = 0; i < slice.size(); ++i) {
      (is_held[i] ? he : tr).documents.push_back(slice.documents[i]);
    }
    train.push_back(std::move(tr));
    held.push_back(std::move(he));
  }
  return {TemporalCorpus(corpus.shared_vocabulary(), std::move(train)),
          TemporalCorpus(corpus.shared_vocabulary(), std::move(held))};
}

}  // namespace

CorpusSplit split_held_out(const TemporalCorpus& corpus, std::size_t per_slice, std::uint64_t seed) {
  for (const auto& s : corpus.slices()) {
    if (per_slice > s.size()) {
      throw InputError("split: slice '" + s.label + "' has " + std::to_string(s.size()) +
                       " documents, fewer than the " + std::to_string(per_slice) + " requested");
    }
  }
  return split_by_counts(corpus, std::vector<std::size_t>(corpus.slice_count(), per_slice), seed);
}

CorpusSplit split_fraction(const TemporalCorpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InputError("split: train fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> held_counts;
  for (const auto& s : corpus.slices()) {
    // The epsilon keeps exact products such as 5 * 0.2 from flooring to 0.
    const double raw = static_cast<double>(s.size()) * (1.0 - train_fraction);
    held_counts.push_back(static_cast<std::size_t>(std::floor(raw + 1e-9)));
  }
  return split_by_counts(corpus, held_counts, seed);
}

}  // namespace tempora
