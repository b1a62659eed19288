#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tempora/metrics.hpp"

namespace tempora {

/// Sliding-window document frequencies over a plain-text reference corpus.
/// Each line is tokenised on whitespace; a line of n tokens yields one window
/// when n <= window and n - window + 1 windows otherwise. count(x) is the number
/// of windows containing x, joint(x, y) the number containing both.
class CooccurrenceTable {
 public:
  static constexpr int kFormatVersion = 1;

  explicit CooccurrenceTable(std::size_t window = 5);

  std::size_t window() const noexcept { return window_; }
  std::uint64_t total_windows() const noexcept { return total_windows_; }
  bool contains(const std::string& term) const { return counts_.contains(term); }
  std::uint64_t count(const std::string& term) const;
  /// Symmetric; joint(x, x) == count(x).
  std::uint64_t joint(const std::string& x, const std::string& y) const;

  /// Records one window given its distinct tokens.
  void add_window(std::span<const std::string> distinct_terms);

  nlohmann::json to_json() const;
  static CooccurrenceTable from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& file) const;
  static CooccurrenceTable load(const std::filesystem::path& file);

  friend bool operator==(const CooccurrenceTable&, const CooccurrenceTable&) = default;

 private:
  std::size_t window_;
  std::uint64_t total_windows_ = 0;
  std::map<std::string, std::uint64_t> counts_;
  std::map<std::pair<std::string, std::string>, std::uint64_t> joint_;  // key ordered first < second
};

/// `keep`, when given, restricts the table to those terms (windows are still
/// formed over the full token stream). Throws InputError for window 0.
CooccurrenceTable build_cooccurrence(std::istream& text, std::size_t window = 5, const TermSet* keep = nullptr);
CooccurrenceTable build_cooccurrence(const std::filesystem::path& text, std::size_t window = 5,
                                     const TermSet* keep = nullptr);

/// log(p(x,y) / (p(x) p(y))) / -log p(x,y); -1 when the pair never
/// co-occurs and 1 when p(x,y) = 1.
double npmi(const std::string& x, const std::string& y, const CooccurrenceTable& table);

/// Mean pairwise cosine of the words' NPMI context vectors, each taken over
/// the topic's own word set. Words missing from the table get a zero vector;
/// the warning goes to `warnings` when given, else to the log. Needs at least
/// two words.
double coherence(std::span<const std::string> topic, const CooccurrenceTable& table,
                 std::vector<std::string>* warnings = nullptr);

}  // namespace tempora
