#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "tempora/corpus.hpp"
#include "tempora/rnn_rsm.hpp"

namespace fixtures {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("tempora-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  void write(const std::string& name, const std::string& content) const {
    std::ofstream(path_ / name, std::ios::binary) << content;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline tempora::Document doc(std::initializer_list<std::pair<tempora::TermId, std::uint32_t>> counts) {
  std::vector<tempora::Document::Entry> entries;
  for (auto [t, c] : counts) entries.push_back({t, c});
  return tempora::Document(std::move(entries));
}

inline tempora::TemporalCorpus corpus_of(std::size_t K, std::vector<std::vector<tempora::Document>> slices) {
  std::vector<std::string> terms;
  for (std::size_t k = 0; k < K; ++k) terms.push_back("w" + std::to_string(k));
  std::vector<tempora::TimeSlice> out;
  for (std::size_t t = 0; t < slices.size(); ++t) out.push_back({std::to_string(2000 + t), std::move(slices[t])});
  return tempora::TemporalCorpus(std::make_shared<const tempora::Vocabulary>(std::move(terms)), std::move(out));
}

}  // namespace fixtures
