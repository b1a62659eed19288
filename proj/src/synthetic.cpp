#include "tempora/synthetic.hpp"

#include <string>

#include "tempora/errors.hpp"
#include "tempora/numeric.hpp"

namespace tempora {

namespace {

Document random_document(std::size_t first_term, std::size_t terms, std::uint32_t length, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, terms - 1);
  std::vector<Document::Entry> entries;
  entries.reserve(length);
  for (std::uint32_t i = 0; i < length; ++i) entries.push_back({static_cast<TermId>(first_term + pick(rng)), 1});
  return Document(std::move(entries));
}

}  // namespace

TemporalCorpus make_region_corpus(const RegionCorpusOptions& o, std::uint64_t seed) {
  if (o.slices == 0 || o.terms_per_region == 0 || o.min_length == 0 || o.min_length > o.max_length) {
    throw InputError("invalid region corpus options");
  }
  std::vector<std::string> terms;
  for (std::size_t t = 0; t < o.slices; ++t) {
    for (std::size_t i = 0; i < o.terms_per_region; ++i) {
      terms.push_back("r" + std::to_string(t) + "_w" + std::to_string(i));
    }
  }
  auto vocabulary = std::make_shared<const Vocabulary>(std::move(terms));
  std::vector<TimeSlice> slices;
  for (std::size_t t = 0; t < o.slices; ++t) {
    std::mt19937_64 rng(derive_seed(seed, {t}));
    std::uniform_int_distribution<std::uint32_t> length(o.min_length, o.max_length);
    TimeSlice slice{std::to_string(o.first_year + static_cast<int>(t)), {}};
    for (std::size_t d = 0; d < o.docs_per_slice; ++d) {
      slice.documents.push_back(random_document(t * o.terms_per_region, o.terms_per_region, length(rng), rng));
    }
    slices.push_back(std::move(slice));
  }
  return TemporalCorpus(std::move(vocabulary), std::move(slices));
}

TemporalCorpus make_random_corpus(std::size_t vocab_size, std::size_t slices, std::size_t docs_per_slice,
                                  std::uint32_t max_length, std::mt19937_64& rng) {
  if (vocab_size == 0 || max_length == 0) throw InputError("invalid random corpus options");
  std::vector<std::string> terms;
  for (std::size_t k = 0; k < vocab_size; ++k) terms.push_back("w" + std::to_string(k));
  auto vocabulary = std::make_shared<const Vocabulary>(std::move(terms));
  std::uniform_int_distribution<std::uint32_t> length(1, max_length);
  std::vector<TimeSlice> out;
  for (std::size_t t = 0; t < slices; ++t) {
    TimeSlice slice{std::to_string(2000 + t), {}};
    for (std::size_t d = 0; d < docs_per_slice; ++d) {
      slice.documents.push_back(random_document(0, vocab_size, length(rng), rng));
    }
    out.push_back(std::move(slice));
  }
  return TemporalCorpus(std::move(vocabulary), std::move(out));
}

RnnRsmParams random_rnn_rsm_params(Eigen::Index K, Eigen::Index F, Eigen::Index U, double scale,
                                   std::mt19937_64& rng) {
  RnnRsmParams p = RnnRsmParams::zeros(K, F, U);
  std::normal_distribution<double> normal(0.0, scale);
  for (const auto& block : parameter_blocks(p)) {
    for (double& v : block.values()) v = normal(rng);
  }
  return p;
}

}  // namespace tempora
