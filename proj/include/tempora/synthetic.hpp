#pragma once

#include <cstdint>
#include <random>

#include "tempora/corpus.hpp"
#include "tempora/rnn_rsm.hpp"

namespace tempora {

/// Slice t draws its words only from its own block of `terms_per_region`
/// terms ("r<t>_w<i>"); labels are consecutive years from `first_year`.
struct RegionCorpusOptions {
  std::size_t slices = 3;
  std::size_t terms_per_region = 10;
  std::size_t docs_per_slice = 30;
  std::uint32_t min_length = 8;
  std::uint32_t max_length = 16;
  int first_year = 2000;
};

TemporalCorpus make_region_corpus(const RegionCorpusOptions& options, std::uint64_t seed);

/// Uniformly random documents over K terms ("w<k>"), lengths in [1, max_length].
TemporalCorpus make_random_corpus(std::size_t vocab_size, std::size_t slices, std::size_t docs_per_slice,
                                  std::uint32_t max_length, std::mt19937_64& rng);

/// Every block Gaussian with standard deviation `scale`.
RnnRsmParams random_rnn_rsm_params(Eigen::Index vocab_size, Eigen::Index hidden_size, Eigen::Index state_size,
                                   double scale, std::mt19937_64& rng);

}  // namespace tempora
