#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tempora/corpus.hpp"
#include "tempora/rnn_rsm.hpp"

namespace tempora {

struct OracleOptions {
  double fd_epsilon = 1e-5;
  double normalization_tolerance = 1e-9;
  double rsm_tolerance = 1e-6;
  double bptt_tolerance = 1e-4;
  /// Normalization is checked for lengths 1..max_length while K^D stays
  /// within max_sequences.
  std::uint64_t max_length = 3;
  std::uint64_t max_sequences = 200000;
  /// Fault injection: negate this gradient block before the BPTT check.
  std::string sign_flip_block;
};

struct OracleCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

/// |sum over all K^D ordered sequences of P(sequence) - 1|, with P from the
/// exact partition function.
double sequence_normalization_error(const RsmParams& params, const BiasOverride* bias, std::uint64_t length);

/// Normalization identities for every slice bias, the exact RSM gradient and
/// the exact-expectation BPTT gradient against central differences.
std::vector<OracleCheck> run_oracle(const RnnRsmParams& params, const TemporalCorpus& corpus,
                                    const OracleOptions& options);

}  // namespace tempora
