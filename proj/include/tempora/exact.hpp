#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tempora/corpus.hpp"
#include "tempora/rnn_rsm.hpp"
#include "tempora/rsm.hpp"

namespace tempora {

/// Largest hidden layer for which 2^F enumeration is attempted.
inline constexpr Eigen::Index kMaxExactHidden = 24;

/// log Z(D) = log sum_h exp(D b_h.h) (sum_k exp(b_v,k + (W h)_k))^D.
///
/// The sample space is ordered word sequences of length D, so log P of a
/// count vector omits the multinomial coefficient.
double exact_log_z(const RsmParams& params, const BiasOverride* bias, std::uint64_t length);

/// -free_energy(doc) - log Z(D).
double exact_log_prob(const RsmParams& params, const Document& doc, const BiasOverride* bias = nullptr);

/// Model expectations for documents of length D, obtained from the same 2^F
/// sum as log Z: E[v] (K), E[D h] (F) and E[v h^T] (K x F) under P_D.
struct ModelExpectation {
  double log_z = 0.0;
  Eigen::VectorXd visible;
  Eigen::VectorXd hidden;
  Eigen::MatrixXd joint;
};
ModelExpectation exact_model_expectation(const RsmParams& params, const BiasOverride* bias, std::uint64_t length);

/// Exact gradient of sum_n -ln P(doc_n) w.r.t. weights and effective biases.
RsmGradient exact_rsm_gradient(const RsmParams& params, std::span<const Document> docs,
                               const BiasOverride* bias = nullptr);

/// Slice estimator that replaces CD negatives with exact model expectations.
SliceGradientFn exact_slice_estimator();

/// sum_t sum_n -ln P(doc | slice-t biases), with exact partition functions.
double exact_sequence_nll(const RnnRsmParams& params, const TemporalCorpus& corpus);

struct AisOptions {
  int temperatures = 1000;
  int runs = 100;
  std::uint64_t seed = 0;
};

struct AisEstimate {
  double log_z = 0.0;
  /// Delta-method standard error of log_z.
  double std_error = 0.0;
};

/// Annealed importance sampling estimate of log Z(D). Approximate; intended
/// for hidden layers too large for exact_log_z. Intermediate distributions
/// scale the hidden-unit terms by beta in [0, 1]; the beta = 0 base is the
/// bias-only multinomial, sampled exactly.
AisEstimate estimate_log_z(const RsmParams& params, const BiasOverride* bias, std::uint64_t length,
                           const AisOptions& options);

enum class ZMode { automatic, exact, ais };
std::string to_string(ZMode mode);
ZMode parse_z_mode(std::string_view name);

/// Scores documents under one fixed RSM (params + optional bias override),
/// caching log Z per document length.
class DocumentScorer {
 public:
  /// `automatic` resolves to exact for F <= 16 and AIS otherwise. Exact mode
  /// with F > kMaxExactHidden throws RefusalError. `params` must outlive the scorer.
  DocumentScorer(const RsmParams& params, std::optional<BiasOverride> bias, ZMode mode,
                 AisOptions ais = {});

  double log_z(std::uint64_t length);
  double log_prob(const Document& doc);
  bool exact() const noexcept { return exact_; }

 private:
  const RsmParams* params_;
  std::optional<BiasOverride> bias_;
  bool exact_;
  AisOptions ais_;
  std::map<std::uint64_t, double> cache_;
};

/// Result of comparing an analytic gradient with central differences.
struct FdReport {
  double max_relative_deviation = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// For each coordinate i: numeric_i = (cost(x + eps e_i) - cost(x - eps e_i)) / (2 eps),
/// deviation_i = |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, abs_floor).
/// epsilon must lie in [1e-7, 1e-3]; a non-finite cost throws NumericalError.
FdReport finite_difference_check(const std::function<double(std::span<const double>)>& cost,
                                 std::span<const double> x, std::span<const double> analytic, double epsilon,
                                 double abs_floor = 1e-3);

}  // namespace tempora
