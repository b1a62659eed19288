#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tempora/corpus.hpp"

namespace tempora {

/// Replicated Softmax parameters: word-topic weights (K x F) and the base
/// visible (K) and hidden (F) biases.
struct RsmParams {
  Eigen::MatrixXd weights;
  Eigen::VectorXd visible_bias;
  Eigen::VectorXd hidden_bias;

  Eigen::Index vocab_size() const noexcept { return weights.rows(); }
  Eigen::Index hidden_size() const noexcept { return weights.cols(); }

  static RsmParams zeros(Eigen::Index vocab_size, Eigen::Index hidden_size);
  /// Gaussian(0, stddev) weights, zero biases.
  static RsmParams random(Eigen::Index vocab_size, Eigen::Index hidden_size, std::mt19937_64& rng,
                          double stddev = 0.01);

  /// Throws DimensionError on inconsistent shapes.
  void check_shapes() const;
  friend bool operator==(const RsmParams& a, const RsmParams& b) {
    return a.weights == b.weights && a.visible_bias == b.visible_bias && a.hidden_bias == b.hidden_bias;
  }
};

/// Per-slice biases replacing the base biases of an RsmParams.
struct BiasOverride {
  Eigen::VectorXd visible;
  Eigen::VectorXd hidden;
};

/// Binary hidden configuration stored as 0.0 / 1.0 entries.
using HiddenState = Eigen::VectorXd;

/// Gradient of the cost (negative log-likelihood) w.r.t. the weights and the
/// biases in effect for the documents (override biases when one was given).
struct RsmGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd visible_bias;
  Eigen::VectorXd hidden_bias;

  static RsmGradient zeros(Eigen::Index vocab_size, Eigen::Index hidden_size);
  RsmGradient& operator+=(const RsmGradient& other);
};

/// P(h_j = 1 | doc) = sigmoid(D * b_h,j + sum_k count_k W_kj).
///
/// The hidden bias is multiplied by the document length, as in the model's
/// energy; without this the Gibbs chain would not sample the model whose
/// free energy is free_energy() below.
Eigen::VectorXd hidden_activation(const RsmParams& params, const Document& doc,
                                  const BiasOverride* bias = nullptr);

/// softmax_k(b_v,k + sum_j h_j W_kj). Sums to one.
Eigen::VectorXd visible_distribution(const RsmParams& params, const HiddenState& h,
                                     const BiasOverride* bias = nullptr);

/// Draws `length` i.i.d. words from visible_distribution(h).
Document sample_document(const RsmParams& params, const HiddenState& h, std::uint64_t length,
                         const BiasOverride* bias, std::mt19937_64& rng);

/// -sum_k count_k b_v,k - sum_j log(1 + exp(D b_h,j + sum_k count_k W_kj)).
double free_energy(const RsmParams& params, const Document& doc, const BiasOverride* bias = nullptr);

struct CdOptions {
  int k_steps = 1;
  /// Use hidden probabilities (rather than a sample) for the final negative statistics.
  bool mean_field_final = true;
  unsigned threads = 1;
};

/// Diagnostics gathered while running the chains.
struct CdStats {
  /// sum_n sum_k |neg_k - data_k|
  double reconstruction_l1 = 0.0;
  std::uint64_t words = 0;
};

/// Runs a k-step Gibbs chain from `doc`: sample h, then resample all D words
/// as one multinomial draw; returns the final visible state.
Document gibbs_negative(const RsmParams& params, const Document& doc, const BiasOverride* bias, int k_steps,
                        std::mt19937_64& rng);

/// CD-k estimate of the gradient of sum_n -ln P(doc_n), summed over documents:
///   d b_v = sum_n (v*_n - v_n)
///   d b_h = sum_n D_n (p(h|v*_n) - p(h|v_n))
///   d W   = sum_n v*_n p(h|v*_n)^T - v_n p(h|v_n)^T
/// Chain n draws from its own stream derived from (seed, n), so the result does
/// not depend on the number of threads.
RsmGradient cd_gradient(const RsmParams& params, std::span<const Document> docs, const BiasOverride* bias,
                        const CdOptions& options, std::uint64_t seed, CdStats* stats = nullptr);

/// Same statistics with caller-supplied negatives (one per document).
RsmGradient cd_gradient_from_negatives(const RsmParams& params, std::span<const Document> docs,
                                       std::span<const Document> negatives, const BiasOverride* bias);

}  // namespace tempora
