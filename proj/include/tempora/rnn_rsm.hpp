#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tempora/corpus.hpp"
#include "tempora/rsm.hpp"

namespace tempora {

enum class RecurrentActivation {
  tanh,
  /// sigmoid state with u(1-u) derivative; reproduces the alternative algebra.
  logistic,
};

std::string_view to_string(RecurrentActivation a);
RecurrentActivation parse_recurrent_activation(std::string_view name);

/// RSM whose biases at slice t are driven by a deterministic recurrent state:
///
///   b_v(t) = b_v + visible_from_state * u(t-1)
///   b_h(t) = b_h + hidden_from_state  * u(t-1)
///   u(t)   = tanh(state_bias + state_recurrence * u(t-1) + state_input * s(t))
///
/// where s(t) is the summed count vector of slice t.
struct RnnRsmParams {
  RsmParams rsm;
  Eigen::MatrixXd visible_from_state;  // K x U
  Eigen::MatrixXd hidden_from_state;   // F x U
  Eigen::MatrixXd state_input;         // U x K
  Eigen::MatrixXd state_recurrence;    // U x U
  Eigen::VectorXd state_bias;          // U
  Eigen::VectorXd initial_state;       // U, learned

  RecurrentActivation activation = RecurrentActivation::tanh;
  /// Divide s(t) by the slice's document count before feeding the state.
  bool scale_visible_sum = false;

  Eigen::Index vocab_size() const noexcept { return rsm.vocab_size(); }
  Eigen::Index hidden_size() const noexcept { return rsm.hidden_size(); }
  Eigen::Index state_size() const noexcept { return state_bias.size(); }

  static RnnRsmParams zeros(Eigen::Index vocab_size, Eigen::Index hidden_size, Eigen::Index state_size);
  void check_shapes() const;
  friend bool operator==(const RnnRsmParams& a, const RnnRsmParams& b);
};

/// Gradient of the sequence cost for every learned block, plus the derived
/// per-slice bias gradients dC_t/db_v(t) and dC_t/db_h(t) (t = 1..T, 0-based).
struct RnnRsmGradient {
  RsmGradient rsm;
  Eigen::MatrixXd visible_from_state;
  Eigen::MatrixXd hidden_from_state;
  Eigen::MatrixXd state_input;
  Eigen::MatrixXd state_recurrence;
  Eigen::VectorXd state_bias;
  Eigen::VectorXd initial_state;
  std::vector<Eigen::VectorXd> slice_visible_bias;
  std::vector<Eigen::VectorXd> slice_hidden_bias;

  static RnnRsmGradient zeros_like(const RnnRsmParams& params, std::size_t slices);
};

/// Contiguous view of one learned parameter block. The block order is fixed;
/// see parameter_blocks().
template <class T>
struct BasicParamBlock {
  std::string_view name;
  T* data;
  Eigen::Index size;
  std::span<T> values() const { return {data, static_cast<std::size_t>(size)}; }
};
using ParamBlock = BasicParamBlock<double>;
using ConstParamBlock = BasicParamBlock<const double>;

/// The nine stored blocks, in order: word_topic_weights, visible_bias,
/// hidden_bias, visible_from_state, hidden_from_state, state_input,
/// state_recurrence, state_bias, initial_state.
std::vector<ParamBlock> parameter_blocks(RnnRsmParams& params);
std::vector<ConstParamBlock> parameter_blocks(const RnnRsmParams& params);
/// Same order and sizes as parameter_blocks() of the matching params.
std::vector<ConstParamBlock> gradient_blocks(const RnnRsmGradient& gradient);
std::vector<ParamBlock> gradient_blocks(RnnRsmGradient& gradient);

std::vector<double> flatten(const RnnRsmParams& params);
void unflatten(std::span<const double> values, RnnRsmParams& params);
std::vector<double> flatten(const RnnRsmGradient& gradient);

struct UnrolledState {
  /// states[0] is the initial state; states[t] follows slice t (1-based).
  std::vector<Eigen::VectorXd> states;
  /// biases[t] is used for 0-based slice t and derives from states[t].
  std::vector<BiasOverride> biases;
  std::vector<Eigen::VectorXd> count_sums;
};

/// Bias override of a slice, computed from the state preceding it.
BiasOverride slice_bias(const RnnRsmParams& params, const Eigen::VectorXd& previous_state);

UnrolledState forward(const RnnRsmParams& params, const TemporalCorpus& corpus);

/// upstream * (1 - u_next^2): the Jacobian of tanh at its output u_next.
Eigen::VectorXd tanh_backward(const Eigen::VectorXd& u_next, const Eigen::VectorXd& upstream);
/// Dispatches on the activation (logistic uses u (1 - u)).
Eigen::VectorXd activation_backward(RecurrentActivation activation, const Eigen::VectorXd& u_next,
                                    const Eigen::VectorXd& upstream);

/// Computes the gradient of one slice's cost w.r.t. the weights and that
/// slice's effective biases. `slice` is the 0-based slice index.
using SliceGradientFn = std::function<RsmGradient(const RsmParams& params, std::span<const Document> docs,
                                                  const BiasOverride& bias, std::size_t slice)>;

/// CD-k slice estimator. Slice t uses the stream derived from (seed, t).
SliceGradientFn cd_slice_estimator(const CdOptions& options, std::uint64_t seed);

/// Backpropagates per-slice bias gradients through time:
///   g_u(T) = 0
///   g_u(t) = W_uu^T act'(u(t+1)) g_u(t+1) + W_uh^T g_h(t+1) + W_uv^T g_v(t+1)
/// and accumulates every block; initial_state receives g_u(0).
RnnRsmGradient sequence_gradient(const RnnRsmParams& params, const TemporalCorpus& corpus,
                                 const SliceGradientFn& slice_gradient);

RnnRsmGradient sequence_gradient(const RnnRsmParams& params, const TemporalCorpus& corpus, const CdOptions& options,
                                 std::uint64_t seed);

}  // namespace tempora
