#include "tempora/rnn_rsm.hpp"

#include <string>

#include "tempora/errors.hpp"
#include "tempora/numeric.hpp"

namespace tempora {

std::string_view to_string(RecurrentActivation a) {
  return a == RecurrentActivation::tanh ? "tanh" : "logistic";
}

RecurrentActivation parse_recurrent_activation(std::string_view name) {
  if (name == "tanh") return RecurrentActivation::tanh;
  if (name == "logistic") return RecurrentActivation::logistic;
  throw InputError("unknown recurrent activation '" + std::string(name) + "' (expected tanh or logistic)");
}

RnnRsmParams RnnRsmParams::zeros(Eigen::Index vocab_size, Eigen::Index hidden_size, Eigen::Index state_size) {
  RnnRsmParams p;
  p.rsm = RsmParams::zeros(vocab_size, hidden_size);
  p.visible_from_state = Eigen::MatrixXd::Zero(vocab_size, state_size);
  p.hidden_from_state = Eigen::MatrixXd::Zero(hidden_size, state_size);
  p.state_input = Eigen::MatrixXd::Zero(state_size, vocab_size);
  p.state_recurrence = Eigen::MatrixXd::Zero(state_size, state_size);
  p.state_bias = Eigen::VectorXd::Zero(state_size);
  p.initial_state = Eigen::VectorXd::Zero(state_size);
  return p;
}

void RnnRsmParams::check_shapes() const {
  rsm.check_shapes();
  const Eigen::Index K = vocab_size(), F = hidden_size(), U = state_size();
  auto expect = [](const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw DimensionError(std::string(name) + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                           ", expected " + std::to_string(r) + "x" + std::to_string(c));
    }
  };
  expect(visible_from_state, K, U, "visible_from_state");
  expect(hidden_from_state, F, U, "hidden_from_state");
  expect(state_input, U, K, "state_input");
  expect(state_recurrence, U, U, "state_recurrence");
  if (initial_state.size() != U) throw DimensionError("initial_state size differs from state_bias size");
}

bool operator==(const RnnRsmParams& a, const RnnRsmParams& b) {
  return a.rsm == b.rsm && a.visible_from_state == b.visible_from_state &&
         a.hidden_from_state == b.hidden_from_state && a.state_input == b.state_input &&
         a.state_recurrence == b.state_recurrence && a.state_bias == b.state_bias &&
         a.initial_state == b.initial_state && a.activation == b.activation &&
         a.scale_visible_sum == b.scale_visible_sum;
}

RnnRsmGradient RnnRsmGradient::zeros_like(const RnnRsmParams& p, std::size_t slices) {
  RnnRsmGradient g;
  g.rsm = RsmGradient::zeros(p.vocab_size(), p.hidden_size());
  g.visible_from_state = Eigen::MatrixXd::Zero(p.visible_from_state.rows(), p.visible_from_state.cols());
  g.hidden_from_state = Eigen::MatrixXd::Zero(p.hidden_from_state.rows(), p.hidden_from_state.cols());
  g.state_input = Eigen::MatrixXd::Zero(p.state_input.rows(), p.state_input.cols());
  g.state_recurrence = Eigen::MatrixXd::Zero(p.state_recurrence.rows(), p.state_recurrence.cols());
  g.state_bias = Eigen::VectorXd::Zero(p.state_size());
  g.initial_state = Eigen::VectorXd::Zero(p.state_size());
  g.slice_visible_bias.assign(slices, Eigen::VectorXd::Zero(p.vocab_size()));
  g.slice_hidden_bias.assign(slices, Eigen::VectorXd::Zero(p.hidden_size()));
  return g;
}

namespace {

template <class Block, class P>
std::vector<Block> blocks_of(P& p) {
  return {
      {"word_topic_weights", p.rsm.weights.data(), p.rsm.weights.size()},
      {"visible_bias", p.rsm.visible_bias.data(), p.rsm.visible_bias.size()},
      {"hidden_bias", p.rsm.hidden_bias.data(), p.rsm.hidden_bias.size()},
      {"visible_from_state", p.visible_from_state.data(), p.visible_from_state.size()},
      {"hidden_from_state", p.hidden_from_state.data(), p.hidden_from_state.size()},
      {"state_input", p.state_input.data(), p.state_input.size()},
      {"state_recurrence", p.state_recurrence.data(), p.state_recurrence.size()},
      {"state_bias", p.state_bias.data(), p.state_bias.size()},
      {"initial_state", p.initial_state.data(), p.initial_state.size()},
  };
}

Eigen::VectorXd activate(RecurrentActivation a, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = a == RecurrentActivation::tanh ? std::tanh(x[i]) : sigmoid(x[i]);
  return out;
}

}  // namespace

std::vector<ParamBlock> parameter_blocks(RnnRsmParams& params) {
  return blocks_of<ParamBlock>(params);
}

std::vector<ConstParamBlock> parameter_blocks(const RnnRsmParams& params) {
  return blocks_of<ConstParamBlock>(params);
}

std::vector<ConstParamBlock> gradient_blocks(const RnnRsmGradient& gradient) {
  return blocks_of<ConstParamBlock>(gradient);
}

std::vector<ParamBlock> gradient_blocks(RnnRsmGradient& gradient) { return blocks_of<ParamBlock>(gradient); }

std::vector<double> flatten(const RnnRsmParams& params) {
  std::vector<double> out;
  for (const auto& b : parameter_blocks(params)) out.insert(out.end(), b.data, b.data + b.size);
  return out;
}

std::vector<double> flatten(const RnnRsmGradient& gradient) {
  std::vector<double> out;
  for (const auto& b : gradient_blocks(gradient)) out.insert(out.end(), b.data, b.data + b.size);
  return out;
}

void unflatten(std::span<const double> values, RnnRsmParams& params) {
  std::size_t offset = 0;
  for (const auto& b : parameter_blocks(params)) {
    if (offset + static_cast<std::size_t>(b.size) > values.size()) throw DimensionError("unflatten: too few values");
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), b.size, b.data);
    offset += static_cast<std::size_t>(b.size);
  }
  if (offset != values.size()) throw DimensionError("unflatten: too many values");
}

BiasOverride slice_bias(const RnnRsmParams& params, const Eigen::VectorXd& previous_state) {
  return {params.rsm.visible_bias + params.visible_from_state * previous_state,
          params.rsm.hidden_bias + params.hidden_from_state * previous_state};
}

UnrolledState forward(const RnnRsmParams& params, const TemporalCorpus& corpus) {
  params.check_shapes();
  if (static_cast<std::size_t>(params.vocab_size()) != corpus.vocab_size()) {
    throw DimensionError("model vocabulary size " + std::to_string(params.vocab_size()) +
                         " differs from corpus vocabulary size " + std::to_string(corpus.vocab_size()));
  }
  const std::size_t T = corpus.slice_count();
  UnrolledState state;
  state.states.reserve(T + 1);
  state.biases.reserve(T);
  state.count_sums.reserve(T);
  state.states.push_back(params.initial_state);
  for (std::size_t t = 0; t < T; ++t) {
    const Eigen::VectorXd& prev = state.states.back();
    state.biases.push_back(slice_bias(params, prev));
    Eigen::VectorXd sum = corpus.slice_count_sum(t);
    if (params.scale_visible_sum && corpus.slice(t).size() > 0) sum /= static_cast<double>(corpus.slice(t).size());
    Eigen::VectorXd pre = params.state_bias + params.state_recurrence * prev + params.state_input * sum;
    state.states.push_back(activate(params.activation, pre));
    state.count_sums.push_back(std::move(sum));
  }
  return state;
}

Eigen::VectorXd tanh_backward(const Eigen::VectorXd& u_next, const Eigen::VectorXd& upstream) {
  return (upstream.array() * (1.0 - u_next.array().square())).matrix();
}

Eigen::VectorXd activation_backward(RecurrentActivation activation, const Eigen::VectorXd& u_next,
                                    const Eigen::VectorXd& upstream) {
  if (activation == RecurrentActivation::tanh) return tanh_backward(u_next, upstream);
  return (upstream.array() * u_next.array() * (1.0 - u_next.array())).matrix();
}

SliceGradientFn cd_slice_estimator(const CdOptions& options, std::uint64_t seed) {
  return [options, seed](const RsmParams& params, std::span<const Document> docs, const BiasOverride& bias,
                         std::size_t slice) {
    return cd_gradient(params, docs, &bias, options, derive_seed(seed, {slice}));
  };
}

RnnRsmGradient sequence_gradient(const RnnRsmParams& params, const TemporalCorpus& corpus,
                                 const SliceGradientFn& slice_gradient) {
  const UnrolledState state = forward(params, corpus);
  const std::size_t T = corpus.slice_count();
  RnnRsmGradient grad = RnnRsmGradient::zeros_like(params, T);

  for (std::size_t t = 0; t < T; ++t) {
    const auto& docs = corpus.slice(t).documents;
    if (docs.empty()) continue;
    RsmGradient g = slice_gradient(params.rsm, docs, state.biases[t], t);
    grad.rsm.weights += g.weights;
    grad.slice_visible_bias[t] = std::move(g.visible_bias);
    grad.slice_hidden_bias[t] = std::move(g.hidden_bias);
  }

  // state_grad[i] = dC/du(i) for i = 0..T; pre_grad[i] is the same signal
  // pulled back through the activation that produced u(i).
  std::vector<Eigen::VectorXd> state_grad(T + 1, Eigen::VectorXd::Zero(params.state_size()));
  std::vector<Eigen::VectorXd> pre_grad(T + 1, Eigen::VectorXd::Zero(params.state_size()));
  for (std::size_t i = T; i-- > 0;) {
    state_grad[i] = params.visible_from_state.transpose() * grad.slice_visible_bias[i] +
                    params.hidden_from_state.transpose() * grad.slice_hidden_bias[i] +
                    params.state_recurrence.transpose() * pre_grad[i + 1];
    if (i > 0) pre_grad[i] = activation_backward(params.activation, state.states[i], state_grad[i]);
  }

  for (std::size_t t = 0; t < T; ++t) {
    grad.rsm.visible_bias += grad.slice_visible_bias[t];
    grad.rsm.hidden_bias += grad.slice_hidden_bias[t];
    grad.visible_from_state += grad.slice_visible_bias[t] * state.states[t].transpose();
    grad.hidden_from_state += grad.slice_hidden_bias[t] * state.states[t].transpose();
    const Eigen::VectorXd& pre = pre_grad[t + 1];
    grad.state_input += pre * state.count_sums[t].transpose();
    grad.state_bias += pre;
    grad.state_recurrence += pre * state.states[t].transpose();
  }
  grad.initial_state = state_grad[0];
  return grad;
}

RnnRsmGradient sequence_gradient(const RnnRsmParams& params, const TemporalCorpus& corpus, const CdOptions& options,
                                 std::uint64_t seed) {
  return sequence_gradient(params, corpus, cd_slice_estimator(options, seed));
}

}  // namespace tempora
