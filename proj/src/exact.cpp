#include "tempora/exact.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>

#include "tempora/errors.hpp"
#include "tempora/numeric.hpp"

namespace tempora {

namespace {

void check_exact_feasible(const RsmParams& params) {
  if (params.hidden_size() > kMaxExactHidden) {
    throw RefusalError("exact partition function needs 2^F terms; F = " + std::to_string(params.hidden_size()) +
                       " exceeds the limit of " + std::to_string(kMaxExactHidden));
  }
}

const Eigen::VectorXd& visible_bias_of(const RsmParams& p, const BiasOverride* bias) {
  return bias ? bias->visible : p.visible_bias;
}

const Eigen::VectorXd& hidden_bias_of(const RsmParams& p, const BiasOverride* bias) {
  return bias ? bias->hidden : p.hidden_bias;
}

/// Visits every hidden configuration in Gray-code order, keeping the visible
/// logits b_v + W h up to date with one column update per step.
template <class Fn>
void for_each_hidden(const RsmParams& params, const BiasOverride* bias, Fn&& fn) {
  const Eigen::Index F = params.hidden_size();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(F);
  Eigen::VectorXd logits = visible_bias_of(params, bias);
  const std::uint64_t total = std::uint64_t{1} << F;
  fn(h, logits);
  for (std::uint64_t i = 1; i < total; ++i) {
    const auto j = static_cast<Eigen::Index>(std::countr_zero(i));
    if (h[j] == 0.0) {
      h[j] = 1.0;
      logits += params.weights.col(j);
    } else {
      h[j] = 0.0;
      logits -= params.weights.col(j);
    }
    fn(h, logits);
  }
}

double log_sum_exp(const Eigen::VectorXd& v) {
  return tempora::log_sum_exp(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace

double exact_log_z(const RsmParams& params, const BiasOverride* bias, std::uint64_t length) {
  params.check_shapes();
  check_exact_feasible(params);
  const double D = static_cast<double>(length);
  const Eigen::VectorXd& bh = hidden_bias_of(params, bias);
  LogSumExp acc;
  for_each_hidden(params, bias, [&](const Eigen::VectorXd& h, const Eigen::VectorXd& logits) {
    acc.add(D * bh.dot(h) + D * log_sum_exp(logits));
  });
  return acc.value();
}

double exact_log_prob(const RsmParams& params, const Document& doc, const BiasOverride* bias) {
  return -free_energy(params, doc, bias) - exact_log_z(params, bias, doc.length());
}

ModelExpectation exact_model_expectation(const RsmParams& params, const BiasOverride* bias, std::uint64_t length) {
  ModelExpectation out;
  out.log_z = exact_log_z(params, bias, length);
  const double D = static_cast<double>(length);
  const Eigen::VectorXd& bh = hidden_bias_of(params, bias);
  out.visible = Eigen::VectorXd::Zero(params.vocab_size());
  out.hidden = Eigen::VectorXd::Zero(params.hidden_size());
  out.joint = Eigen::MatrixXd::Zero(params.vocab_size(), params.hidden_size());
  for_each_hidden(params, bias, [&](const Eigen::VectorXd& h, const Eigen::VectorXd& logits) {
    const double lse = log_sum_exp(logits);
    const double weight = std::exp(D * bh.dot(h) + D * lse - out.log_z);
    const Eigen::VectorXd word_probs = (logits.array() - lse).exp().matrix();
    out.visible += (weight * D) * word_probs;
    out.hidden += (weight * D) * h;
    out.joint += (weight * D) * word_probs * h.transpose();
  });
  return out;
}

RsmGradient exact_rsm_gradient(const RsmParams& params, std::span<const Document> docs, const BiasOverride* bias) {
  params.check_shapes();
  check_exact_feasible(params);
  RsmGradient g = RsmGradient::zeros(params.vocab_size(), params.hidden_size());
  std::map<std::uint64_t, ModelExpectation> by_length;
  for (const auto& doc : docs) {
    auto it = by_length.find(doc.length());
    if (it == by_length.end()) it = by_length.emplace(doc.length(), exact_model_expectation(params, bias, doc.length())).first;
    const ModelExpectation& model = it->second;

    const Eigen::VectorXd hidden = hidden_activation(params, doc, bias);
    const double D = static_cast<double>(doc.length());
    g.visible_bias += model.visible;
    g.hidden_bias += model.hidden - D * hidden;
    g.weights += model.joint;
    for (const auto& e : doc.entries()) {
      g.visible_bias[e.term] -= e.count;
      g.weights.row(e.term) -= static_cast<double>(e.count) * hidden.transpose();
    }
  }
  return g;
}

SliceGradientFn exact_slice_estimator() {
  return [](const RsmParams& params, std::span<const Document> docs, const BiasOverride& bias, std::size_t) {
    return exact_rsm_gradient(params, docs, &bias);
  };
}

double exact_sequence_nll(const RnnRsmParams& params, const TemporalCorpus& corpus) {
  const UnrolledState state = forward(params, corpus);
  double nll = 0.0;
  for (std::size_t t = 0; t < corpus.slice_count(); ++t) {
    DocumentScorer scorer(params.rsm, state.biases[t], ZMode::exact);
    for (const auto& doc : corpus.slice(t).documents) nll -= scorer.log_prob(doc);
  }
  return nll;
}

AisEstimate estimate_log_z(const RsmParams& params, const BiasOverride* bias, std::uint64_t length,
                           const AisOptions& options) {
  params.check_shapes();
  if (options.temperatures < 2 || options.runs < 2) {
    throw InputError("AIS needs at least two temperatures and two runs");
  }
  const Eigen::Index F = params.hidden_size();
  const double D = static_cast<double>(length);
  const Eigen::VectorXd& bv = visible_bias_of(params, bias);
  const Eigen::VectorXd& bh = hidden_bias_of(params, bias);
  const double log_z0 = static_cast<double>(F) * std::log(2.0) + D * log_sum_exp(bv);
  const RsmParams base{Eigen::MatrixXd::Zero(params.vocab_size(), F), bv, Eigen::VectorXd::Zero(F)};
  const Eigen::VectorXd no_hidden = Eigen::VectorXd::Zero(F);

  auto hidden_input = [&](const Document& v) {
    Eigen::VectorXd x = D * bh;
    for (const auto& e : v.entries()) x += static_cast<double>(e.count) * params.weights.row(e.term).transpose();
    return x;
  };

  const int M = options.temperatures;
  std::vector<double> log_weights(static_cast<std::size_t>(options.runs));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int r = 0; r < options.runs; ++r) {
    std::mt19937_64 rng(derive_seed(options.seed, {static_cast<std::uint64_t>(r)}));
    Document v = sample_document(base, no_hidden, length, nullptr, rng);
    double log_w = 0.0;
    double beta_prev = 0.0;
    for (int i = 1; i < M; ++i) {
      const double beta = static_cast<double>(i) / static_cast<double>(M - 1);
      const Eigen::VectorXd x = hidden_input(v);
      for (Eigen::Index j = 0; j < F; ++j) log_w += softplus(beta * x[j]) - softplus(beta_prev * x[j]);
      beta_prev = beta;
      if (i == M - 1) break;
      // Gibbs step leaving the beta-tempered model invariant. Feeding beta*h
      // as the "hidden state" gives logits b_v + beta W h.
      Eigen::VectorXd h(F);
      for (Eigen::Index j = 0; j < F; ++j) h[j] = unif(rng) < sigmoid(beta * x[j]) ? beta : 0.0;
      v = sample_document(params, h, length, bias, rng);
    }
    log_weights[static_cast<std::size_t>(r)] = log_w;
  }

  const double lse = tempora::log_sum_exp(log_weights);
  const double R = static_cast<double>(options.runs);
  AisEstimate est;
  est.log_z = log_z0 + lse - std::log(R);
  double mean = 0.0, sq = 0.0;
  const double hi = *std::max_element(log_weights.begin(), log_weights.end());
  for (double lw : log_weights) {
    const double w = std::exp(lw - hi);
    mean += w;
    sq += w * w;
  }
  mean /= R;
  const double var = std::max(0.0, sq / R - mean * mean) * R / (R - 1.0);
  est.std_error = std::sqrt(var / R) / mean;
  return est;
}

std::string to_string(ZMode mode) {
  switch (mode) {
    case ZMode::automatic:
      return "auto";
    case ZMode::exact:
      return "exact";
    case ZMode::ais:
      return "ais";
  }
  return "auto";
}

ZMode parse_z_mode(std::string_view name) {
  if (name == "auto") return ZMode::automatic;
  if (name == "exact") return ZMode::exact;
  if (name == "ais") return ZMode::ais;
  throw InputError("unknown z-mode '" + std::string(name) + "' (expected auto, exact or ais)");
}

DocumentScorer::DocumentScorer(const RsmParams& params, std::optional<BiasOverride> bias, ZMode mode,
                               AisOptions ais)
    : params_(&params), bias_(std::move(bias)), ais_(ais) {
  switch (mode) {
    case ZMode::exact:
      check_exact_feasible(params);
      exact_ = true;
      break;
    case ZMode::ais:
      exact_ = false;
      break;
    case ZMode::automatic:
      exact_ = params.hidden_size() <= 16;
      break;
  }
}

double DocumentScorer::log_z(std::uint64_t length) {
  auto it = cache_.find(length);
  if (it != cache_.end()) return it->second;
  const BiasOverride* bias = bias_ ? &*bias_ : nullptr;
  double value;
  if (exact_) {
    value = exact_log_z(*params_, bias, length);
  } else {
    AisOptions opts = ais_;
    opts.seed = derive_seed(ais_.seed, {length});
    value = estimate_log_z(*params_, bias, length, opts).log_z;
  }
  cache_.emplace(length, value);
  return value;
}

double DocumentScorer::log_prob(const Document& doc) {
  const BiasOverride* bias = bias_ ? &*bias_ : nullptr;
  return -free_energy(*params_, doc, bias) - log_z(doc.length());
}

FdReport finite_difference_check(const std::function<double(std::span<const double>)>& cost,
                                 std::span<const double> x, std::span<const double> analytic, double epsilon,
                                 double abs_floor) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw InputError("finite-difference epsilon must lie in [1e-7, 1e-3]");
  }
  if (x.size() != analytic.size()) throw DimensionError("finite_difference_check: gradient size differs from point");
  std::vector<double> probe(x.begin(), x.end());
  FdReport report;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + epsilon;
    const double up = cost(probe);
    probe[i] = saved - epsilon;
    const double down = cost(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_difference_check: non-finite cost at coordinate " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * epsilon);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), abs_floor});
    const double dev = std::abs(analytic[i] - numeric) / scale;
    if (dev > report.max_relative_deviation || i == 0) {
      report = {dev, i, analytic[i], numeric};
    }
  }
  return report;
}

}  // namespace tempora
