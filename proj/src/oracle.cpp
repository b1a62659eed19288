#include "tempora/oracle.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tempora/errors.hpp"
#include "tempora/exact.hpp"

namespace tempora {

double sequence_normalization_error(const RsmParams& params, const BiasOverride* bias, std::uint64_t length) {
  const auto K = static_cast<std::size_t>(params.vocab_size());
  if (K == 0 || length == 0) throw InputError("normalization check needs K >= 1 and D >= 1");
  std::vector<std::size_t> seq(length, 0);
  double total = 0.0;
  while (true) {
    std::vector<Document::Entry> entries;
    for (auto k : seq) entries.push_back({static_cast<TermId>(k), 1});
    total += std::exp(exact_log_prob(params, Document(std::move(entries)), bias));
    std::size_t i = 0;
    while (i < length && ++seq[i] == K) seq[i++] = 0;
    if (i == length) break;
  }
  return std::abs(total - 1.0);
}

namespace {

std::vector<double> flatten_rsm(const RsmParams& p) {
  std::vector<double> x(p.weights.data(), p.weights.data() + p.weights.size());
  x.insert(x.end(), p.visible_bias.data(), p.visible_bias.data() + p.visible_bias.size());
  x.insert(x.end(), p.hidden_bias.data(), p.hidden_bias.data() + p.hidden_bias.size());
  return x;
}

RsmParams unflatten_rsm(std::span<const double> x, Eigen::Index K, Eigen::Index F) {
  RsmParams p = RsmParams::zeros(K, F);
  std::size_t at = 0;
  for (Eigen::Index i = 0; i < p.weights.size(); ++i) p.weights.data()[i] = x[at++];
  for (Eigen::Index i = 0; i < K; ++i) p.visible_bias[i] = x[at++];
  for (Eigen::Index i = 0; i < F; ++i) p.hidden_bias[i] = x[at++];
  return p;
}

std::vector<double> flatten_rsm(const RsmGradient& g) {
  std::vector<double> x(g.weights.data(), g.weights.data() + g.weights.size());
  x.insert(x.end(), g.visible_bias.data(), g.visible_bias.data() + g.visible_bias.size());
  x.insert(x.end(), g.hidden_bias.data(), g.hidden_bias.data() + g.hidden_bias.size());
  return x;
}

OracleCheck fd_check(std::string name, const FdReport& r, double tolerance) {
  OracleCheck c{std::move(name), r.max_relative_deviation, tolerance, r.max_relative_deviation <= tolerance, {}};
  c.detail = fmt::format("worst coordinate {} analytic {:.10g} numeric {:.10g}", r.worst_index, r.analytic, r.numeric);
  return c;
}

}  // namespace

std::vector<OracleCheck> run_oracle(const RnnRsmParams& params, const TemporalCorpus& corpus,
                                    const OracleOptions& options) {
  params.check_shapes();
  if (static_cast<Eigen::Index>(corpus.vocab_size()) != params.vocab_size()) {
    throw DimensionError("corpus vocabulary does not match the model");
  }
  if (params.hidden_size() > kMaxExactHidden) {
    throw RefusalError("exact oracle refuses F = " + std::to_string(params.hidden_size()) + " > " +
                       std::to_string(kMaxExactHidden));
  }
  std::vector<OracleCheck> checks;
  const UnrolledState state = forward(params, corpus);

  const auto K = static_cast<double>(params.vocab_size());
  for (std::uint64_t D = 1; D <= options.max_length; ++D) {
    if (std::pow(K, static_cast<double>(D)) > static_cast<double>(options.max_sequences)) break;
    double worst = sequence_normalization_error(params.rsm, nullptr, D);
    for (const auto& bias : state.biases) worst = std::max(worst, sequence_normalization_error(params.rsm, &bias, D));
    checks.push_back({fmt::format("normalization D={}", D), worst, options.normalization_tolerance,
                      worst <= options.normalization_tolerance,
                      fmt::format("max |sum P - 1| over {} bias settings", state.biases.size() + 1)});
  }

  std::vector<Document> docs;
  for (const auto& slice : corpus.slices()) docs.insert(docs.end(), slice.documents.begin(), slice.documents.end());
  if (!docs.empty()) {
    const Eigen::Index Kd = params.vocab_size(), F = params.hidden_size();
    const auto cost = [&](std::span<const double> x) {
      const RsmParams p = unflatten_rsm(x, Kd, F);
      double nll = 0.0;
      for (const auto& d : docs) nll -= exact_log_prob(p, d);
      return nll;
    };
    const auto x = flatten_rsm(params.rsm);
    const auto analytic = flatten_rsm(exact_rsm_gradient(params.rsm, docs));
    checks.push_back(fd_check("rsm gradient", finite_difference_check(cost, x, analytic, options.fd_epsilon),
                              options.rsm_tolerance));
  }

  RnnRsmGradient grad = sequence_gradient(params, corpus, exact_slice_estimator());
  if (!options.sign_flip_block.empty()) {
    bool found = false;
    for (const auto& block : gradient_blocks(grad)) {
      if (block.name != options.sign_flip_block) continue;
      for (double& v : block.values()) v = -v;
      found = true;
    }
    if (!found) throw InputError("unknown parameter block '" + options.sign_flip_block + "'");
  }
  RnnRsmParams scratch = params;
  const auto cost = [&](std::span<const double> x) {
    unflatten(x, scratch);
    return exact_sequence_nll(scratch, corpus);
  };
  const auto x = flatten(params);
  const auto analytic = flatten(grad);
  checks.push_back(fd_check("bptt gradient", finite_difference_check(cost, x, analytic, options.fd_epsilon),
                            options.bptt_tolerance));
  return checks;
}

}  // namespace tempora
