#include "tempora/rsm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tempora/errors.hpp"
#include "tempora/numeric.hpp"
#include "tempora/parallel.hpp"

namespace tempora {

namespace {

constexpr std::size_t kChainBlock = 16;

const Eigen::VectorXd& visible_bias_of(const RsmParams& p, const BiasOverride* bias) {
  return bias ? bias->visible : p.visible_bias;
}

const Eigen::VectorXd& hidden_bias_of(const RsmParams& p, const BiasOverride* bias) {
  return bias ? bias->hidden : p.hidden_bias;
}

void check_bias(const RsmParams& p, const BiasOverride* bias) {
  if (bias && (bias->visible.size() != p.vocab_size() || bias->hidden.size() != p.hidden_size())) {
    throw DimensionError("bias override has shape (" + std::to_string(bias->visible.size()) + ", " +
                         std::to_string(bias->hidden.size()) + "), model expects (" +
                         std::to_string(p.vocab_size()) + ", " + std::to_string(p.hidden_size()) + ")");
  }
}

void check_doc(const RsmParams& p, const Document& doc) {
  if (doc.max_term() >= static_cast<TermId>(p.vocab_size())) {
    throw DimensionError("document term id " + std::to_string(doc.max_term()) + " outside vocabulary of size " +
                         std::to_string(p.vocab_size()));
  }
}

/// D * b_h + W^T v for a sparse document.
Eigen::VectorXd hidden_input(const RsmParams& p, const Document& doc, const BiasOverride* bias) {
  Eigen::VectorXd x = static_cast<double>(doc.length()) * hidden_bias_of(p, bias);
  for (const auto& e : doc.entries()) x += static_cast<double>(e.count) * p.weights.row(e.term).transpose();
  return x;
}

Eigen::VectorXd logistic(const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) out[j] = sigmoid(x[j]);
  return out;
}

HiddenState sample_bernoulli(const Eigen::VectorXd& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  HiddenState h(p.size());
  for (Eigen::Index j = 0; j < p.size(); ++j) h[j] = unif(rng) < p[j] ? 1.0 : 0.0;
  return h;
}

Document sample_counts(const Eigen::VectorXd& probs, std::uint64_t length, std::mt19937_64& rng) {
  std::vector<double> cdf(static_cast<std::size_t>(probs.size()));
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    cdf[static_cast<std::size_t>(k)] = acc;
  }
  std::uniform_real_distribution<double> unif(0.0, acc);
  std::vector<std::uint32_t> counts(cdf.size(), 0);
  for (std::uint64_t i = 0; i < length; ++i) {
    const double u = unif(rng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    // Skip zero-probability buckets that share the boundary value.
    while (it != cdf.begin() && *(it - 1) == *it) --it;
    ++counts[static_cast<std::size_t>(it - cdf.begin())];
  }
  std::vector<Document::Entry> entries;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0) entries.push_back({static_cast<TermId>(k), counts[k]});
  }
  return Document(std::move(entries));
}

void accumulate(RsmGradient& g, const Document& data, const Eigen::VectorXd& data_hidden, const Document& negative,
                const Eigen::VectorXd& negative_hidden) {
  const double length = static_cast<double>(data.length());
  for (const auto& e : negative.entries()) {
    g.visible_bias[e.term] += e.count;
    g.weights.row(e.term) += static_cast<double>(e.count) * negative_hidden.transpose();
  }
  for (const auto& e : data.entries()) {
    g.visible_bias[e.term] -= e.count;
    g.weights.row(e.term) -= static_cast<double>(e.count) * data_hidden.transpose();
  }
  g.hidden_bias += length * (negative_hidden - data_hidden);
}

double l1_distance(const Document& a, const Document& b) {
  double d = 0.0;
  auto ia = a.entries().begin(), ib = b.entries().begin();
  while (ia != a.entries().end() || ib != b.entries().end()) {
    if (ib == b.entries().end() || (ia != a.entries().end() && ia->term < ib->term)) {
      d += ia++->count;
    } else if (ia == a.entries().end() || ib->term < ia->term) {
      d += ib++->count;
    } else {
      d += std::abs(static_cast<double>(ia->count) - static_cast<double>(ib->count));
      ++ia;
      ++ib;
    }
  }
  return d;
}

}  // namespace

RsmParams RsmParams::zeros(Eigen::Index vocab_size, Eigen::Index hidden_size) {
  return {Eigen::MatrixXd::Zero(vocab_size, hidden_size), Eigen::VectorXd::Zero(vocab_size),
          Eigen::VectorXd::Zero(hidden_size)};
}

RsmParams RsmParams::random(Eigen::Index vocab_size, Eigen::Index hidden_size, std::mt19937_64& rng,
                            double stddev) {
  RsmParams p = zeros(vocab_size, hidden_size);
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index c = 0; c < hidden_size; ++c) {
    for (Eigen::Index r = 0; r < vocab_size; ++r) p.weights(r, c) = normal(rng);
  }
  return p;
}

void RsmParams::check_shapes() const {
  if (visible_bias.size() != weights.rows() || hidden_bias.size() != weights.cols()) {
    throw DimensionError("RSM parameters: weights are " + std::to_string(weights.rows()) + "x" +
                         std::to_string(weights.cols()) + " but biases have sizes " +
                         std::to_string(visible_bias.size()) + " and " + std::to_string(hidden_bias.size()));
  }
}

RsmGradient RsmGradient::zeros(Eigen::Index vocab_size, Eigen::Index hidden_size) {
  return {Eigen::MatrixXd::Zero(vocab_size, hidden_size), Eigen::VectorXd::Zero(vocab_size),
          Eigen::VectorXd::Zero(hidden_size)};
}

RsmGradient& RsmGradient::operator+=(const RsmGradient& other) {
  weights += other.weights;
  visible_bias += other.visible_bias;
  hidden_bias += other.hidden_bias;
  return *this;
}

Eigen::VectorXd hidden_activation(const RsmParams& params, const Document& doc, const BiasOverride* bias) {
  params.check_shapes();
  check_bias(params, bias);
  check_doc(params, doc);
  return logistic(hidden_input(params, doc, bias));
}

Eigen::VectorXd visible_distribution(const RsmParams& params, const HiddenState& h, const BiasOverride* bias) {
  params.check_shapes();
  check_bias(params, bias);
  if (h.size() != params.hidden_size()) {
    throw DimensionError("hidden state has " + std::to_string(h.size()) + " units, model has " +
                         std::to_string(params.hidden_size()));
  }
  Eigen::VectorXd logits = visible_bias_of(params, bias) + params.weights * h;
  const double hi = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - hi).exp().matrix();
  return p / p.sum();
}

Document sample_document(const RsmParams& params, const HiddenState& h, std::uint64_t length,
                         const BiasOverride* bias, std::mt19937_64& rng) {
  if (length == 0) throw InputError("sample_document: document length must be at least 1");
  return sample_counts(visible_distribution(params, h, bias), length, rng);
}

double free_energy(const RsmParams& params, const Document& doc, const BiasOverride* bias) {
  params.check_shapes();
  check_bias(params, bias);
  check_doc(params, doc);
  const Eigen::VectorXd& bv = visible_bias_of(params, bias);
  double energy = 0.0;
  for (const auto& e : doc.entries()) energy -= e.count * bv[e.term];
  const Eigen::VectorXd x = hidden_input(params, doc, bias);
  for (Eigen::Index j = 0; j < x.size(); ++j) energy -= softplus(x[j]);
  return energy;
}

Document gibbs_negative(const RsmParams& params, const Document& doc, const BiasOverride* bias, int k_steps,
                        std::mt19937_64& rng) {
  if (k_steps < 1) throw InputError("contrastive divergence needs at least one Gibbs step");
  Document v = doc;
  for (int step = 0; step < k_steps; ++step) {
    const HiddenState h = sample_bernoulli(logistic(hidden_input(params, v, bias)), rng);
    v = sample_counts(visible_distribution(params, h, bias), doc.length(), rng);
  }
  return v;
}

RsmGradient cd_gradient(const RsmParams& params, std::span<const Document> docs, const BiasOverride* bias,
                        const CdOptions& options, std::uint64_t seed, CdStats* stats) {
  params.check_shapes();
  check_bias(params, bias);
  if (options.k_steps < 1) throw InputError("contrastive divergence needs at least one Gibbs step");
  for (const auto& d : docs) check_doc(params, d);

  const std::size_t blocks = (docs.size() + kChainBlock - 1) / kChainBlock;
  std::vector<RsmGradient> partial(blocks);
  std::vector<double> partial_l1(blocks, 0.0);

  parallel_for(blocks, options.threads, [&](std::size_t b) {
    RsmGradient g = RsmGradient::zeros(params.vocab_size(), params.hidden_size());
    const std::size_t end = std::min(docs.size(), (b + 1) * kChainBlock);
    for (std::size_t n = b * kChainBlock; n < end; ++n) {
      std::mt19937_64 rng(derive_seed(seed, {n}));
      const Document& data = docs[n];
      const Document negative = gibbs_negative(params, data, bias, options.k_steps, rng);
      const Eigen::VectorXd data_hidden = logistic(hidden_input(params, data, bias));
      Eigen::VectorXd negative_hidden = logistic(hidden_input(params, negative, bias));
      if (!options.mean_field_final) negative_hidden = sample_bernoulli(negative_hidden, rng);
      accumulate(g, data, data_hidden, negative, negative_hidden);
      partial_l1[b] += l1_distance(data, negative);
    }
    partial[b] = std::move(g);
  });

  RsmGradient total = RsmGradient::zeros(params.vocab_size(), params.hidden_size());
  for (std::size_t b = 0; b < blocks; ++b) {
    total += partial[b];
    if (stats) stats->reconstruction_l1 += partial_l1[b];
  }
  if (stats) {
    for (const auto& d : docs) stats->words += d.length();
  }
  return total;
}

RsmGradient cd_gradient_from_negatives(const RsmParams& params, std::span<const Document> docs,
                                       std::span<const Document> negatives, const BiasOverride* bias) {
  params.check_shapes();
  check_bias(params, bias);
  if (docs.size() != negatives.size()) throw DimensionError("one negative sample is needed per document");
  RsmGradient g = RsmGradient::zeros(params.vocab_size(), params.hidden_size());
  for (std::size_t n = 0; n < docs.size(); ++n) {
    check_doc(params, docs[n]);
    check_doc(params, negatives[n]);
    if (docs[n].length() != negatives[n].length()) {
      throw DimensionError("negative sample length differs from its document");
    }
    accumulate(g, docs[n], logistic(hidden_input(params, docs[n], bias)), negatives[n],
               logistic(hidden_input(params, negatives[n], bias)));
  }
  return g;
}

}  // namespace tempora
