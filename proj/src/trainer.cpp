#include "tempora/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <spdlog/spdlog.h>

#include "tempora/errors.hpp"
#include "tempora/metrics.hpp"
#include "tempora/numeric.hpp"

namespace tempora {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStream = 2;
constexpr std::uint64_t kStaticStream = 3;
constexpr std::uint64_t kMinibatchStream = 4;
constexpr std::uint64_t kEvalStream = 5;

std::vector<ParamBlock> rsm_blocks(RsmParams& p) {
  return {{"word_topic_weights", p.weights.data(), p.weights.size()},
          {"visible_bias", p.visible_bias.data(), p.visible_bias.size()},
          {"hidden_bias", p.hidden_bias.data(), p.hidden_bias.size()}};
}

std::vector<ParamBlock> rsm_blocks(RsmGradient& g) {
  return {{"word_topic_weights", g.weights.data(), g.weights.size()},
          {"visible_bias", g.visible_bias.data(), g.visible_bias.size()},
          {"hidden_bias", g.hidden_bias.data(), g.hidden_bias.size()}};
}

void check_finite(const std::vector<ParamBlock>& blocks, const char* what, int epoch) {
  for (const auto& b : blocks) {
    for (double v : b.values()) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite " + std::string(what) + " in parameter '" + std::string(b.name) +
                             "' at epoch " + std::to_string(epoch));
      }
    }
  }
}

/// theta <- theta - lr * (momentum-smoothed, clipped, decayed) gradient.
/// Returns the gradient norm before clipping.
double apply_update(const std::vector<ParamBlock>& params, const std::vector<ParamBlock>& grads,
                    const std::vector<ParamBlock>* velocity, const TrainConfig& config, int epoch) {
  check_finite(grads, "gradient", epoch);
  if (config.weight_decay > 0.0) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      for (Eigen::Index i = 0; i < params[b].size; ++i) grads[b].data[i] += config.weight_decay * params[b].data[i];
    }
  }
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  const double scale = (config.clip_norm > 0.0 && norm > config.clip_norm) ? config.clip_norm / norm : 1.0;

  for (std::size_t b = 0; b < params.size(); ++b) {
    for (Eigen::Index i = 0; i < params[b].size; ++i) {
      double step = scale * grads[b].data[i];
      if (velocity) {
        double& v = (*velocity)[b].data[i];
        v = config.momentum * v + step;
        step = v;
      }
      params[b].data[i] -= config.learning_rate * step;
    }
  }
  check_finite(params, "value", epoch);
  return norm;
}

std::vector<Document> pick_minibatch(std::span<const Document> docs, std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(size, order.size()));
  std::sort(order.begin(), order.end());
  std::vector<Document> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(docs[i]);
  return out;
}

CdOptions cd_options(const TrainConfig& config) {
  return {config.cd_k, config.cd_mean_field_final, config.threads};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw InputError("epochs must be >= 0");
  if (cd_k < 1) throw InputError("cd_k must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InputError("learning rate must be >= 0");
  if (hidden < 1) throw InputError("hidden size must be >= 1");
  if (recurrent < 1) throw InputError("recurrent size must be >= 1");
  if (early_stop_patience < 1) throw InputError("early-stop patience must be >= 1");
  if (eval_every < 1) throw InputError("eval_every must be >= 1");
  if (warm_start_epochs < 0) throw InputError("warm-start epochs must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw InputError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw InputError("weight decay must be >= 0");
  if (ais_temperatures < 2 || ais_runs < 2) throw InputError("AIS needs at least two temperatures and two runs");
}

RsmParams train_static_rsm(const TimeSlice& slice, std::size_t vocab_size, const TrainConfig& config,
                           std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  RsmParams params = RsmParams::random(static_cast<Eigen::Index>(vocab_size), config.hidden, rng);
  if (slice.documents.empty()) return params;
  RsmParams velocity = RsmParams::zeros(params.vocab_size(), params.hidden_size());
  auto velocity_blocks = rsm_blocks(velocity);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(seed, {kStaticStream, static_cast<std::uint64_t>(epoch)});
    std::vector<Document> batch;
    std::span<const Document> docs = slice.documents;
    if (config.minibatch > 0) {
      batch = pick_minibatch(docs, config.minibatch, derive_seed(epoch_seed, {kMinibatchStream}));
      docs = batch;
    }
    RsmGradient g = cd_gradient(params, docs, nullptr, cd_options(config), epoch_seed);
    apply_update(rsm_blocks(params), rsm_blocks(g), config.momentum > 0.0 ? &velocity_blocks : nullptr, config,
                 epoch + 1);
  }
  return params;
}

std::uint64_t warm_start_seed(std::uint64_t seed) { return derive_seed(seed, {kInitStream, 0}); }

RnnRsmParams warm_start(const TemporalCorpus& corpus, const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  if (corpus.slice_count() == 0) throw InputError("cannot initialise a model from a corpus without slices");
  const auto K = static_cast<Eigen::Index>(corpus.vocab_size());
  RnnRsmParams p = RnnRsmParams::zeros(K, config.hidden, config.recurrent);
  p.activation = config.activation;
  p.scale_visible_sum = config.scale_visible_sum;

  const TimeSlice& last = corpus.slices().back();
  const std::uint64_t rsm_seed = warm_start_seed(seed);
  if (last.documents.empty() && config.warm_start_epochs > 0) {
    spdlog::warn("final slice '{}' is empty; using a random RSM initialisation", last.label);
  }
  TrainConfig rsm_config = config;
  rsm_config.epochs = config.warm_start_epochs;
  p.rsm = train_static_rsm(last, corpus.vocab_size(), rsm_config, rsm_seed);

  std::mt19937_64 rng(derive_seed(seed, {kInitStream, 1}));
  std::normal_distribution<double> normal(0.0, 0.01);
  for (Eigen::MatrixXd* m : {&p.visible_from_state, &p.hidden_from_state, &p.state_input, &p.state_recurrence}) {
    for (Eigen::Index c = 0; c < m->cols(); ++c) {
      for (Eigen::Index r = 0; r < m->rows(); ++r) (*m)(r, c) = normal(rng);
    }
  }
  return p;
}

double heldout_sum_perplexity(const RnnRsmParams& params, const TemporalCorpus& timeline, const TemporalCorpus& held,
                              const TrainConfig& config) {
  if (held.slice_count() != timeline.slice_count()) {
    throw InputError("held-out corpus has " + std::to_string(held.slice_count()) + " slices, timeline has " +
                     std::to_string(timeline.slice_count()));
  }
  const UnrolledState state = forward(params, timeline);
  double total = 0.0;
  for (std::size_t t = 0; t < held.slice_count(); ++t) {
    const auto& docs = held.slice(t).documents;
    if (docs.empty()) continue;
    AisOptions ais{config.ais_temperatures, config.ais_runs, derive_seed(config.seed, {kEvalStream, t})};
    total += perplexity(params, state, docs, t, config.z_mode, ais).perplexity;
  }
  return total;
}

Trainer::Trainer(const TemporalCorpus& corpus, TrainConfig config, const TemporalCorpus* held)
    : corpus_(&corpus), held_(held), config_(std::move(config)) {
  config_.validate();
}

Checkpoint Trainer::initialize() const {
  Checkpoint c;
  c.params = warm_start(*corpus_, config_, config_.seed);
  c.epoch = 0;
  c.config = config_;
  c.vocab_hash = corpus_->vocabulary().hash();
  c.rng.seed = config_.seed;
  c.rng.next_epoch = 0;
  if (config_.momentum > 0.0) {
    c.velocity = RnnRsmParams::zeros(c.params.vocab_size(), c.params.hidden_size(), c.params.state_size());
  }
  return c;
}

EpochRecord Trainer::step(Checkpoint& c) const {
  const int epoch = c.epoch;
  const std::uint64_t epoch_seed = derive_seed(config_.seed, {kEpochStream, static_cast<std::uint64_t>(epoch)});
  CdStats stats;
  const CdOptions options = cd_options(config_);
  const std::size_t minibatch = config_.minibatch;
  SliceGradientFn estimator = [&](const RsmParams& params, std::span<const Document> docs, const BiasOverride& bias,
                                  std::size_t t) {
    const std::uint64_t slice_seed = derive_seed(epoch_seed, {t});
    if (minibatch > 0) {
      const auto batch = pick_minibatch(docs, minibatch, derive_seed(slice_seed, {kMinibatchStream}));
      return cd_gradient(params, batch, &bias, options, slice_seed, &stats);
    }
    return cd_gradient(params, docs, &bias, options, slice_seed, &stats);
  };
  RnnRsmGradient grad = sequence_gradient(c.params, *corpus_, estimator);

  if (config_.momentum > 0.0 && !c.velocity) {
    c.velocity = RnnRsmParams::zeros(c.params.vocab_size(), c.params.hidden_size(), c.params.state_size());
  }
  std::vector<ParamBlock> velocity_blocks;
  if (config_.momentum > 0.0) velocity_blocks = parameter_blocks(*c.velocity);
  const double norm = apply_update(parameter_blocks(c.params), gradient_blocks(grad),
                                   config_.momentum > 0.0 ? &velocity_blocks : nullptr, config_, epoch + 1);
  c.epoch = epoch + 1;
  c.rng.next_epoch = c.epoch;
  c.heldout_sum_ppl.reset();

  EpochRecord rec;
  rec.epoch = c.epoch;
  rec.gradient_norm = norm;
  rec.reconstruction_error = stats.words > 0 ? stats.reconstruction_l1 / static_cast<double>(stats.words) : 0.0;
  return rec;
}

TrainOutcome Trainer::run(Checkpoint start, const std::function<void(const EpochRecord&)>& on_epoch) const {
  TrainOutcome out;
  Checkpoint current = std::move(start);
  std::optional<Checkpoint> best;
  double best_ppl = std::numeric_limits<double>::infinity();
  int since_improvement = 0;

  while (current.epoch < config_.epochs) {
    EpochRecord rec = step(current);
    if (held_ && (current.epoch % config_.eval_every == 0 || current.epoch == config_.epochs)) {
      const double ppl = heldout_sum_perplexity(current.params, *corpus_, *held_, config_);
      rec.heldout_sum_ppl = ppl;
      current.heldout_sum_ppl = ppl;
      if (std::isfinite(ppl) && ppl < best_ppl) {
        best_ppl = ppl;
        best = current;
        since_improvement = 0;
      } else {
        ++since_improvement;
      }
    }
    out.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (since_improvement >= config_.early_stop_patience) {
      spdlog::info("early stopping at epoch {} (best held-out SumPPL {:.6g})", current.epoch, best_ppl);
      out.stopped_early = true;
      break;
    }
  }
  out.checkpoint = best ? std::move(*best) : std::move(current);
  return out;
}

TrainOutcome train(const TemporalCorpus& corpus, const TrainConfig& config, const TemporalCorpus* held) {
  Trainer trainer(corpus, config, held);
  return trainer.run(trainer.initialize());
}

}  // namespace tempora
