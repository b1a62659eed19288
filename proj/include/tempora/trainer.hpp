#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tempora/corpus.hpp"
#include "tempora/exact.hpp"
#include "tempora/rnn_rsm.hpp"
#include "tempora/rsm.hpp"

namespace tempora {

/// Training hyperparameters. Defaults for epochs, CD steps, learning rate and
/// hidden size are the reference hyperparameters.
struct TrainConfig {
  int epochs = 1000;
  int cd_k = 15;
  double learning_rate = 0.001;
  int hidden = 30;
  int recurrent = 30;
  std::uint64_t seed = 1;
  int early_stop_patience = 25;
  int eval_every = 10;

  /// Epochs of standalone RSM training on the final slice before the
  /// recurrent model starts; 0 keeps the random initialisation.
  int warm_start_epochs = 0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  /// Global L2 norm cap on the gradient; <= 0 disables clipping.
  double clip_norm = 100.0;
  /// Documents per slice used for the CD estimate each epoch; 0 = all.
  std::size_t minibatch = 0;
  bool cd_mean_field_final = true;
  RecurrentActivation activation = RecurrentActivation::tanh;
  bool scale_visible_sum = false;
  ZMode z_mode = ZMode::automatic;
  int ais_temperatures = 1000;
  int ais_runs = 100;

  /// Worker threads; never changes results and is not persisted.
  unsigned threads = 1;

  /// Throws InputError describing the first invalid field.
  void validate() const;
};

/// Counter-based random streams: everything an epoch draws is derived from
/// (seed, epoch, ...), so the seed and the next epoch fully describe the RNG.
struct RngDescriptor {
  std::string scheme = "splitmix64-counter/mt19937_64";
  std::uint64_t seed = 0;
  int next_epoch = 0;
};

struct Checkpoint {
  RnnRsmParams params;
  int epoch = 0;
  TrainConfig config;
  std::string vocab_hash;
  RngDescriptor rng;
  /// Momentum buffer (same layout as params); present when momentum > 0.
  std::optional<RnnRsmParams> velocity;
  std::optional<double> heldout_sum_ppl;
};

struct EpochRecord {
  int epoch = 0;
  /// Mean absolute per-word deviation between CD negatives and data.
  double reconstruction_error = 0.0;
  double gradient_norm = 0.0;
  std::optional<double> heldout_sum_ppl;
};

struct TrainOutcome {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

/// Standalone CD training of one slice (no recurrent machinery) for
/// `config.epochs` epochs from a Gaussian(0, 0.01) initialisation.
RsmParams train_static_rsm(const TimeSlice& slice, std::size_t vocab_size, const TrainConfig& config,
                           std::uint64_t seed);

/// Seed of the standalone RSM that warm_start() trains.
std::uint64_t warm_start_seed(std::uint64_t seed);

/// RSM warm start: train_static_rsm on the final slice for
/// config.warm_start_epochs epochs, seeded with warm_start_seed(seed); then
/// Gaussian(0, 0.01) recurrent weights and zero state bias / initial state.
/// Falls back to a random RSM when the final slice is empty.
RnnRsmParams warm_start(const TemporalCorpus& corpus, const TrainConfig& config, std::uint64_t seed);

/// Held-out sum over slices of per-slice perplexity, with slice biases taken
/// from the forward pass over `timeline`. Slices without held documents are skipped.
double heldout_sum_perplexity(const RnnRsmParams& params, const TemporalCorpus& timeline,
                              const TemporalCorpus& held, const TrainConfig& config);

class Trainer {
 public:
  /// `held` may be null; the corpora must outlive the trainer.
  Trainer(const TemporalCorpus& corpus, TrainConfig config, const TemporalCorpus* held = nullptr);

  Checkpoint initialize() const;
  /// One full-sequence SGD step; advances checkpoint.epoch.
  EpochRecord step(Checkpoint& checkpoint) const;
  /// Continues from `start` until config.epochs or early stopping. With a
  /// held-out corpus the best evaluated checkpoint is returned.
  TrainOutcome run(Checkpoint start, const std::function<void(const EpochRecord&)>& on_epoch = {}) const;

 private:
  const TemporalCorpus* corpus_;
  const TemporalCorpus* held_;
  TrainConfig config_;
};

TrainOutcome train(const TemporalCorpus& corpus, const TrainConfig& config, const TemporalCorpus* held = nullptr);

// Checkpoint files: versioned JSON envelope. With `binary_sidecar` the
// parameters go to <path>.bin (little-endian float64 blocks with dims).
inline constexpr int kCheckpointFormatVersion = 1;
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path, bool binary_sidecar = false);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_to_json(const Checkpoint& checkpoint);

}  // namespace tempora
