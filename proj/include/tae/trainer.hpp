#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tae/corpus.hpp"
#include "tae/decoder.hpp"
#include "tae/encoder.hpp"
#include "tae/rng.hpp"

namespace tae {

enum class Phase { kWeights, kStructure };

// Epochs alternate in blocks of phase_length, starting with a Weights block:
// block index even -> Weights, odd -> Structure.
Phase phase_of(long epoch, long phase_length);

struct TrainConfig {
  std::size_t embedding_dim = 16;
  std::size_t hidden_dim = 32;
  long epochs = 200;
  long phase_length = 1;
  double learning_rate = 0.1;
  double temperature_start = 1.0;
  double temperature_min = 0.1;
  double temperature_decay = 0.99;
  std::uint64_t seed = 1;
  bool shuffle = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// All trainable weights. The structure set is {q}; every other tensor is a
// weight-set member, so the two sets partition the trainables.
struct ModelParams {
  EncoderParams encoder;
  DecoderParams decoder;

  static ModelParams init(const TrainConfig& config, Rng& rng);

  // Canonical (name, tensor) directory; ordering is the checkpoint payload
  // order.
  std::vector<std::pair<std::string, Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;

  std::vector<Tensor*> structure_set();
  std::vector<Tensor*> weight_set();
};

// Document prepared for training: per-EDU mean embeddings.
struct TrainDoc {
  std::string doc_id;
  std::vector<std::vector<double>> edu_vecs;
};

std::vector<TrainDoc> prepare_corpus(const std::vector<EduDocument>& docs,
                                     const EmbeddingTable& table,
                                     OovStats* stats = nullptr);

// Temperature used in a given epoch: start value annealed multiplicatively
// after every completed epoch, clamped at temperature_min. Iterated (not
// pow-based) so resumed runs reproduce the sequence bit-for-bit.
double temperature_at(const TrainConfig& config, long epoch);

// One pass over the corpus: encode (Structure -> sampled selector, Weights ->
// argmax), decode along the tied tree, back-propagate, and apply one SGD step
// per document to the phase-active parameter set only. Returns the mean
// document loss.
double train_epoch(const std::vector<TrainDoc>& corpus, ModelParams& params,
                   Phase phase, const TrainConfig& config, double temperature,
                   Rng& rng);

struct EpochRecord {
  long epoch = 0;
  Phase phase = Phase::kWeights;
  double mean_loss = 0.0;
};

struct Checkpoint {
  std::uint32_t version = 1;
  TrainConfig config;
  ModelParams params;
  long epoch = 0;  // completed epochs
  std::string rng_state;
  std::vector<EpochRecord> history;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::string rng_state;

  Checkpoint to_checkpoint(const TrainConfig& config) const;
};

// Full run: seeded uniform(-0.1, 0.1) init, per-epoch annealed temperature,
// phases by phase_of. With `resume`, continues that checkpoint (its config
// must match except for the epoch budget) until config.epochs.
TrainResult train(const TrainConfig& config, const std::vector<TrainDoc>& corpus,
                  const Checkpoint* resume = nullptr);

// Versioned binary container: magic "TAE1", little-endian u32 header length,
// JSON header (config, epoch, rng state, loss history, tensor directory with
// names and shapes), then float64 little-endian payloads in directory order.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Deterministic argmax-mode tree induction with frozen parameters, one tree
// per document in corpus order.
std::vector<NamedTree> induce_trees(const ModelParams& params,
                                    const std::vector<TrainDoc>& corpus);

const char* phase_code(Phase phase);  // "W" or "S"

}  // namespace tae
