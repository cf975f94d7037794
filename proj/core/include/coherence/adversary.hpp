#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "coherence/checkpoint.hpp"
#include "coherence/graph.hpp"
#include "coherence/lstm.hpp"
#include "coherence/model.hpp"
#include "coherence/text.hpp"

namespace coherence::eval {

// Context plus continuation, labelled human or machine.
struct AdversarialExample {
  std::vector<text::SentenceIds> sentences;
  bool human = true;
  std::size_t turns = 1;  // continuation length
};

struct AdversaryConfig {
  std::size_t embed_dim = 64;
  std::size_t word_hidden = 64;
  std::size_t sent_hidden = 64;
  TrainConfig train;
};

// Sentence LSTM, chunk LSTM over the sentence vectors, then a sigmoid unit
// giving the probability that the chunk is human-written.
class AdversarialEvaluator {
 public:
  AdversarialEvaluator(std::size_t vocab_size, std::uint64_t vocab_digest, const AdversaryConfig& config);

  Var logit(Graph& g, std::span<const text::SentenceIds> chunk) const;
  Var loss(Graph& g, const AdversarialExample& example) const;
  double probability_human(std::span<const text::SentenceIds> chunk) const;

  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t vocab_digest() const { return vocab_digest_; }
  const AdversaryConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Checkpoint to_checkpoint() const;
  static AdversarialEvaluator from_checkpoint(const Checkpoint& checkpoint);

 private:
  std::size_t vocab_size_;
  std::uint64_t vocab_digest_;
  AdversaryConfig config_;
  lstm::EmbeddingParams emb_;
  lstm::HierEncoderParams enc_;
  ParamStore params_;
};

struct AdversaryTrainReport {
  std::vector<double> epoch_loss;
};

AdversaryTrainReport train_adversarial_evaluator(AdversarialEvaluator& evaluator,
                                                 std::span<const AdversarialExample> positives,
                                                 std::span<const AdversarialExample> negatives);

struct AdversarialReport {
  double accuracy = 0.0;
  double adver_suc = 0.0;                     // 1 - accuracy
  std::map<std::size_t, double> per_turn;     // adver-N, keyed by continuation length
  std::size_t count = 0;
};

// Needs equally many human and machine examples. A chunk is judged human
// when the evaluator gives it probability > 0.5.
AdversarialReport adver_suc(const AdversarialEvaluator& evaluator, std::span<const AdversarialExample> test,
                            std::size_t threads = 1);

}  // namespace coherence::eval
