#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "coherence/checkpoint.hpp"
#include "coherence/graph.hpp"
#include "coherence/lstm.hpp"
#include "coherence/model.hpp"
#include "coherence/text.hpp"

namespace coherence::discrim {

enum class NegativePool { kCorpus, kDocument };

struct DiscrimConfig {
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 100;  // K: sentence vector and classifier hidden layer
  std::size_t half_window = 1;   // L
  std::size_t negatives_per_positive = 1;
  NegativePool pool = NegativePool::kCorpus;
  TrainConfig train;
};

// Sentence LSTM shared by every clique position ("discrim.enc.*") and a
// classifier over the (2L+1)K concatenation: tanh hidden layer of size K,
// then a sigmoid unit ("discrim.clf.*").
class DiscrimModel {
 public:
  DiscrimModel(std::size_t vocab_size, std::uint64_t vocab_digest, const DiscrimConfig& config);

  // Copies in-vocabulary vectors and freezes the embedding matrix. The table
  // dimension must equal embed_dim.
  void use_pretrained(const text::Vocab& vocab, const text::EmbeddingTable& table);

  Var logit(Graph& g, const text::Clique& clique) const;
  Var loss(Graph& g, const text::Clique& clique) const;
  // Probability that the clique is coherent, in (0, 1).
  double classify(const text::Clique& clique) const;

  std::size_t half_window() const { return config_.half_window; }
  std::size_t input_dim() const { return (2 * config_.half_window + 1) * config_.hidden_dim; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t vocab_digest() const { return vocab_digest_; }
  const DiscrimConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Checkpoint to_checkpoint() const;
  static DiscrimModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  std::size_t vocab_size_;
  std::uint64_t vocab_digest_;
  DiscrimConfig config_;
  lstm::EmbeddingParams emb_;
  lstm::LstmParams enc_;
  ParamStore params_;
};

double classify_clique(const DiscrimModel& model, const text::Clique& clique);
// Mean of classify_clique over make_cliques(paragraph, L).
double score_document_discrim(const DiscrimModel& model, std::span<const text::SentenceIds> paragraph);

struct DiscrimReport {
  std::vector<double> epoch_loss;  // mean binary cross-entropy
};

// Every clique of the corpus is a positive; each epoch draws fresh negatives
// by replacing clique centers with sentences from the configured pool, or from
// `explicit_pool` when given.
DiscrimReport train_discriminative(DiscrimModel& model, std::span<const text::EncodedParagraph> corpus,
                                   std::optional<std::span<const text::SentenceIds>> explicit_pool = std::nullopt);

// Fraction of cliques classified on the correct side of 0.5.
double clique_accuracy(const DiscrimModel& model, std::span<const text::Clique> cliques);

}  // namespace coherence::discrim
