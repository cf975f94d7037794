#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coherence/checkpoint.hpp"
#include "coherence/graph.hpp"
#include "coherence/lstm.hpp"
#include "coherence/model.hpp"
#include "coherence/params.hpp"
#include "coherence/text.hpp"

namespace coherence::seq2seq {

// Parameter layout of an LSTM encoder-decoder whose output layer optionally
// reads a latent vector: logits = W_out * concat(h_t, z) + b_out.
//
//   <prefix>.emb             {vocab, embed}
//   <prefix>.enc.*           encoder LSTM (absent for language models)
//   <prefix>.dec.*           decoder LSTM
//   <prefix>.out.W / .out.b  {vocab, hidden + latent} / {vocab}
struct EncoderDecoder {
  std::string prefix = "s2s";
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 100;
  std::size_t latent_dim = 0;
  bool has_encoder = true;

  lstm::LstmParams encoder() const { return {prefix + ".enc", embed_dim, hidden_dim}; }
  lstm::LstmParams decoder() const { return {prefix + ".dec", embed_dim, hidden_dim}; }
  lstm::EmbeddingParams embedding() const { return {prefix + ".emb", vocab_size, embed_dim}; }
  std::string out_w() const { return prefix + ".out.W"; }
  std::string out_b() const { return prefix + ".out.b"; }

  void init(ParamStore& store, std::mt19937_64& rng, double scale = kDefaultInitScale) const;

  struct Bound {
    Var emb, out_w, out_b;
    std::optional<lstm::BoundLstm> enc;
    lstm::BoundLstm dec;
  };
  Bound bind(Graph& g) const;

  // Decoder initial state: encoder final state, or zeros without a source.
  lstm::LstmState start(Graph& g, const Bound& b, const text::SentenceIds* source) const;
  // Feeds `prev` to the decoder, advances `state` and returns next-token logits.
  Var step(Graph& g, const Bound& b, lstm::LstmState& state, text::TokenId prev,
           std::optional<Var> latent) const;
  // Teacher-forced negative log-likelihood of `target` (summed over tokens).
  Var target_nll(Graph& g, const Bound& b, const text::SentenceIds* source,
                 const text::SentenceIds& target, std::optional<Var> latent) const;
  std::vector<Hypothesis> beam_search(Graph& g, const Bound& b, const text::SentenceIds* source,
                                      std::optional<Var> latent, const BeamConfig& config) const;
};

// log softmax(logits)[token], computed the same way as Graph::softmax_xent.
double log_softmax_at(std::span<const double> logits, std::size_t token);

struct Seq2SeqConfig {
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 100;
  TrainConfig train;
};

// Vanilla encoder-decoder p(target | source), or a language model (empty source).
class Seq2SeqModel final : public ConditionalModel {
 public:
  Seq2SeqModel(Direction direction, const text::Vocab& vocab, const Seq2SeqConfig& config);
  Seq2SeqModel(Direction direction, std::size_t vocab_size, std::uint64_t vocab_digest,
               const Seq2SeqConfig& config);

  Direction direction() const override { return direction_; }
  std::string_view backend() const override { return "s2s"; }
  std::size_t vocab_size() const override { return net_.vocab_size; }
  std::uint64_t vocab_digest() const override { return vocab_digest_; }

  LogProb log_prob(std::span<const text::SentenceIds> context,
                   const text::SentenceIds& target) const override;
  std::vector<Hypothesis> beam_decode(std::span<const text::SentenceIds> context,
                                      const BeamConfig& config) const override;

  // Source-explicit forms. `source` must be null for language models.
  LogProb log_prob(const text::SentenceIds* source, const text::SentenceIds& target) const;
  std::vector<Hypothesis> beam_decode(const text::SentenceIds* source, const BeamConfig& config) const;
  Var loss(Graph& g, const text::SentenceIds* source, const text::SentenceIds& target) const;

  const EncoderDecoder& network() const { return net_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Seq2SeqConfig& config() const { return config_; }

  Checkpoint to_checkpoint() const;
  static Seq2SeqModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  Direction direction_;
  std::uint64_t vocab_digest_;
  Seq2SeqConfig config_;
  EncoderDecoder net_;
  ParamStore params_;
};

std::string_view checkpoint_kind(Direction direction);

// (source, target) pairs; the source is empty for language-model training.
struct TrainingPair {
  std::optional<text::SentenceIds> source;
  text::SentenceIds target;
};

// Forward: (s_i, s_{i+1}). Backward: (s_{i+1}, s_i). Language model: (none, s).
std::vector<TrainingPair> make_pairs(std::span<const text::EncodedParagraph> paragraphs,
                                     Direction direction);

struct TrainReport {
  std::vector<double> epoch_loss;  // mean per-token negative log-likelihood
};

// Minibatch AdaGrad on teacher-forced cross-entropy. Throws on an empty set.
TrainReport train(Seq2SeqModel& model, std::span<const TrainingPair> pairs);

Seq2SeqModel train_seq2seq(std::span<const TrainingPair> pairs, Direction direction,
                           const text::Vocab& vocab, const Seq2SeqConfig& config,
                           TrainReport* report = nullptr);

// Mean per-token NLL of `model` over pairs.
double mean_token_nll(const Seq2SeqModel& model, std::span<const TrainingPair> pairs);

}  // namespace coherence::seq2seq
