#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "coherence/checkpoint.hpp"
#include "coherence/model.hpp"
#include "coherence/seq2seq.hpp"
#include "coherence/text.hpp"

namespace coherence::hmmlda {

// Sentence-level topic HMM: every sentence takes one topic, topics follow a
// first-order Markov chain within a paragraph and words are drawn from the
// sentence topic. Fitted by collapsed Gibbs sampling; only counts are kept.
struct TopicState {
  std::size_t topics = 0;
  std::size_t vocab_size = 0;
  double alpha = 0.1;  // Dirichlet prior on transition and initial rows
  double beta = 0.01;  // Dirichlet prior on topic-word rows

  std::vector<std::vector<int>> assignments;  // per paragraph, per sentence
  std::vector<std::int64_t> transition;       // topics x topics, row = from
  std::vector<std::int64_t> transition_out;   // row sums of transition
  std::vector<std::int64_t> initial;          // topic of each paragraph-first sentence
  std::vector<std::int64_t> final;            // topic of each paragraph-last sentence
  std::vector<std::int64_t> topic_word;       // topics x vocab
  std::vector<std::int64_t> topic_total;      // row sums of topic_word

  double transition_prob(std::size_t from, std::size_t to) const;
  double initial_prob(std::size_t k) const;
  double word_prob(std::size_t k, text::TokenId w) const;
};

// Tokens a topic emits: everything but EOS and PAD.
bool is_topic_word(text::TokenId id);

struct HmmLdaConfig {
  std::size_t topics = 20;
  double alpha = 0.1;
  double beta = 0.01;
  std::size_t sweeps = 200;
  std::uint64_t seed = 42;
  // Called after every sweep with (sweep index, state).
  std::function<void(std::size_t, const TopicState&)> on_sweep;
};

TopicState fit_hmm_lda(std::span<const text::EncodedParagraph> corpus, std::size_t vocab_size,
                       const HmmLdaConfig& config);

// Recomputes every count table from the assignments and throws on any
// mismatch, negative count or out-of-range topic.
void check_consistency(const TopicState& state, std::span<const text::EncodedParagraph> corpus);

// Count tables and priors under "hmmlda.counts.*". Assignments are not
// stored; a loaded state carries none.
void store_topics(Checkpoint& checkpoint, const TopicState& state);
TopicState load_topics(const Checkpoint& checkpoint);
// Standalone topic-model checkpoint (kind "hmmlda").
Checkpoint topic_checkpoint(const TopicState& state, std::uint64_t vocab_digest);

// Same chain read right to left: transposed transitions, last-sentence topics
// as the initial distribution.
TopicState reversed(const TopicState& state);

// Posterior over the topic of `sentence` given the distribution of the
// previous sentence's topic.
std::vector<double> infer_topic_dist(const TopicState& state, const text::SentenceIds& sentence,
                                     std::span<const double> prev_dist);
// Posterior for a paragraph-first sentence.
std::vector<double> infer_first(const TopicState& state, const text::SentenceIds& sentence);
// One transition step: sum_j dist_j * P(k | j).
std::vector<double> predict_next(const TopicState& state, std::span<const double> dist);
// Predictive topic distribution of the sentence following `context`
// (reading order, nearest last). Filters through the whole context.
std::vector<double> topic_vector(const TopicState& state, std::span<const text::SentenceIds> context);

struct GmConfig {
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 100;
  std::size_t topic_dim = 100;  // K, columns of V
  TrainConfig train;
};

// Encoder-decoder whose output layer also reads z = t_n * V, t_n being the
// predictive topic distribution of the target sentence.
class HmmLdaGmModel final : public ConditionalModel {
 public:
  HmmLdaGmModel(Direction direction, TopicState topics, std::size_t vocab_size,
                std::uint64_t vocab_digest, const GmConfig& config);

  Direction direction() const override { return direction_; }
  std::string_view backend() const override { return "hmmlda"; }
  std::size_t vocab_size() const override { return net_.vocab_size; }
  std::uint64_t vocab_digest() const override { return vocab_digest_; }

  LogProb log_prob(std::span<const text::SentenceIds> context,
                   const text::SentenceIds& target) const override;
  std::vector<Hypothesis> beam_decode(std::span<const text::SentenceIds> context,
                                      const BeamConfig& config) const override;

  // Teacher-forced NLL given a precomputed topic vector.
  Var loss(Graph& g, const text::SentenceIds& source, const text::SentenceIds& target,
           std::span<const double> topic_dist) const;

  const seq2seq::EncoderDecoder& network() const { return net_; }
  const TopicState& topics() const { return topics_; }
  std::string topic_matrix_name() const { return net_.prefix + ".V"; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const GmConfig& config() const { return config_; }

  Checkpoint to_checkpoint() const;
  static HmmLdaGmModel from_checkpoint(const Checkpoint& checkpoint);

 private:
  Direction direction_;
  std::uint64_t vocab_digest_;
  GmConfig config_;
  TopicState topics_;
  seq2seq::EncoderDecoder net_;
  ParamStore params_;
};

struct GmExample {
  text::SentenceIds source;
  text::SentenceIds target;
  std::vector<double> topic_dist;
};

// One example per sentence after the first in reading order. The topic vector
// of each target is filtered through all earlier sentences of its paragraph.
std::vector<GmExample> make_gm_examples(const TopicState& topics,
                                        std::span<const text::EncodedParagraph> paragraphs,
                                        Direction direction);

seq2seq::TrainReport train(HmmLdaGmModel& model, std::span<const GmExample> examples);
double mean_token_nll(const HmmLdaGmModel& model, std::span<const GmExample> examples);

// Reverses each paragraph. Backward models train on this view.
std::vector<text::EncodedParagraph> reverse_paragraphs(std::span<const text::EncodedParagraph> paragraphs);

}  // namespace coherence::hmmlda
