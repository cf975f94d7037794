#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coherence/text.hpp"

namespace coherence {

enum class Direction { kForward, kBackward, kLanguageModel };

std::string_view direction_name(Direction d);
Direction parse_direction(std::string_view name);

struct LogProb {
  double total = 0.0;      // sum of per-token log-probabilities, including EOS
  std::size_t tokens = 0;  // target length M
};

struct Hypothesis {
  text::SentenceIds sentence;
  double log_prob = 0.0;
  bool forced_eos = false;  // EOS appended because max_len was reached
};

struct BeamConfig {
  std::size_t beam_size = 10;
  std::size_t nbest = 10;
  std::size_t max_len = 40;  // content tokens, EOS excluded
};

// Common training knobs. Model-specific configs embed this.
struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  double clip = 5.0;
  double init_scale = 0.08;
  std::uint64_t seed = 42;
  // Called once per epoch with (epoch index, mean training loss).
  std::function<void(std::size_t, double)> on_epoch;
};

// A generative backend in one reading direction.
//
// `context` lists the sentences that precede the target in the model's reading
// order, nearest last. Backward models read paragraphs right to left, so their
// context is the following sentences in reversed order. Language models take
// an empty context.
class ConditionalModel {
 public:
  virtual ~ConditionalModel() = default;

  virtual Direction direction() const = 0;
  virtual std::string_view backend() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual std::uint64_t vocab_digest() const = 0;

  virtual LogProb log_prob(std::span<const text::SentenceIds> context,
                           const text::SentenceIds& target) const = 0;
  virtual std::vector<Hypothesis> beam_decode(std::span<const text::SentenceIds> context,
                                              const BeamConfig& config) const = 0;
};

// Throws when a sentence holds ids outside the model vocabulary.
void check_vocab(const ConditionalModel& model, const text::SentenceIds& sentence);

}  // namespace coherence
