#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coherence/adversary.hpp"
#include "coherence/text.hpp"

namespace coherence::synth {

enum class Kind { kOrdered, kTwoTopic, kSentinel };

std::string_view kind_name(Kind kind);
Kind parse_kind(std::string_view name);

inline constexpr std::string_view kSentinelToken = "zzsentinel";

struct GeneratorSpec {
  Kind kind = Kind::kOrdered;
  // ordered and sentinel: sentence classes c, successor class (c + 1) mod classes
  std::size_t classes = 24;
  std::size_t words_per_class = 8;
  // two-topic: disjoint topic vocabularies, optional shared filler words
  std::size_t topics = 2;
  std::size_t words_per_topic = 10;
  std::size_t noise_words = 0;
  double noise_rate = 0.0;
  double stay_probability = 0.8;
  std::size_t min_sentence = 4;
  std::size_t max_sentence = 6;
  std::size_t min_paragraph = 8;
  std::size_t max_paragraph = 8;
  // sentinel: each item is a context plus a clean and a marked continuation
  std::size_t context_sentences = 3;
  std::size_t turns = 1;
  double sentinel_rate = 1.0;  // probability each machine sentence is marked
  std::uint64_t seed = 42;
};

struct Annotation {
  std::size_t paragraph = 0;
  std::size_t position = 0;
  std::string label;  // class ("c5"), topic ("t1") or role (context/human/machine)

  bool operator==(const Annotation&) const = default;
};

struct SynthCorpus {
  text::Corpus corpus;
  std::vector<Annotation> annotations;
};

// Sentinel corpora hold two paragraphs per item: human at 2i, machine at 2i+1.
SynthCorpus generate(const GeneratorSpec& spec, std::size_t count, text::Rng& rng);
// Uses an rng seeded from spec.seed.
SynthCorpus generate(const GeneratorSpec& spec, std::size_t count);

// Successor class of the ordered generator.
std::size_t successor(const GeneratorSpec& spec, std::size_t cls);

void save_annotations(std::span<const Annotation> annotations, const std::filesystem::path& path);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);

// Human and machine chunks of a sentinel corpus.
std::vector<eval::AdversarialExample> adversarial_examples(const SynthCorpus& corpus, const text::Vocab& vocab);

}  // namespace coherence::synth
