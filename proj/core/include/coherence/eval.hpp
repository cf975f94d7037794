#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "coherence/model.hpp"
#include "coherence/scorers.hpp"
#include "coherence/text.hpp"

namespace coherence::eval {

using DocumentScorer = std::function<double(std::span<const text::SentenceIds>)>;

// Fraction of pairs with original > permuted. Ties count as incorrect.
double binary_accuracy(std::span<const double> original, std::span<const double> permuted);

struct ParagraphPair {
  text::EncodedParagraph original;
  text::EncodedParagraph permuted;
};

struct BinaryResult {
  double accuracy = 0.0;
  std::vector<double> original_scores;
  std::vector<double> permuted_scores;
};

// Scores both sides of every pair; `threads` > 1 spreads items over workers.
BinaryResult binary_accuracy(const DocumentScorer& scorer, std::span<const ParagraphPair> pairs,
                             std::size_t threads = 1);

// 1 - 2 * inversions / (N (N - 1)): 1 for the identity, 0 for a full reversal.
double kendall_tau(std::span<const std::size_t> predicted, std::size_t n);
// Standard Kendall tau, 1 - 4 * inversions / (N (N - 1)), in [-1, 1].
double standard_kendall_tau(std::span<const std::size_t> predicted, std::size_t n);
// Inversions of `predicted` against 0..N-1. Throws unless it is a permutation.
std::size_t count_inversions(std::span<const std::size_t> predicted);

// Score of appending bag sentence `next` after the partial ordering `prefix`.
using OrderingScorer = std::function<double(std::span<const std::size_t> prefix, std::size_t next)>;
// Adapts a pairwise scorer to read only the last placed sentence.
OrderingScorer pairwise(std::function<double(std::size_t prev, std::size_t next)> score);

struct OrderingResult {
  std::vector<std::size_t> order;  // bag indices, order[0] == 0
  double score = 0.0;              // sum of step scores
  double tau = 0.0;                // against the true order
  double standard_tau = 0.0;
  std::vector<std::vector<std::size_t>> trace;  // best partial ordering per depth
};

// Beam search over orderings of an N-sentence bag whose sentence 0 is given
// first. `truth[k]` is the bag index of the k-th sentence of the true order
// (identity when empty).
OrderingResult reconstruct(const OrderingScorer& scorer, std::size_t n, std::size_t beam_size,
                           std::span<const std::size_t> truth = {});

// Mean cosine between adjacent sentence vectors (mean of in-vocabulary word
// vectors; sentences without any contribute 0).
double cosine_coherence(const text::EmbeddingTable& embeddings, std::span<const std::string> paragraph);

struct GenerationModels {
  const ConditionalModel* forward = nullptr;
  const ConditionalModel* backward = nullptr;  // bi and mmi rerank
  const ConditionalModel* language = nullptr;  // mmi rerank
};

// Generates `turns` sentences, appending each to the context before the
// next. uni keeps the top beam hypothesis; bi and mmi rerank the N-best list
// against the last context sentence.
std::vector<text::SentenceIds> generate_turns(const GenerationModels& models,
                                              std::vector<text::SentenceIds> context, std::size_t turns,
                                              const BeamConfig& beam, scorers::Mode rerank);

// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace coherence::eval
