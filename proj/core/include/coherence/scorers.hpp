#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coherence/model.hpp"
#include "coherence/text.hpp"

namespace coherence::scorers {

enum class Mode { kUni, kBi, kMmi };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

// Raw log-probabilities behind one pairwise score. Terms a mode does not use
// stay at zero.
struct PairTerms {
  double forward = 0.0;   // log p_F(s_next | s_prev)
  double backward = 0.0;  // log p_B(s_prev | s_next)
  double lm_prev = 0.0;   // log p_L(s_prev)
  double lm_next = 0.0;   // log p_L(s_next)
  std::size_t n_prev = 0;
  std::size_t n_next = 0;
};

struct CoherenceScore {
  double value = 0.0;  // log domain, length normalized
  Mode mode = Mode::kUni;
  std::string backend;
  PairTerms terms;
};

struct Models {
  const ConditionalModel* forward = nullptr;
  const ConditionalModel* backward = nullptr;
  const ConditionalModel* language = nullptr;
};

// Throws unless the models `mode` needs are present, carry the right direction
// tags and share one vocabulary.
void validate(Mode mode, const Models& models);

// (1/N_next) log p_F(s_next | s_prev)
CoherenceScore score_uni(const ConditionalModel& forward, const text::SentenceIds& prev,
                         const text::SentenceIds& next);
// (1/N_prev) log p_B(s_prev | s_next) + (1/N_next) log p_F(s_next | s_prev)
CoherenceScore score_bi(const ConditionalModel& forward, const ConditionalModel& backward,
                        const text::SentenceIds& prev, const text::SentenceIds& next);
// (1/N_prev)[log p_B(s_prev | s_next) - log p_L(s_prev)]
//   + (1/N_next)[log p_F(s_next | s_prev) - log p_L(s_next)]
CoherenceScore score_mmi(const ConditionalModel& forward, const ConditionalModel& backward,
                         const ConditionalModel& language, const text::SentenceIds& prev,
                         const text::SentenceIds& next);

CoherenceScore score_pair(Mode mode, const Models& models, const text::SentenceIds& prev,
                          const text::SentenceIds& next);

// Mean pairwise score over the N-1 adjacent pairs. Needs N >= 2.
double score_document(Mode mode, const Models& models, std::span<const text::SentenceIds> paragraph);
std::vector<CoherenceScore> score_adjacent_pairs(Mode mode, const Models& models,
                                                 std::span<const text::SentenceIds> paragraph);

// Readings applied to the printed score formulas; reported alongside scores.
std::string_view formula_notes();

}  // namespace coherence::scorers
