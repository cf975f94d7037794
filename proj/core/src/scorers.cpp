#include "coherence/scorers.hpp"

#include "coherence/error.hpp"

namespace coherence::scorers {
namespace {

void require(const ConditionalModel* model, Direction direction, const char* role) {
  if (model == nullptr) throw Error(std::string("missing ") + role + " model");
  if (model->direction() != direction) {
    throw Error(std::string(role) + " model has direction '" +
                std::string(direction_name(model->direction())) + "', expected '" +
                std::string(direction_name(direction)) + "'");
  }
}

void same_vocab(const ConditionalModel& a, const ConditionalModel& b) {
  if (a.vocab_size() != b.vocab_size() || a.vocab_digest() != b.vocab_digest()) {
    throw Error("vocabulary mismatch between scorer models");
  }
}

double per_token(double total, std::size_t n) { return total / static_cast<double>(n); }

}  // namespace

std::string_view mode_name(Mode mode) {
  switch (mode) {
    case Mode::kUni: return "uni";
    case Mode::kBi: return "bi";
    case Mode::kMmi: return "mmi";
  }
  return "";
}

Mode parse_mode(std::string_view name) {
  if (name == "uni") return Mode::kUni;
  if (name == "bi") return Mode::kBi;
  if (name == "mmi") return Mode::kMmi;
  throw Error("unknown scorer mode '" + std::string(name) + "'");
}

void validate(Mode mode, const Models& models) {
  require(models.forward, Direction::kForward, "forward");
  if (mode == Mode::kUni) return;
  require(models.backward, Direction::kBackward, "backward");
  same_vocab(*models.forward, *models.backward);
  if (mode == Mode::kBi) return;
  require(models.language, Direction::kLanguageModel, "language");
  same_vocab(*models.forward, *models.language);
}

CoherenceScore score_uni(const ConditionalModel& forward, const text::SentenceIds& prev,
                         const text::SentenceIds& next) {
  require(&forward, Direction::kForward, "forward");
  CoherenceScore s;
  s.mode = Mode::kUni;
  s.backend = std::string(forward.backend());
  const LogProb f = forward.log_prob(std::span(&prev, 1), next);
  s.terms.forward = f.total;
  s.terms.n_prev = prev.length();
  s.terms.n_next = f.tokens;
  s.value = per_token(f.total, f.tokens);
  return s;
}

CoherenceScore score_bi(const ConditionalModel& forward, const ConditionalModel& backward,
                        const text::SentenceIds& prev, const text::SentenceIds& next) {
  require(&backward, Direction::kBackward, "backward");
  same_vocab(forward, backward);
  CoherenceScore s = score_uni(forward, prev, next);
  s.mode = Mode::kBi;
  const LogProb b = backward.log_prob(std::span(&next, 1), prev);
  s.terms.backward = b.total;
  s.terms.n_prev = b.tokens;
  s.value = per_token(b.total, b.tokens) + per_token(s.terms.forward, s.terms.n_next);
  return s;
}

CoherenceScore score_mmi(const ConditionalModel& forward, const ConditionalModel& backward,
                         const ConditionalModel& language, const text::SentenceIds& prev,
                         const text::SentenceIds& next) {
  require(&language, Direction::kLanguageModel, "language");
  same_vocab(forward, language);
  CoherenceScore s = score_bi(forward, backward, prev, next);
  s.mode = Mode::kMmi;
  s.terms.lm_prev = language.log_prob({}, prev).total;
  s.terms.lm_next = language.log_prob({}, next).total;
  s.value = per_token(s.terms.backward - s.terms.lm_prev, s.terms.n_prev) +
            per_token(s.terms.forward - s.terms.lm_next, s.terms.n_next);
  return s;
}

CoherenceScore score_pair(Mode mode, const Models& models, const text::SentenceIds& prev,
                          const text::SentenceIds& next) {
  validate(mode, models);
  switch (mode) {
    case Mode::kUni: return score_uni(*models.forward, prev, next);
    case Mode::kBi: return score_bi(*models.forward, *models.backward, prev, next);
    case Mode::kMmi: return score_mmi(*models.forward, *models.backward, *models.language, prev, next);
  }
  throw Error("unknown scorer mode");
}

std::vector<CoherenceScore> score_adjacent_pairs(Mode mode, const Models& models,
                                                 std::span<const text::SentenceIds> paragraph) {
  if (paragraph.size() < 2) throw Error("document scoring needs at least 2 sentences");
  std::vector<CoherenceScore> out;
  out.reserve(paragraph.size() - 1);
  for (std::size_t i = 0; i + 1 < paragraph.size(); ++i) {
    out.push_back(score_pair(mode, models, paragraph[i], paragraph[i + 1]));
  }
  return out;
}

double score_document(Mode mode, const Models& models, std::span<const text::SentenceIds> paragraph) {
  const auto pairs = score_adjacent_pairs(mode, models, paragraph);
  double sum = 0.0;
  for (const auto& p : pairs) sum += p.value;
  return sum / static_cast<double>(pairs.size());
}

std::string_view formula_notes() {
  return "bi=(1/N_prev)*log p_B(prev|next)+(1/N_next)*log p_F(next|prev); "
         "mmi=bi-(1/N_prev)*log p_L(prev)-(1/N_next)*log p_L(next); "
         "length scaling applied outside the log; the next-sentence term of mmi uses the "
         "forward model";
}

}  // namespace coherence::scorers
