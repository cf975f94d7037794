#include "coherence/model.hpp"

#include "coherence/error.hpp"

namespace coherence {

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kForward: return "forward";
    case Direction::kBackward: return "backward";
    case Direction::kLanguageModel: return "language-model";
  }
  return "unknown";
}

Direction parse_direction(std::string_view name) {
  if (name == "forward") return Direction::kForward;
  if (name == "backward") return Direction::kBackward;
  if (name == "language-model") return Direction::kLanguageModel;
  throw Error("unknown direction '" + std::string(name) + "'");
}

void check_vocab(const ConditionalModel& model, const text::SentenceIds& sentence) {
  for (auto id : sentence.ids) {
    if (id >= model.vocab_size()) {
      throw Error("vocabulary mismatch: token id " + std::to_string(id) +
                  " outside model vocabulary of size " + std::to_string(model.vocab_size()));
    }
  }
}

}  // namespace coherence
