#include "coherence/synth.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "coherence/error.hpp"

namespace coherence::synth {

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::kOrdered: return "ordered";
    case Kind::kTwoTopic: return "two-topic";
    case Kind::kSentinel: return "sentinel";
  }
  return "";
}

Kind parse_kind(std::string_view name) {
  if (name == "ordered") return Kind::kOrdered;
  if (name == "two-topic") return Kind::kTwoTopic;
  if (name == "sentinel") return Kind::kSentinel;
  throw Error("unknown corpus kind '" + std::string(name) + "'");
}

std::size_t successor(const GeneratorSpec& spec, std::size_t cls) { return (cls + 1) % spec.classes; }

namespace {

std::size_t uniform(text::Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void check_spec(const GeneratorSpec& s) {
  if (s.min_sentence == 0 || s.min_sentence > s.max_sentence) throw Error("bad sentence length range");
  if (s.min_paragraph == 0 || s.min_paragraph > s.max_paragraph) throw Error("bad paragraph length range");
  if (s.kind == Kind::kTwoTopic) {
    if (s.topics < 2 || s.words_per_topic == 0) throw Error("two-topic corpus needs >= 2 topics with words");
    if (s.noise_rate > 0.0 && s.noise_words == 0) throw Error("noise rate set without noise words");
  } else if (s.classes == 0 || s.words_per_class == 0) {
    throw Error("ordered corpus needs classes with words");
  }
}

std::string class_sentence(const GeneratorSpec& s, std::size_t cls, text::Rng& rng) {
  const std::size_t len = uniform(rng, s.min_sentence, s.max_sentence);
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) out += ' ';
    out += "c" + std::to_string(cls) + "w" + std::to_string(uniform(rng, 0, s.words_per_class - 1));
  }
  return out;
}

std::string topic_sentence(const GeneratorSpec& s, std::size_t topic, text::Rng& rng) {
  const std::size_t len = uniform(rng, s.min_sentence, s.max_sentence);
  std::bernoulli_distribution noisy(s.noise_rate);
  std::string out;
  for (std::size_t i = 0; i < len; ++i) {
    if (i) out += ' ';
    if (s.noise_words > 0 && noisy(rng)) {
      out += "n" + std::to_string(uniform(rng, 0, s.noise_words - 1));
    } else {
      out += "t" + std::to_string(topic) + "w" + std::to_string(uniform(rng, 0, s.words_per_topic - 1));
    }
  }
  return out;
}

std::string mark(const std::string& sentence, text::Rng& rng) {
  auto words = text::tokenize(sentence);
  words.insert(words.begin() + static_cast<std::ptrdiff_t>(uniform(rng, 0, words.size())),
               std::string(kSentinelToken));
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
  return out;
}

}  // namespace

SynthCorpus generate(const GeneratorSpec& spec, std::size_t count, text::Rng& rng) {
  if (count == 0) throw Error("paragraph count must be at least 1");
  check_spec(spec);
  SynthCorpus out;
  for (std::size_t item = 0; item < count; ++item) {
    if (spec.kind == Kind::kOrdered) {
      const std::size_t n = uniform(rng, spec.min_paragraph, spec.max_paragraph);
      text::Paragraph para;
      std::size_t cls = uniform(rng, 0, spec.classes - 1);
      for (std::size_t i = 0; i < n; ++i) {
        para.push_back(class_sentence(spec, cls, rng));
        out.annotations.push_back({out.corpus.paragraphs.size(), i, "c" + std::to_string(cls)});
        cls = successor(spec, cls);
      }
      out.corpus.paragraphs.push_back(std::move(para));
    } else if (spec.kind == Kind::kTwoTopic) {
      const std::size_t n = uniform(rng, spec.min_paragraph, spec.max_paragraph);
      std::bernoulli_distribution stay(spec.stay_probability);
      text::Paragraph para;
      std::size_t topic = uniform(rng, 0, spec.topics - 1);
      for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && !stay(rng)) {
          const std::size_t other = uniform(rng, 0, spec.topics - 2);
          topic = other >= topic ? other + 1 : other;
        }
        para.push_back(topic_sentence(spec, topic, rng));
        out.annotations.push_back({out.corpus.paragraphs.size(), i, "t" + std::to_string(topic)});
      }
      out.corpus.paragraphs.push_back(std::move(para));
    } else {
      std::bernoulli_distribution marked(spec.sentinel_rate);
      text::Paragraph human, machine;
      std::size_t cls = uniform(rng, 0, spec.classes - 1);
      const std::size_t total = spec.context_sentences + spec.turns;
      const std::size_t h = out.corpus.paragraphs.size();
      for (std::size_t i = 0; i < total; ++i) {
        const std::string s = class_sentence(spec, cls, rng);
        const bool context = i < spec.context_sentences;
        human.push_back(s);
        machine.push_back(!context && marked(rng) ? mark(s, rng) : s);
        out.annotations.push_back({h, i, context ? "context" : "human"});
        out.annotations.push_back({h + 1, i, context ? "context" : "machine"});
        cls = successor(spec, cls);
      }
      out.corpus.paragraphs.push_back(std::move(human));
      out.corpus.paragraphs.push_back(std::move(machine));
    }
  }
  std::stable_sort(out.annotations.begin(), out.annotations.end(), [](const Annotation& a, const Annotation& b) {
    return a.paragraph != b.paragraph ? a.paragraph < b.paragraph : a.position < b.position;
  });
  return out;
}

SynthCorpus generate(const GeneratorSpec& spec, std::size_t count) {
  text::Rng rng(spec.seed);
  return generate(spec, count, rng);
}

void save_annotations(std::span<const Annotation> annotations, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& a : annotations) out << a.paragraph << '\t' << a.position << '\t' << a.label << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<Annotation> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Annotation a;
    if (!(fields >> a.paragraph >> a.position >> a.label)) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed annotation");
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<eval::AdversarialExample> adversarial_examples(const SynthCorpus& corpus, const text::Vocab& vocab) {
  std::vector<eval::AdversarialExample> out;
  std::vector<std::size_t> continuation(corpus.corpus.paragraphs.size(), 0);
  std::vector<int> role(corpus.corpus.paragraphs.size(), -1);
  for (const auto& a : corpus.annotations) {
    if (a.paragraph >= role.size()) throw Error("annotation refers to a missing paragraph");
    if (a.label == "human" || a.label == "machine") {
      ++continuation[a.paragraph];
      role[a.paragraph] = a.label == "human" ? 1 : 0;
    }
  }
  for (std::size_t p = 0; p < corpus.corpus.paragraphs.size(); ++p) {
    if (role[p] < 0) throw Error("paragraph " + std::to_string(p) + " has no continuation annotation");
    eval::AdversarialExample e;
    for (const auto& s : corpus.corpus.paragraphs[p]) e.sentences.push_back(text::encode_sentence(vocab, s));
    e.human = role[p] == 1;
    e.turns = continuation[p];
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace coherence::synth
