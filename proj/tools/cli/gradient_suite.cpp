#include "cli/gradient_suite.hpp"

#include "coherence/adversary.hpp"
#include "coherence/discrim.hpp"
#include "coherence/error.hpp"
#include "coherence/hmmlda.hpp"
#include "coherence/seq2seq.hpp"
#include "coherence/vlv.hpp"

namespace coherence::cli {
namespace {

using text::SentenceIds;

constexpr std::size_t kVocab = 9;
constexpr double kScale = 0.5;

SentenceIds sent(std::initializer_list<text::TokenId> ids) {
  SentenceIds s{std::vector<text::TokenId>(ids)};
  s.ids.push_back(text::kEos);
  return s;
}

const text::EncodedParagraph& paragraph() {
  static const text::EncodedParagraph p = {sent({4, 5}), sent({6, 7, 8}), sent({5, 4}), sent({8})};
  return p;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.init_scale = kScale;
  t.seed = 11;
  return t;
}

GradCheckReport check_seq2seq(Direction d) {
  seq2seq::Seq2SeqModel m(d, kVocab, 0, {3, 4, tiny_train()});
  const auto& p = paragraph();
  return grad_check(m.params(), [&](Graph& g) {
    return d == Direction::kLanguageModel ? m.loss(g, nullptr, p[1]) : m.loss(g, &p[0], p[1]);
  });
}

GradCheckReport check_gm() {
  hmmlda::HmmLdaConfig hc;
  hc.topics = 3;
  hc.sweeps = 5;
  hc.seed = 3;
  const std::vector<text::EncodedParagraph> corpus = {paragraph()};
  auto st = hmmlda::fit_hmm_lda(corpus, kVocab, hc);
  hmmlda::HmmLdaGmModel m(Direction::kForward, st, kVocab, 0, {3, 4, 2, tiny_train()});
  const std::vector<double> t = {0.2, 0.5, 0.3};
  const auto& p = paragraph();
  return grad_check(m.params(), [&](Graph& g) { return m.loss(g, p[0], p[1], t); });
}

GradCheckReport check_vlv() {
  vlv::VlvConfig c;
  c.embed_dim = 3;
  c.hidden_dim = 3;
  c.context_dim = 3;
  c.latent_dim = 2;
  c.window = 2;
  c.train = tiny_train();
  vlv::VlvModel m(Direction::kForward, kVocab, 0, c);
  std::mt19937_64 rng(5);
  const auto& p = paragraph();
  const vlv::Noise noise = m.draw_noise(p.size(), rng);
  return grad_check(m.params(), [&](Graph& g) {
    const auto t = m.elbo_terms(g, p, noise, p.size() - 1);
    return g.sub(t.kl, t.reconstruction);
  });
}

GradCheckReport check_discrim() {
  discrim::DiscrimConfig c;
  c.embed_dim = 3;
  c.hidden_dim = 3;
  c.train = tiny_train();
  discrim::DiscrimModel m(kVocab, 0, c);
  const auto cliques = text::make_cliques(paragraph(), 1);
  std::mt19937_64 rng(2);
  const auto negative = text::sample_negative(cliques[1], paragraph(), rng);
  return grad_check(m.params(), [&](Graph& g) { return g.add(m.loss(g, cliques[1]), m.loss(g, negative)); });
}

GradCheckReport check_adversary() {
  eval::AdversarialEvaluator ev(kVocab, 0, {3, 3, 3, tiny_train()});
  eval::AdversarialExample human{paragraph(), true, 1};
  eval::AdversarialExample machine{{paragraph()[2], paragraph()[0]}, false, 1};
  return grad_check(ev.params(), [&](Graph& g) { return g.add(ev.loss(g, human), ev.loss(g, machine)); });
}

}  // namespace

std::vector<SuiteEntry> run_gradient_suite(const std::string& model) {
  std::vector<SuiteEntry> out;
  bool matched = false;
  for (const auto& name : gradient_models()) {
    if (model != "all" && model != name) continue;
    matched = true;
    GradCheckReport r;
    if (name == "lm") r = check_seq2seq(Direction::kLanguageModel);
    if (name == "seq2seq") r = check_seq2seq(Direction::kForward);
    if (name == "hmmlda-gm") r = check_gm();
    if (name == "vlv") r = check_vlv();
    if (name == "discrim") r = check_discrim();
    if (name == "adversary") r = check_adversary();
    out.push_back({name, r});
  }
  if (!matched) throw Error("unknown gradient-check model '" + model + "'");
  return out;
}

}  // namespace coherence::cli
