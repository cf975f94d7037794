#include "coherence/adversary.hpp"

#include <cmath>
#include <random>

#include "coherence/error.hpp"
#include "coherence/eval.hpp"
#include "coherence/trainer.hpp"

namespace coherence::eval {

AdversarialEvaluator::AdversarialEvaluator(std::size_t vocab_size, std::uint64_t vocab_digest,
                                           const AdversaryConfig& config)
    : vocab_size_(vocab_size),
      vocab_digest_(vocab_digest),
      config_(config),
      emb_{"adv.emb", vocab_size, config.embed_dim},
      enc_(lstm::make_hier_params("adv", config.embed_dim, config.word_hidden, config.sent_hidden)) {
  std::mt19937_64 rng(config.train.seed);
  const double scale = config.train.init_scale;
  lstm::init_embedding(params_, emb_, rng, scale);
  lstm::init_hier(params_, enc_, rng, scale);
  params_.add_uniform("adv.out.W", Shape{1, config.sent_hidden}, scale, rng);
  params_.add_zeros("adv.out.b", Shape{1});
}

Var AdversarialEvaluator::logit(Graph& g, std::span<const text::SentenceIds> chunk) const {
  if (chunk.empty()) throw Error("adversarial chunk is empty");
  for (const auto& s : chunk) {
    for (auto id : s.ids) {
      if (id >= vocab_size_) throw Error("token id outside evaluator vocabulary");
    }
  }
  const Var h = lstm::hier_encode(g, enc_, g.param(emb_.name), chunk);
  return g.affine(g.param("adv.out.W"), h, g.param("adv.out.b"));
}

Var AdversarialEvaluator::loss(Graph& g, const AdversarialExample& example) const {
  return g.bce_with_logit(logit(g, example.sentences), example.human ? 1.0 : 0.0);
}

double AdversarialEvaluator::probability_human(std::span<const text::SentenceIds> chunk) const {
  Graph g(params_);
  return 1.0 / (1.0 + std::exp(-g.value(logit(g, chunk)).data[0]));
}

Checkpoint AdversarialEvaluator::to_checkpoint() const {
  Checkpoint ck;
  ck.metadata["kind"] = "adversary";
  ck.metadata["vocab_size"] = std::to_string(vocab_size_);
  ck.metadata["vocab_digest"] = std::to_string(vocab_digest_);
  ck.metadata["embed_dim"] = std::to_string(config_.embed_dim);
  ck.metadata["word_hidden"] = std::to_string(config_.word_hidden);
  ck.metadata["sent_hidden"] = std::to_string(config_.sent_hidden);
  store_params(ck, params_);
  return ck;
}

AdversarialEvaluator AdversarialEvaluator::from_checkpoint(const Checkpoint& ck) {
  ck.require_kind("adversary");
  AdversaryConfig config;
  config.embed_dim = ck.meta_size("embed_dim");
  config.word_hidden = ck.meta_size("word_hidden");
  config.sent_hidden = ck.meta_size("sent_hidden");
  AdversarialEvaluator ev(ck.meta_size("vocab_size"), std::stoull(ck.meta("vocab_digest")), config);
  load_params(ck, ev.params_);
  return ev;
}

AdversaryTrainReport train_adversarial_evaluator(AdversarialEvaluator& evaluator,
                                                 std::span<const AdversarialExample> positives,
                                                 std::span<const AdversarialExample> negatives) {
  if (positives.empty() || negatives.empty()) throw Error("adversarial training needs both classes");
  std::vector<AdversarialExample> all;
  for (auto e : positives) {
    e.human = true;
    all.push_back(std::move(e));
  }
  for (auto e : negatives) {
    e.human = false;
    all.push_back(std::move(e));
  }
  const TrainConfig& tc = evaluator.config().train;
  std::mt19937_64 rng(tc.seed + 1);
  AdversaryTrainReport report;
  const ExampleBuilder build = [&](Graph& g, std::size_t i) { return ExampleLoss{evaluator.loss(g, all[i]), 1.0}; };
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const double loss = run_epoch(evaluator.params(), all.size(), build, tc, rng);
    report.epoch_loss.push_back(loss);
    if (tc.on_epoch) tc.on_epoch(epoch, loss);
  }
  return report;
}

AdversarialReport adver_suc(const AdversarialEvaluator& evaluator, std::span<const AdversarialExample> test,
                            std::size_t threads) {
  if (test.empty()) throw Error("adversarial test set is empty");
  std::size_t humans = 0;
  for (const auto& e : test) humans += e.human ? 1 : 0;
  if (2 * humans != test.size()) {
    throw Error("adversarial test set is unbalanced: " + std::to_string(humans) + " human of " +
                std::to_string(test.size()));
  }
  std::vector<char> correct(test.size());
  parallel_for(test.size(), threads, [&](std::size_t i) {
    const bool judged_human = evaluator.probability_human(test[i].sentences) > 0.5;
    correct[i] = judged_human == test[i].human ? 1 : 0;
  });
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> turns;  // correct, total
  std::size_t total_correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    total_correct += correct[i];
    auto& t = turns[test[i].turns];
    t.first += correct[i];
    ++t.second;
  }
  AdversarialReport r;
  r.count = test.size();
  r.accuracy = static_cast<double>(total_correct) / static_cast<double>(test.size());
  r.adver_suc = 1.0 - r.accuracy;
  for (const auto& [n, t] : turns) {
    r.per_turn[n] = 1.0 - static_cast<double>(t.first) / static_cast<double>(t.second);
  }
  return r;
}

}  // namespace coherence::eval
