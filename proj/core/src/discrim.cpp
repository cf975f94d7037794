#include "coherence/discrim.hpp"

#include <random>

#include "coherence/error.hpp"
#include "coherence/trainer.hpp"

namespace coherence::discrim {

using text::Clique;
using text::SentenceIds;

DiscrimModel::DiscrimModel(std::size_t vocab_size, std::uint64_t vocab_digest, const DiscrimConfig& config)
    : vocab_size_(vocab_size),
      vocab_digest_(vocab_digest),
      config_(config),
      emb_{"discrim.enc.emb", vocab_size, config.embed_dim},
      enc_{"discrim.enc.lstm", config.embed_dim, config.hidden_dim} {
  if (config.hidden_dim == 0 || config.embed_dim == 0) throw Error("model dimensions must be positive");
  std::mt19937_64 rng(config.train.seed);
  const double scale = config.train.init_scale;
  lstm::init_embedding(params_, emb_, rng, scale);
  lstm::init_lstm(params_, enc_, rng, scale);
  params_.add_uniform("discrim.clf.W1", Shape{config.hidden_dim, input_dim()}, scale, rng);
  params_.add_zeros("discrim.clf.b1", Shape{config.hidden_dim});
  params_.add_uniform("discrim.clf.W2", Shape{1, config.hidden_dim}, scale, rng);
  params_.add_zeros("discrim.clf.b2", Shape{1});
}

void DiscrimModel::use_pretrained(const text::Vocab& vocab, const text::EmbeddingTable& table) {
  if (vocab.size() != vocab_size_ || vocab.digest() != vocab_digest_) {
    throw Error("vocabulary mismatch with discriminative model");
  }
  if (table.dimension() != config_.embed_dim) {
    throw ShapeError("pretrained embeddings have dimension " + std::to_string(table.dimension()) +
                     ", model expects " + std::to_string(config_.embed_dim));
  }
  lstm::load_pretrained(params_, emb_, vocab, table);
}

Var DiscrimModel::logit(Graph& g, const Clique& clique) const {
  const std::size_t arity = 2 * config_.half_window + 1;
  if (clique.sentences.size() != arity || clique.half_window != config_.half_window) {
    throw Error("clique arity " + std::to_string(clique.sentences.size()) + " does not match model arity " +
                std::to_string(arity));
  }
  const Var emb = g.param(emb_.name);
  std::vector<Var> parts;
  parts.reserve(arity);
  for (const auto& s : clique.sentences) {
    for (auto id : s.ids) {
      if (id >= vocab_size_) throw Error("token id outside model vocabulary");
    }
    parts.push_back(lstm::encode_sentence(g, enc_, emb, s));
  }
  const Var hidden = g.tanh(g.affine(g.param("discrim.clf.W1"), g.concat(parts), g.param("discrim.clf.b1")));
  return g.affine(g.param("discrim.clf.W2"), hidden, g.param("discrim.clf.b2"));
}

Var DiscrimModel::loss(Graph& g, const Clique& clique) const {
  return g.bce_with_logit(logit(g, clique), clique.label == text::CliqueLabel::kCoherent ? 1.0 : 0.0);
}

double DiscrimModel::classify(const Clique& clique) const {
  Graph g(params_);
  const double z = g.value(logit(g, clique)).data[0];
  return 1.0 / (1.0 + std::exp(-z));
}

double classify_clique(const DiscrimModel& model, const Clique& clique) { return model.classify(clique); }

double score_document_discrim(const DiscrimModel& model, std::span<const SentenceIds> paragraph) {
  const auto cliques = text::make_cliques(paragraph, model.half_window());
  double sum = 0.0;
  for (const auto& c : cliques) sum += model.classify(c);
  return sum / static_cast<double>(cliques.size());
}

Checkpoint DiscrimModel::to_checkpoint() const {
  Checkpoint ck;
  ck.metadata["kind"] = "discrim";
  ck.metadata["vocab_size"] = std::to_string(vocab_size_);
  ck.metadata["vocab_digest"] = std::to_string(vocab_digest_);
  ck.metadata["embed_dim"] = std::to_string(config_.embed_dim);
  ck.metadata["hidden_dim"] = std::to_string(config_.hidden_dim);
  ck.metadata["L"] = std::to_string(config_.half_window);
  store_params(ck, params_);
  return ck;
}

DiscrimModel DiscrimModel::from_checkpoint(const Checkpoint& ck) {
  ck.require_kind("discrim");
  DiscrimConfig config;
  config.embed_dim = ck.meta_size("embed_dim");
  config.hidden_dim = ck.meta_size("hidden_dim");
  config.half_window = ck.meta_size("L");
  DiscrimModel model(ck.meta_size("vocab_size"), std::stoull(ck.meta("vocab_digest")), config);
  load_params(ck, model.params_);
  return model;
}

DiscrimReport train_discriminative(DiscrimModel& model, std::span<const text::EncodedParagraph> corpus,
                                   std::optional<std::span<const SentenceIds>> explicit_pool) {
  const DiscrimConfig& cfg = model.config();
  std::vector<Clique> positives;
  std::vector<std::size_t> owner;  // paragraph index of each positive
  std::vector<SentenceIds> corpus_pool;
  for (std::size_t p = 0; p < corpus.size(); ++p) {
    if (corpus[p].empty()) continue;
    for (auto& c : text::make_cliques(corpus[p], cfg.half_window)) {
      positives.push_back(std::move(c));
      owner.push_back(p);
    }
    corpus_pool.insert(corpus_pool.end(), corpus[p].begin(), corpus[p].end());
  }
  if (positives.empty()) throw Error("discriminative training corpus is empty");

  const TrainConfig& tc = cfg.train;
  std::mt19937_64 neg_rng(tc.seed + 3);
  std::mt19937_64 order_rng(tc.seed + 1);
  DiscrimReport report;
  std::vector<Clique> epoch_set;
  const ExampleBuilder build = [&](Graph& g, std::size_t i) { return ExampleLoss{model.loss(g, epoch_set[i]), 1.0}; };

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    epoch_set = positives;
    for (std::size_t i = 0; i < positives.size(); ++i) {
      std::span<const SentenceIds> pool = corpus_pool;
      if (explicit_pool) {
        pool = *explicit_pool;
      } else if (cfg.pool == NegativePool::kDocument) {
        pool = corpus[owner[i]];
      }
      for (std::size_t r = 0; r < cfg.negatives_per_positive; ++r) {
        epoch_set.push_back(text::sample_negative(positives[i], pool, neg_rng));
      }
    }
    const double loss = run_epoch(model.params(), epoch_set.size(), build, tc, order_rng);
    report.epoch_loss.push_back(loss);
    if (tc.on_epoch) tc.on_epoch(epoch, loss);
  }
  return report;
}

double clique_accuracy(const DiscrimModel& model, std::span<const Clique> cliques) {
  if (cliques.empty()) throw Error("no cliques to classify");
  std::size_t correct = 0;
  for (const auto& c : cliques) {
    const bool coherent = model.classify(c) > 0.5;
    if (coherent == (c.label == text::CliqueLabel::kCoherent)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(cliques.size());
}

}  // namespace coherence::discrim
